#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "moeforge/errors.hpp"
#include "moeforge/rng.hpp"
#include "moeforge/types.hpp"

namespace moeforge {

template <typename Derived>
std::string shape_str(const Eigen::EigenBase<Derived>& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

/// Dense product with a fixed accumulation order: for each output (i, j) the
/// terms a(i, p) * b(p, j) are summed for p = 0, 1, ... left to right.
template <typename Scalar>
MatrixX<Scalar> matmul(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a) + " by " + shape_str(b));
  }
  MatrixX<Scalar> out(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.cols(); ++j) {
      Scalar acc = 0;
      for (Index p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
      out(i, j) = acc;
    }
  }
  return out;
}

/// (x - mean) / sqrt(var + eps) * gamma + beta with the population variance.
template <typename Scalar>
VectorX<Scalar> layer_norm(const VectorX<Scalar>& x, const VectorX<Scalar>& gamma,
                           const VectorX<Scalar>& beta, Scalar eps) {
  if (x.size() != gamma.size() || x.size() != beta.size()) {
    throw DimensionError("layer_norm: length mismatch x=" + std::to_string(x.size()) +
                         " gamma=" + std::to_string(gamma.size()) +
                         " beta=" + std::to_string(beta.size()));
  }
  if (x.size() == 0) throw ArgumentError("layer_norm: empty input");
  if (!(eps > 0)) throw ArgumentError("layer_norm: eps must be positive");
  const Scalar mean = x.mean();
  const VectorX<Scalar> centered = x.array() - mean;
  const Scalar var = centered.squaredNorm() / static_cast<Scalar>(x.size());
  const Scalar inv_std = Scalar(1) / std::sqrt(var + eps);
  return (centered.array() * inv_std * gamma.array() + beta.array()).matrix();
}

/// Max-subtracted softmax.
template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& logits) {
  if (logits.size() == 0) throw ArgumentError("softmax: empty input");
  if (!logits.allFinite()) throw NumericError("softmax: non-finite logits");
  const Scalar mx = logits.maxCoeff();
  VectorX<Scalar> e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry of
/// `at`. Works for any plain Eigen object (matrix or vector).
template <typename Plain, typename F>
Plain finite_diff_grad(F&& f, const Plain& at, typename Plain::Scalar h) {
  using Scalar = typename Plain::Scalar;
  if (!(h > 0)) throw ArgumentError("finite_diff_grad: h must be positive");
  Plain x = at;
  Plain grad(at.rows(), at.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar orig = x.data()[i];
    x.data()[i] = orig + h;
    const Scalar fp = f(static_cast<const Plain&>(x));
    x.data()[i] = orig - h;
    const Scalar fm = f(static_cast<const Plain&>(x));
    x.data()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_grad: non-finite function value at entry " +
                         std::to_string(i));
    }
    grad.data()[i] = (fp - fm) / (2 * h);
  }
  return grad;
}

/// max|a - b| / max(max|a|, max|b|): relative error of a whole parameter group.
template <typename DA, typename DB>
double group_relative_error(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("group_relative_error: " + shape_str(a) + " vs " + shape_str(b));
  }
  if (a.size() == 0) return 0.0;
  const double diff = (a - b).cwiseAbs().maxCoeff();
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return diff / scale;
}

template <typename Plain>
void fill_normal(Plain& m, Rng& rng, double stddev) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite values");
}

}  // namespace moeforge
