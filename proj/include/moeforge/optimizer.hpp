#pragma once

#include <cmath>
#include <cstdint>

#include "moeforge/numerics.hpp"

namespace moeforge {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moments of one parameter tensor plus its own step counter.
/// Counters are per tensor because frozen tensors stop stepping and merged
/// experts restart from zero.
template <typename Plain>
struct Moments {
  Plain m;
  Plain v;
  std::int64_t step = 0;

  Moments() = default;
  explicit Moments(const Plain& like) { reset(like); }

  void reset(const Plain& like) {
    m = Plain::Zero(like.rows(), like.cols());
    v = Plain::Zero(like.rows(), like.cols());
    step = 0;
  }
};

/// Decoupled weight decay, then the bias-corrected Adam update.
template <typename Plain>
void adamw_step(Plain& params, const Plain& grads, Moments<Plain>& st, const AdamWConfig& cfg) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols()) {
    throw DimensionError("adamw_step: params " + shape_str(params) + " vs grads " +
                         shape_str(grads));
  }
  if (st.m.rows() != params.rows() || st.m.cols() != params.cols()) {
    throw DimensionError("adamw_step: moments " + shape_str(st.m) + " vs params " +
                         shape_str(params));
  }
  ++st.step;
  const double t = static_cast<double>(st.step);
  params *= (1.0 - cfg.lr * cfg.weight_decay);
  st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * grads;
  st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  params.array() -= cfg.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + cfg.eps);
}

}  // namespace moeforge
