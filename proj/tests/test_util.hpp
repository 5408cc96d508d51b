#pragma once

#include "moeforge/numerics.hpp"
#include "moeforge/rng.hpp"

namespace moeforge::testing {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double stddev = 1.0) {
  Matrix m(rows, cols);
  fill_normal(m, rng, stddev);
  return m;
}

inline Vector random_vector(Index n, Rng& rng, double stddev = 1.0) {
  Vector v(n);
  fill_normal(v, rng, stddev);
  return v;
}

inline bool bytes_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::equal(a.data(), a.data() + a.size(), b.data());
}

}  // namespace moeforge::testing
