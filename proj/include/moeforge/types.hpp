#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace moeforge {

/// Row-major dense matrix templated on the scalar type. Row-major storage
/// keeps the serialized tensor layout identical to the in-memory layout.
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Real = double;
using Matrix = MatrixX<Real>;
using Vector = VectorX<Real>;
using Index = Eigen::Index;

using TaskId = int;

}  // namespace moeforge
