#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>

namespace spi {

// Row-major so that each observation is a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline std::span<const double> row_of(const Matrix& m, Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Copies the listed columns, in order, into a new matrix.
Matrix select_columns(const Matrix& m, std::span<const std::size_t> columns);

// Copies the listed rows, in order, into a new matrix.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);

}  // namespace spi
