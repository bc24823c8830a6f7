#include "bsdtq/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bsdtq/errors.hpp"

namespace bsdtq {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DomainError("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                      std::to_string(rows * cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw DomainError("row index out of range");
    std::ranges::copy(row(indices[i]), out.row(i).begin());
  }
  return out;
}

bool Matrix::all_finite() const noexcept { return bsdtq::all_finite(data_); }

bool all_finite(std::span<const double> v) noexcept {
  return std::ranges::all_of(v, [](double x) { return std::isfinite(x); });
}

}  // namespace bsdtq
