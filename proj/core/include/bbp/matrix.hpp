#pragma once
// Dense row-major sample matrix plus the interval box describing a sampling
// domain. Deliberately minimal: rows are observations, columns are variables.

#include <cstddef>
#include <span>
#include <vector>

#include "bbp/error.hpp"

namespace bbp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

// One interval per variable.
using Box = std::vector<Interval>;

class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
    return out;
  }

  // New matrix holding the given columns, in the given order.
  Matrix select_columns(std::span<const int> cols) const {
    Matrix out(rows_, cols.size());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const int c = cols[j];
        if (c < 0 || static_cast<std::size_t>(c) >= cols_)
          throw Error(Errc::InvalidInput, "column index out of range");
        out.at(r, j) = at(r, static_cast<std::size_t>(c));
      }
    return out;
  }

  // New matrix holding the given rows, in the given order.
  Matrix select_rows(std::span<const std::size_t> rows) const {
    Matrix out(rows.size(), cols_);
    std::size_t i = 0;
    for (std::size_t r : rows) {
      if (r >= rows_) throw Error(Errc::InvalidInput, "row index out of range");
      for (std::size_t c = 0; c < cols_; ++c) out.at(i, c) = at(r, c);
      ++i;
    }
    return out;
  }

  const std::vector<double>& data() const { return data_; }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace bbp
