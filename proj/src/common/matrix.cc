#include "pdistill/common/matrix.h"

#include <stdexcept>
#include <string>

namespace pdistill {

Matrix::Matrix(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("matrix data length " +
                                std::to_string(data_.size()) + " != " +
                                std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

std::vector<double> Matrix::column(int c) const {
  std::vector<double> out(rows_);
  for (int r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::slice_rows(int begin, int end) const {
  if (begin < 0 || end > rows_ || begin > end) {
    throw std::out_of_range("row slice [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") outside " +
                            std::to_string(rows_) + " rows");
  }
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(begin) * cols_,
                          data_.begin() + static_cast<std::ptrdiff_t>(end) * cols_);
  return Matrix(end - begin, cols_, std::move(out));
}

}  // namespace pdistill
