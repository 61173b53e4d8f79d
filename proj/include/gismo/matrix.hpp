#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace gismo {

// Dense row-major matrix of 64-bit reals. All model math runs on these;
// the kernels below are written so that every output element is accumulated
// sequentially by a single thread, which makes results bitwise-identical
// for any OpenMP thread count.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  void fill(double v);
  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool all_finite() const;

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A·B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A·Bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = Aᵀ·B
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix relu(const Matrix& x);
void add_inplace(Matrix& a, const Matrix& b);
void scale_inplace(Matrix& a, double s);

Matrix concat_cols(const std::vector<const Matrix*>& parts);

// Mean of the selected rows; errors on an empty index set.
Matrix mean_rows(const Matrix& x, std::span<const std::uint32_t> rows);

// Binary matrix file: magic "SUBM", little-endian u32 rows, u32 cols, then
// rows*cols little-endian f64, row-major.
void save_matrix(const Matrix& m, const std::string& path);
Matrix load_matrix(const std::string& path);

// Sidecar row index: JSON lines {"name": <str>, "row": <int>}. Readers also
// accept "recipe_id" in place of "name". Names and rows must each be unique.
void save_row_index(const std::vector<std::string>& names, const std::string& path);
std::unordered_map<std::string, std::uint32_t> load_row_index(const std::string& path);

}  // namespace gismo
