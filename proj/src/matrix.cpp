#include "gismo/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gismo/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "matrix file I/O assumes a little-endian host");

namespace gismo {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    check_invariant(row.size() == m.cols_, "Matrix::from_rows: ragged rows");
    std::size_t c = 0;
    for (double v : row) m.at(r, c++) = v;
    ++r;
  }
  return m;
}

void Matrix::fill(double v) {
  std::ranges::fill(data_, v);
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_invariant(a.cols() == b.rows(), "matmul: shape mismatch");
  Matrix c(a.rows(), b.cols());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    double* ci = c.row(static_cast<std::size_t>(i));
    const double* ai = a.row(static_cast<std::size_t>(i));
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      if (av == 0.0) continue;
      const double* bk = b.row(kk);
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_invariant(a.cols() == b.cols(), "matmul_nt: shape mismatch");
  Matrix c(a.rows(), b.rows());
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    double* ci = c.row(static_cast<std::size_t>(i));
    const double* ai = a.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
      ci[j] = acc;
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_invariant(a.rows() == b.rows(), "matmul_tn: shape mismatch");
  Matrix c(a.cols(), b.cols());
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
    double* ci = c.row(static_cast<std::size_t>(i));
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = a.at(kk, static_cast<std::size_t>(i));
      if (av == 0.0) continue;
      const double* bk = b.row(kk);
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
  return c;
}

Matrix relu(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  const double* in = x.data();
  double* out = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return y;
}

void add_inplace(Matrix& a, const Matrix& b) {
  check_invariant(a.same_shape(b), "add_inplace: shape mismatch");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void scale_inplace(Matrix& a, double s) {
  double* pa = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] *= s;
}

Matrix concat_cols(const std::vector<const Matrix*>& parts) {
  check_invariant(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts.front()->rows();
  std::size_t cols = 0;
  for (const Matrix* p : parts) {
    check_invariant(p->rows() == rows, "concat_cols: shape mismatch");
    cols += p->cols();
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.row(r);
    for (const Matrix* p : parts) {
      std::memcpy(dst, p->row(r), p->cols() * sizeof(double));
      dst += p->cols();
    }
  }
  return out;
}

Matrix mean_rows(const Matrix& x, std::span<const std::uint32_t> rows) {
  check_invariant(!rows.empty(), "mean_rows: empty index set");
  Matrix out(1, x.cols());
  double* acc = out.data();
  for (std::uint32_t r : rows) {
    check_invariant(r < x.rows(), "mean_rows: row index out of range");
    const double* src = x.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) acc[c] += src[c];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t c = 0; c < x.cols(); ++c) acc[c] *= inv;
  return out;
}

namespace {
constexpr char kMagic[4] = {'S', 'U', 'B', 'M'};
}

void save_matrix(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  out.write(kMagic, 4);
  const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
  require(out.good(), "write failed: " + path);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open matrix file: " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
          "bad magic bytes in matrix file: " + path);
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  require(in.good(), "truncated matrix header: " + path);
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  require(in.gcount() == static_cast<std::streamsize>(m.size() * sizeof(double)),
          "truncated matrix payload: " + path);
  return m;
}

void save_row_index(const std::vector<std::string>& names, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot open for writing: " + path);
  for (std::size_t i = 0; i < names.size(); ++i) {
    nlohmann::json j{{"name", names[i]}, {"row", i}};
    out << j.dump() << '\n';
  }
  require(out.good(), "write failed: " + path);
}

std::unordered_map<std::string, std::uint32_t> load_row_index(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open row index file: " + path);
  std::unordered_map<std::string, std::uint32_t> index;
  std::unordered_map<std::uint32_t, std::string> seen_rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    std::string name;
    if (j.contains("name")) {
      name = j.at("name").get<std::string>();
    } else if (j.contains("recipe_id")) {
      name = j.at("recipe_id").get<std::string>();
    } else {
      throw FormatError(path + " line " + std::to_string(lineno) +
                        ": missing \"name\" (or \"recipe_id\") field");
    }
    require(j.contains("row"), path + " line " + std::to_string(lineno) +
                                   ": missing \"row\" field");
    const std::uint32_t row = j.at("row").get<std::uint32_t>();
    require(index.emplace(name, row).second,
            path + ": duplicate name \"" + name + "\"");
    require(seen_rows.emplace(row, name).second,
            path + ": duplicate row " + std::to_string(row));
  }
  return index;
}

}  // namespace gismo
