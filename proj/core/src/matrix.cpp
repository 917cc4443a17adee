#include "meter/matrix.hpp"

#include <cmath>
#include <sstream>

namespace meter {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("matrix: value count does not match " + shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("matrix: ragged initializer");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row(std::span<const double> v) {
  return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
}

Matrix Matrix::column(std::span<const double> v) {
  return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

Matrix matmul(const Matrix& a, const Matrix& b, bool transpose_b) {
  const std::size_t inner = transpose_b ? b.cols() : b.rows();
  const std::size_t out_cols = transpose_b ? b.rows() : b.cols();
  if (a.cols() != inner) {
    throw ShapeError("matmul: " + a.shape_string() + " * " + b.shape_string() +
                     (transpose_b ? "^T" : ""));
  }
  Matrix c(a.rows(), out_cols);
  if (transpose_b) {
    for (std::size_t i = 0; i < a.rows(); ++i) {
      const double* ar = a.data() + i * inner;
      for (std::size_t j = 0; j < out_cols; ++j) {
        const double* br = b.data() + j * inner;
        double acc = 0.0;
        for (std::size_t k = 0; k < inner; ++k) acc += ar[k] * br[k];
        c(i, j) = acc;
      }
    }
    return c;
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* cr = c.data() + i * out_cols;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* br = b.data() + k * out_cols;
      for (std::size_t j = 0; j < out_cols; ++j) cr[j] += aik * br[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: " + a.shape_string() + "^T * " + b.shape_string());
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* br = b.data() + k * b.cols();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* cr = c.data() + i * c.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) cr[j] += aki * br[j];
    }
  }
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c += b;
  return c;
}

Matrix& operator+=(Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "matrix add");
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "matrix sub");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

void affine_into(std::span<const double> x, const Matrix& w, std::span<const double> b,
                 std::span<double> out) {
  if (x.size() != w.rows() || b.size() != w.cols() || out.size() != w.cols()) {
    throw ShapeError("affine: input " + std::to_string(x.size()) + " against weights " +
                     w.shape_string());
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = b[j];
  const std::size_t n_out = w.cols();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xk = x[k];
    const double* wr = w.data() + k * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += xk * wr[j];
  }
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace meter
