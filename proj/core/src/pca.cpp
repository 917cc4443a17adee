#include "meter/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace meter {

EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tol, int max_sweeps) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) throw ShapeError("jacobi_eigen: matrix is not square");
  Matrix a = symmetric;
  Matrix v = Matrix::identity(n);
  const double scale = std::max(frobenius_norm(a), 1e-300);

  auto off_diagonal = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) acc += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(acc);
  };

  for (int sweep = 0; sweep < max_sweeps && off_diagonal() > tol * scale; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  EigenDecomposition out{Vector(n), Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = a(order[i], order[i]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, i) = v(k, order[i]);
  }
  return out;
}

Matrix covariance(const std::vector<Vector>& samples) {
  if (samples.size() < 2) throw ContractError("covariance: need at least two samples");
  const std::size_t d = samples.front().size();
  Vector mean(d, 0.0);
  for (const auto& s : samples) {
    if (s.size() != d) throw ShapeError("covariance: ragged samples");
    for (std::size_t j = 0; j < d; ++j) mean[j] += s[j];
  }
  for (double& m : mean) m /= static_cast<double>(samples.size());
  Matrix cov(d, d);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = s[i] - mean[i];
      for (std::size_t j = i; j < d; ++j) cov(i, j) += di * (s[j] - mean[j]);
    }
  }
  const double denom = static_cast<double>(samples.size() - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= denom;
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

std::size_t pca_latent_dim(const std::vector<Vector>& samples, double explained) {
  if (!(explained > 0.0 && explained <= 1.0)) {
    throw ContractError("pca_latent_dim: explained fraction must lie in (0, 1]");
  }
  const Matrix cov = covariance(samples);
  const EigenDecomposition eig = jacobi_eigen(cov);
  // Eigenvalues below this are numerical noise of a PSD matrix.
  const double noise = 1e-12 * std::max(1.0, std::abs(eig.values.empty() ? 0.0 : eig.values[0]));
  double total = 0.0;
  std::size_t positive = 0;
  for (double ev : eig.values) {
    if (ev > noise) {
      total += ev;
      ++positive;
    }
  }
  if (total <= 0.0) return 1;
  const double target = explained * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < positive; ++k) {
    acc += eig.values[k];
    // Relative slack so that explained = 1 stops at the last positive value.
    if (acc >= target * (1.0 - 1e-12)) return k + 1;
  }
  return positive;
}

}  // namespace meter
