#pragma once

#include <cstddef>
#include <vector>

#include "meter/matrix.hpp"

namespace meter {

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values[i]
};

// Cyclic Jacobi rotations on a symmetric matrix. Sweeps until the
// off-diagonal Frobenius mass falls below tol * ||A||_F or max_sweeps runs out.
EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tol = 1e-14,
                                int max_sweeps = 100);

// Sample covariance (divisor n - 1) of row-stacked samples.
Matrix covariance(const std::vector<Vector>& samples);

// Smallest k whose top-k covariance eigenvalues cover `explained` of the total
// variance. Returns 1 when the total variance is zero.
std::size_t pca_latent_dim(const std::vector<Vector>& samples, double explained);

}  // namespace meter
