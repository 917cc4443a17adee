#pragma once

namespace meter {

// Digamma function psi(x) for x > 0. Shifts the argument above 10 with the
// recurrence psi(x) = psi(x + 1) - 1/x, then sums the asymptotic series.
// Throws DomainError for x <= 0 or non-finite x.
double digamma(double x);

}  // namespace meter
