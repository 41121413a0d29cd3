#pragma once

// Gamma-family special functions used by the Dirichlet losses.
//
// Accuracy targets (float64):
//   digamma    <= 1e-10 absolute for x >= 1e-3
//   trigamma   <= 1e-10 relative for x >= 1e-3
//   log_gamma  <= 1e-12 relative for x >= 0.5 (absolute near the roots at 1 and 2)
//
// All three reject x <= 0 and non-finite x with std::domain_error.

namespace rbedl::special {

double digamma(double x);
double trigamma(double x);
double log_gamma(double x);

}  // namespace rbedl::special
