#pragma once

#include <cstdint>

namespace rehab {

// Regularized lower incomplete gamma P(a, x); Q(a, x) = 1 - P(a, x).
// Series expansion for x < a + 1, continued fraction otherwise.
// Relative accuracy ~1e-14 over the parameter ranges used here.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Survival function of the chi-square distribution with df degrees of freedom.
double chi2_sf(double x, double df);

// Two-sided tail helpers for the standard normal.
double normal_sf(double z);

// log of binomial coefficient C(n, k); returns -inf outside the support.
double log_choose(double n, double k);

}  // namespace rehab
