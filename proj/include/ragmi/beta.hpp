#pragma once

namespace ragmi {

/// Regularized incomplete Beta function I_x(a, b), i.e. the CDF of
/// Beta(a, b) at x. Continued-fraction evaluation with 1e-12 tolerance.
double beta_cdf(double x, double a, double b);

}  // namespace ragmi
