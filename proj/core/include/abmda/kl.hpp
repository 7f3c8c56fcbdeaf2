// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace abmda {

/// D_KL(Geometric(p) || Poisson(lambda)) with the geometric law on {0, 1, ...}:
/// the information lost when the Poisson stands in for the geometric. The
/// series is cut once the remaining geometric tail can no longer move the sum
/// by more than ~1e-13. Returns +inf for lambda == 0.
double kl_poisson_vs_geometric(double lambda, double p);

/// Same sum cut after exactly `n_terms` terms (k = 0 .. n_terms-1).
double kl_poisson_vs_geometric_terms(double lambda, double p, int n_terms);

struct KlPoint {
  double lambda = 0.0;
  double kl = 0.0;
};

/// `steps` evenly spaced lambdas from lambda_min to lambda_max inclusive.
std::vector<KlPoint> kl_curve(double p, double lambda_min, double lambda_max, int steps);

/// Minimizer over [lambda_min, lambda_max]: coarse grid, then golden-section
/// refinement inside the bracketing cell pair.
KlPoint kl_minimizer(double p, double lambda_min, double lambda_max, double tol = 1e-9);

}  // namespace abmda
