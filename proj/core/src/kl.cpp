// SPDX-License-Identifier: Apache-2.0
#include "abmda/kl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "abmda/error.hpp"

namespace abmda {

namespace {

void check_args(double lambda, double p) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ContractViolation("lambda must be finite and non-negative");
  if (!(p > 0.0 && p < 1.0)) throw ContractViolation("geometric p must lie in (0, 1)");
}

// g(k) * ln(g(k) / f(k)) in log space.
double kl_term(int k, double lambda, double log_p, double log_q, double log_lambda) {
  const double kd = static_cast<double>(k);
  const double log_g = log_p + kd * log_q;
  const double log_f = -lambda + kd * log_lambda - std::lgamma(kd + 1.0);
  return std::exp(log_g) * (log_g - log_f);
}

}  // namespace

double kl_poisson_vs_geometric(double lambda, double p) {
  check_args(lambda, p);
  if (lambda == 0.0) return std::numeric_limits<double>::infinity();
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_lambda = std::log(lambda);
  double sum = 0.0;
  constexpr int kMaxTerms = 10'000'000;
  for (int k = 0; k < kMaxTerms; ++k) {
    sum += kl_term(k, lambda, log_p, log_q, log_lambda);
    // Mass left after k is (1-p)^(k+1); each later term is at most that mass
    // times its log ratio, which grows only like k log k.
    const double log_tail = (k + 1.0) * log_q;
    const double kd = k + 1.0;
    const double log_ratio = std::abs(log_p + kd * log_q + lambda - kd * log_lambda + std::lgamma(kd + 1.0));
    if (log_tail < std::log(1e-12) && std::exp(log_tail) * (1.0 + 2.0 * log_ratio) / p < 1e-14) break;
  }
  return std::max(sum, 0.0);
}

double kl_poisson_vs_geometric_terms(double lambda, double p, int n_terms) {
  check_args(lambda, p);
  if (n_terms <= 0) throw ContractViolation("need at least one term");
  if (lambda == 0.0) return std::numeric_limits<double>::infinity();
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_lambda = std::log(lambda);
  double sum = 0.0;
  for (int k = 0; k < n_terms; ++k) sum += kl_term(k, lambda, log_p, log_q, log_lambda);
  return sum;
}

std::vector<KlPoint> kl_curve(double p, double lambda_min, double lambda_max, int steps) {
  if (steps < 2) throw ContractViolation("a curve needs at least 2 steps");
  if (!(lambda_min >= 0.0 && lambda_min < lambda_max)) throw ContractViolation("need 0 <= lambda_min < lambda_max");
  std::vector<KlPoint> curve;
  curve.reserve(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double lambda =
        i + 1 == steps ? lambda_max : lambda_min + (lambda_max - lambda_min) * i / static_cast<double>(steps - 1);
    curve.push_back({lambda, kl_poisson_vs_geometric(lambda, p)});
  }
  return curve;
}

KlPoint kl_minimizer(double p, double lambda_min, double lambda_max, double tol) {
  constexpr int kGrid = 401;
  const auto grid = kl_curve(p, lambda_min, lambda_max, kGrid);
  const auto best = std::min_element(grid.begin(), grid.end(),
                                     [](const KlPoint& a, const KlPoint& b) { return a.kl < b.kl; });
  const auto i = static_cast<std::size_t>(best - grid.begin());
  double a = grid[i == 0 ? 0 : i - 1].lambda;
  double b = grid[std::min(i + 1, grid.size() - 1)].lambda;

  // The curve is unimodal in lambda (convex in the Poisson parameter).
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = kl_poisson_vs_geometric(c, p);
  double fd = kl_poisson_vs_geometric(d, p);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = kl_poisson_vs_geometric(c, p);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = kl_poisson_vs_geometric(d, p);
    }
  }
  KlPoint refined{0.5 * (a + b), kl_poisson_vs_geometric(0.5 * (a + b), p)};
  return refined.kl <= best->kl ? refined : *best;
}

}  // namespace abmda
