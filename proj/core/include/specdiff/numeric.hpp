#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

// Small numerical utilities shared across the library: deterministic
// summation, composite Simpson quadrature with node doubling, and the sine
// integral used by analytic tail corrections.

namespace specdiff {

// Pairwise (cascade) summation.  Deterministic for a fixed input order and
// far better conditioned than sequential accumulation on long arrays.
double pairwise_sum(std::span<const double> values);

// Composite Simpson rule over [a, b] with `nodes` points (odd, >= 3).
double simpson(const std::function<double(double)>& f, double a, double b,
               int nodes);

struct QuadratureResult {
  double value = 0.0;
  int nodes = 0;
  bool converged = false;
};

// Simpson with node doubling (n -> 2n-1) until successive estimates agree to
// rel_tol (relative to scale, or |value| if scale <= 0) or max_nodes is hit.
QuadratureResult simpson_adaptive(const std::function<double(double)>& f,
                                  double a, double b, int start_nodes,
                                  double rel_tol, int max_nodes = (1 << 20) + 1,
                                  double scale = 0.0);

// Sine integral Si(x) = integral_0^x sin(t)/t dt.  Near machine precision
// for |x| <= 8 (power series); a rational approximation beyond, accurate to
// a few 1e-5 absolute near the switchover and improving like 1/x^2.
double sine_integral(double x);

// Weighted mean and its standard error from independent points with standard
// deviations sigma (weights 1/sigma^2).  Returns {mean, sigma_mean}.
struct WeightedMean {
  double mean = 0.0;
  double sigma = 0.0;
};
WeightedMean weighted_mean(std::span<const double> values,
                           std::span<const double> sigmas);

} // namespace specdiff
