#include "specdiff/numeric.hpp"

#include <cmath>
#include <stdexcept>

#include "specdiff/types.hpp"

namespace specdiff {

namespace {

double pairwise_sum_impl(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum_impl(v, h) + pairwise_sum_impl(v + h, n - h);
}

} // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

double simpson(const std::function<double(double)>& f, double a, double b,
               int nodes) {
  if (nodes < 3 || nodes % 2 == 0)
    throw validation_error("simpson: nodes must be odd and >= 3");
  const int n = nodes - 1; // even number of intervals
  const double h = (b - a) / n;
  std::vector<double> terms(static_cast<std::size_t>(nodes));
  terms[0] = f(a);
  terms[static_cast<std::size_t>(n)] = f(b);
  for (int i = 1; i < n; ++i) {
    double w = (i % 2 == 1) ? 4.0 : 2.0;
    terms[static_cast<std::size_t>(i)] = w * f(a + h * i);
  }
  return pairwise_sum(terms) * h / 3.0;
}

QuadratureResult simpson_adaptive(const std::function<double(double)>& f,
                                  double a, double b, int start_nodes,
                                  double rel_tol, int max_nodes,
                                  double scale) {
  int n = start_nodes;
  double prev = simpson(f, a, b, n);
  while (true) {
    int n2 = 2 * (n - 1) + 1;
    if (n2 > max_nodes)
      return {prev, n, false};
    double cur = simpson(f, a, b, n2);
    double ref = scale > 0.0 ? scale : std::abs(cur);
    if (ref == 0.0) ref = 1.0;
    if (std::abs(cur - prev) <= rel_tol * ref)
      return {cur, n2, true};
    prev = cur;
    n = n2;
  }
}

double sine_integral(double x) {
  const double ax = std::abs(x);
  double si;
  if (ax <= 8.0) {
    // Power series: sum_k (-1)^k x^(2k+1) / ((2k+1) (2k+1)!).
    const double x2 = ax * ax;
    double sum = 0.0;
    double pw = ax;    // x^(2k+1)
    double fact = 1.0; // (2k+1)!
    for (int k = 0; k <= 60; ++k) {
      double c = pw / ((2.0 * k + 1.0) * fact);
      sum += (k % 2 == 0) ? c : -c;
      if (std::abs(c) < 1e-18 * std::abs(sum)) break;
      pw *= x2;
      fact *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
    }
    si = sum;
  } else {
    // Auxiliary-function rational approximations; a few 1e-5 absolute near
    // x = 8, improving like 1/x^2.
    const double x2 = ax * ax;
    const double x4 = x2 * x2;
    double fx = (x4 + 7.241163 * x2 + 2.463936) /
                (x4 + 9.068580 * x2 + 7.157433) / ax;
    double gx = (x4 + 7.547478 * x2 + 1.564072) /
                (x4 + 12.723684 * x2 + 15.723606) / x2;
    si = pi / 2.0 - fx * std::cos(ax) - gx * std::sin(ax);
  }
  return x < 0.0 ? -si : si;
}

WeightedMean weighted_mean(std::span<const double> values,
                           std::span<const double> sigmas) {
  if (values.size() != sigmas.size() || values.empty())
    throw validation_error("weighted_mean: need equal, nonzero sizes");
  double sw = 0.0, swx = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(sigmas[i] > 0.0))
      throw validation_error("weighted_mean: sigmas must be > 0");
    double w = 1.0 / (sigmas[i] * sigmas[i]);
    sw += w;
    swx += w * values[i];
  }
  return {swx / sw, std::sqrt(1.0 / sw)};
}

} // namespace specdiff
