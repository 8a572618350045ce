#include "specdiff/inhom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "specdiff/numeric.hpp"
#include "specdiff/tls.hpp"

namespace specdiff {

namespace {

constexpr int kMaxNodes = (1 << 18) + 1;
constexpr double kRelTol = 1e-6;

struct SimpsonGrid {
  std::vector<double> x;
  std::vector<double> w; // Simpson weights including h/3

  static SimpsonGrid make(double a, double b, int nodes) {
    SimpsonGrid g;
    g.x.resize(static_cast<std::size_t>(nodes));
    g.w.resize(static_cast<std::size_t>(nodes));
    const int n = nodes - 1;
    const double h = (b - a) / n;
    for (int i = 0; i <= n; ++i) {
      g.x[static_cast<std::size_t>(i)] = a + h * i;
      double wi = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      g.w[static_cast<std::size_t>(i)] = wi * h / 3.0;
    }
    return g;
  }
};

double weighted_sum(const std::vector<double>& w, const std::vector<double>& f,
                    std::vector<double>& buf) {
  buf.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) buf[i] = w[i] * f[i];
  return pairwise_sum(buf);
}

int doubled(int nodes) { return 2 * (nodes - 1) + 1; }

double fwhm_hom_angular(const DriveParams& drive, const EmitterParams& e) {
  return two_pi * homogeneous_fwhm(drive, e);
}

double fwhm_dist_angular(const InhomDistribution& dist) {
  if (dist.kind == InhomDistribution::Kind::gaussian)
    return two_pi * dist.fwhm;
  // characteristic width of a tabulated density from its standard deviation
  return dist.sigma_omega() * 2.0 * std::sqrt(2.0 * std::log(2.0));
}

// Standardized half-range for gaussian-measure quadrature.  The letter of the
// span rule (span x the wider of the two linewidths) is capped where the
// gaussian measure carries no mass, which is what makes the same grid work
// for near-delta and very broad distributions alike.
double gaussian_u_range(double span, double w_hom, double w_dist,
                        double sigma) {
  double letter = span * std::max(w_hom, w_dist) / sigma;
  double cap = std::max(12.0, span * w_dist / sigma);
  return std::min(letter, cap);
}

// Evaluates several gaussian-measure integrals Int phi(u) f_k(u) du on one
// shared doubling grid.  All integrals must stabilize to kRelTol.
std::vector<double> gauss_multi_integrate(
    double urange, int start_nodes,
    const std::function<void(double, double*)>& fill, int m,
    int* nodes_out = nullptr) {
  std::vector<double> prev;
  std::vector<double> vals(static_cast<std::size_t>(m));
  std::vector<double> f(static_cast<std::size_t>(m));
  std::vector<double> buf;
  for (int nodes = start_nodes; nodes <= kMaxNodes; nodes = doubled(nodes)) {
    auto grid = SimpsonGrid::make(-urange, urange, nodes);
    std::vector<std::vector<double>> comp(
        static_cast<std::size_t>(m),
        std::vector<double>(grid.x.size()));
    for (std::size_t i = 0; i < grid.x.size(); ++i) {
      double u = grid.x[i];
      double phi = std::exp(-0.5 * u * u);
      fill(u, f.data());
      for (int k = 0; k < m; ++k)
        comp[static_cast<std::size_t>(k)][i] = phi * f[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < m; ++k)
      vals[static_cast<std::size_t>(k)] =
          weighted_sum(grid.w, comp[static_cast<std::size_t>(k)], buf);
    if (!prev.empty()) {
      bool ok = true;
      for (int k = 0; k < m; ++k) {
        double scale = std::max(std::abs(vals[static_cast<std::size_t>(k)]),
                                std::numeric_limits<double>::min());
        if (std::abs(vals[static_cast<std::size_t>(k)] -
                     prev[static_cast<std::size_t>(k)]) > kRelTol * scale) {
          ok = false;
          break;
        }
      }
      if (ok) {
        if (nodes_out) *nodes_out = nodes;
        return vals;
      }
    }
    prev = vals;
  }
  throw numerical_error(
      "gaussian-measure quadrature did not converge within " +
      std::to_string(kMaxNodes) + " nodes");
}

// Same engine over a tabulated density's support.
std::vector<double> tabulated_multi_integrate(
    const InhomDistribution& dist, int start_nodes,
    const std::function<void(double, double*)>& fill, int m) {
  double a = dist.grid.front(), b = dist.grid.back();
  std::vector<double> prev;
  std::vector<double> vals(static_cast<std::size_t>(m));
  std::vector<double> f(static_cast<std::size_t>(m));
  std::vector<double> buf;
  for (int nodes = start_nodes; nodes <= kMaxNodes; nodes = doubled(nodes)) {
    auto grid = SimpsonGrid::make(a, b, nodes);
    std::vector<std::vector<double>> comp(
        static_cast<std::size_t>(m),
        std::vector<double>(grid.x.size()));
    for (std::size_t i = 0; i < grid.x.size(); ++i) {
      double w = grid.x[i];
      double p = dist.pdf(w);
      fill(w, f.data());
      for (int k = 0; k < m; ++k)
        comp[static_cast<std::size_t>(k)][i] = p * f[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < m; ++k)
      vals[static_cast<std::size_t>(k)] =
          weighted_sum(grid.w, comp[static_cast<std::size_t>(k)], buf);
    if (!prev.empty()) {
      bool ok = true;
      for (int k = 0; k < m; ++k) {
        double scale = std::max(std::abs(vals[static_cast<std::size_t>(k)]),
                                std::numeric_limits<double>::min());
        if (std::abs(vals[static_cast<std::size_t>(k)] -
                     prev[static_cast<std::size_t>(k)]) > kRelTol * scale) {
          ok = false;
          break;
        }
      }
      if (ok) return vals;
    }
    prev = vals;
  }
  throw numerical_error(
      "tabulated-measure quadrature did not converge within " +
      std::to_string(kMaxNodes) + " nodes");
}

double g2_closed_form(double tau, double delta, double omega, double gamma) {
  double oeff = std::hypot(omega, delta);
  double x = oeff * tau;
  double s = std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  return 1.0 - std::exp(-gamma * tau) * (std::cos(x) + gamma * tau * s);
}

} // namespace

// ---- InhomDistribution members ----

InhomDistribution InhomDistribution::make_tabulated(
    std::vector<double> grid_radps, std::vector<double> dens) {
  InhomDistribution d;
  d.kind = Kind::tabulated;
  d.grid = std::move(grid_radps);
  d.density = std::move(dens);
  if (d.grid.size() < 2 || d.grid.size() != d.density.size())
    throw validation_error(
        "InhomDistribution: tabulated needs >= 2 matching grid/density points");
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    if (i > 0 && !(d.grid[i] > d.grid[i - 1]))
      throw validation_error("InhomDistribution: grid must be strictly ascending");
    if (!(d.density[i] >= 0.0) || !std::isfinite(d.density[i]))
      throw validation_error("InhomDistribution: density must be >= 0");
  }
  double integral = 0.0;
  for (std::size_t i = 1; i < d.grid.size(); ++i)
    integral += 0.5 * (d.density[i] + d.density[i - 1]) *
                (d.grid[i] - d.grid[i - 1]);
  if (!(integral > 0.0))
    throw validation_error("InhomDistribution: density integrates to zero");
  for (double& v : d.density) v /= integral;
  d.validate();
  return d;
}

void InhomDistribution::validate() const {
  if (kind == Kind::gaussian) {
    if (!(fwhm > 0.0) || !std::isfinite(fwhm))
      throw validation_error("InhomDistribution: gaussian fwhm must be > 0");
    return;
  }
  if (grid.size() < 2 || grid.size() != density.size())
    throw validation_error("InhomDistribution: invalid tabulated data");
  double integral = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1]))
      throw validation_error("InhomDistribution: grid must be strictly ascending");
    integral += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
  }
  if (std::abs(integral - 1.0) > 1e-6)
    throw validation_error(
        "InhomDistribution: tabulated density must integrate to 1 (got " +
        std::to_string(integral) + ")");
}

double InhomDistribution::sigma_omega() const {
  if (kind == Kind::gaussian)
    return two_pi * fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double dx = grid[i] - grid[i - 1];
    double p0 = density[i - 1], p1 = density[i];
    double x0 = grid[i - 1], x1 = grid[i];
    m0 += 0.5 * (p0 + p1) * dx;
    m1 += dx / 6.0 * (p0 * (2 * x0 + x1) + p1 * (x0 + 2 * x1));
    m2 += dx / 12.0 *
          (p0 * (3 * x0 * x0 + 2 * x0 * x1 + x1 * x1) +
           p1 * (x0 * x0 + 2 * x0 * x1 + 3 * x1 * x1));
  }
  double mean = m1 / m0;
  double var = m2 / m0 - mean * mean;
  return std::sqrt(std::max(var, 0.0));
}

double InhomDistribution::pdf(double x) const {
  if (kind == Kind::gaussian) {
    double s = sigma_omega();
    double z = x / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(two_pi));
  }
  if (x <= grid.front() || x >= grid.back()) {
    if (x == grid.front()) return density.front();
    if (x == grid.back()) return density.back();
    return 0.0;
  }
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - grid.begin());
  std::size_t lo = hi - 1;
  double t = (x - grid[lo]) / (grid[hi] - grid[lo]);
  return density[lo] + t * (density[hi] - density[lo]);
}

// ---- module operations ----

double dist_center(const InhomDistribution& dist,
                   const EmitterParams& emitter) {
  if (dist.kind == InhomDistribution::Kind::gaussian)
    return emitter.center_freq;
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 1; i < dist.grid.size(); ++i) {
    double dx = dist.grid[i] - dist.grid[i - 1];
    double p0 = dist.density[i - 1], p1 = dist.density[i];
    double x0 = dist.grid[i - 1], x1 = dist.grid[i];
    m0 += 0.5 * (p0 + p1) * dx;
    m1 += dx / 6.0 * (p0 * (2 * x0 + x1) + p1 * (x0 + 2 * x1));
  }
  return m1 / m0;
}

double averaged_count_rate(const DriveParams& drive,
                           const EmitterParams& emitter,
                           const InhomDistribution& dist, double laser_freq,
                           const QuadratureSpec& quad) {
  emitter.validate();
  drive.validate();
  dist.validate();
  quad.validate();
  if (dist.kind == InhomDistribution::Kind::gaussian) {
    double sigma = dist.sigma_omega();
    double center = emitter.center_freq;
    double dbar = laser_freq - center;
    double urange = gaussian_u_range(quad.span, fwhm_hom_angular(drive, emitter),
                                     fwhm_dist_angular(dist), sigma);
    auto vals = gauss_multi_integrate(
        urange, quad.nodes,
        [&](double u, double* out) {
          out[0] = 1.0;
          out[1] = steady_state_population(drive, emitter, dbar - sigma * u);
        },
        2);
    return vals[1] / vals[0];
  }
  auto vals = tabulated_multi_integrate(
      dist, quad.nodes,
      [&](double w, double* out) {
        out[0] = 1.0;
        out[1] = steady_state_population(drive, emitter, laser_freq - w);
      },
      2);
  return vals[1] / vals[0];
}

double scan_fwhm(const DriveParams& drive, const EmitterParams& emitter,
                 const InhomDistribution& dist, const QuadratureSpec& quad) {
  emitter.validate();
  drive.validate();
  dist.validate();
  quad.validate();
  double center = dist_center(dist, emitter);
  double peak = averaged_count_rate(drive, emitter, dist, center, quad);
  if (!(peak > 0.0))
    throw numerical_error("scan_fwhm: zero peak rate");
  double half = peak / 2.0;
  double wscale = std::max(fwhm_hom_angular(drive, emitter),
                           fwhm_dist_angular(dist));

  auto crossing = [&](double sign) {
    double lo = 0.0; // offset from center, rate >= half here
    double hi = wscale / 2.0;
    int guard = 0;
    while (averaged_count_rate(drive, emitter, dist, center + sign * hi, quad) >
           half) {
      lo = hi;
      hi *= 2.0;
      if (++guard > 40)
        throw numerical_error("scan_fwhm: no half-maximum crossing found");
    }
    for (int i = 0; i < 80; ++i) {
      double mid = 0.5 * (lo + hi);
      double r = averaged_count_rate(drive, emitter, dist, center + sign * mid,
                                     quad);
      (r > half ? lo : hi) = mid;
      if (hi - lo < 1e-12 * wscale) break;
    }
    return 0.5 * (lo + hi);
  };

  double right = crossing(+1.0);
  double left = crossing(-1.0);
  return (right + left) / two_pi;
}

DiffusiveCurve g2_diffusive_curve(std::span<const double> taus,
                                  const DriveParams& drive,
                                  const EmitterParams& emitter,
                                  const QuadratureSpec& quad, bool adaptive) {
  emitter.validate();
  drive.validate();
  quad.validate();
  for (std::size_t i = 0; i < taus.size(); ++i)
    if (taus[i] < 0.0)
      throw validation_error("g2_diffusive: tau must be >= 0");
  if (!(drive.rabi > 0.0))
    throw validation_error("g2_diffusive: requires rabi > 0");

  const double t1 = emitter.t1, t2 = emitter.t2;
  const double om = drive.rabi;
  const double gamma = (t1 + t2) / (2.0 * t1 * t2);
  const double gl2 = 1.0 / (t2 * t2) + om * om * t1 / t2; // Lorentzian HWHM^2
  const double gl = std::sqrt(gl2);
  const double amp = 0.5 * om * om * t1 / t2;
  const double L = quad.span * 2.0 * gl; // span x FWHM on each side

  // exact mass of the squared Lorentzian beyond the grid (both sides)
  const double tail_d =
      2.0 * amp * amp *
      ((pi / 2.0 - std::atan(L / gl)) / (2.0 * gl * gl2) -
       L / (2.0 * gl2 * (L * L + gl2)));

  DiffusiveCurve result;
  result.narrow_dist_warning =
      emitter.inhom_fwhm < 3.0 * homogeneous_fwhm(drive, emitter);
  result.g2.assign(taus.size(), 0.0);

  // oscillatory tail, normalized so that it equals tail_d at tau = 0:
  // beyond the grid the integrand is amp^2/delta^4 (cos + gamma*tau*sinc),
  // reduced to sine integrals
  auto tail_k = [&](double tau) {
    if (tau == 0.0) return tail_d;
    double a = L * tau;
    double c4 = std::cos(a) / (3.0 * a * a * a) -
                std::sin(a) / (6.0 * a * a) - std::cos(a) / (6.0 * a) +
                (pi / 2.0 - sine_integral(a)) / 6.0;
    double s5 = std::sin(a) / (4.0 * a * a * a * a) + c4 / 4.0;
    double t4 = tau * tau * tau * (c4 + gamma * tau * s5);
    return tail_d * t4 * 3.0 * L * L * L;
  };

  std::vector<double> prev;
  std::vector<double> buf;
  int nodes_cap = adaptive ? kMaxNodes : quad.nodes;
  for (int nodes = quad.nodes; nodes <= nodes_cap; nodes = doubled(nodes)) {
    auto grid = SimpsonGrid::make(-L, L, nodes);
    std::vector<double> c2(grid.x.size());
    for (std::size_t i = 0; i < grid.x.size(); ++i) {
      double d = grid.x[i];
      double c = amp / (d * d + gl2);
      c2[i] = c * c;
    }
    double denom = weighted_sum(grid.w, c2, buf) + tail_d;

    std::vector<double> cur(taus.size());
    std::vector<double> integ(grid.x.size());
    for (std::size_t k = 0; k < taus.size(); ++k) {
      double tau = taus[k];
      if (tau == 0.0) {
        cur[k] = 0.0;
        continue;
      }
      for (std::size_t i = 0; i < grid.x.size(); ++i) {
        double d = grid.x[i];
        double oeff = std::hypot(om, d);
        double x = oeff * tau;
        double s = std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
        integ[i] = c2[i] * (std::cos(x) + gamma * tau * s);
      }
      double knum = weighted_sum(grid.w, integ, buf) + tail_k(tau);
      cur[k] = 1.0 - std::exp(-gamma * tau) * knum / denom;
    }

    if (!adaptive) {
      result.g2 = std::move(cur);
      result.nodes = nodes;
      return result;
    }
    if (!prev.empty()) {
      double dmax = 0.0;
      for (std::size_t k = 0; k < cur.size(); ++k)
        dmax = std::max(dmax, std::abs(cur[k] - prev[k]));
      if (dmax <= kRelTol) {
        result.g2 = std::move(cur);
        result.nodes = nodes;
        return result;
      }
    }
    prev = std::move(cur);
  }
  throw numerical_error("g2_diffusive: quadrature did not converge within " +
                        std::to_string(kMaxNodes) + " nodes");
}

double g2_diffusive(double tau, const DriveParams& drive,
                    const EmitterParams& emitter, const QuadratureSpec& quad,
                    bool* narrow_dist_warning) {
  std::array<double, 1> t{tau};
  auto curve = g2_diffusive_curve(t, drive, emitter, quad, true);
  if (narrow_dist_warning) *narrow_dist_warning = curve.narrow_dist_warning;
  return curve.g2[0];
}

std::vector<double> g2_diffusive_general_curve(
    std::span<const double> taus, const DriveParams& drive,
    const EmitterParams& emitter, const InhomDistribution& dist,
    double laser_freq, const QuadratureSpec& quad) {
  emitter.validate();
  drive.validate();
  dist.validate();
  quad.validate();
  for (std::size_t i = 0; i < taus.size(); ++i)
    if (taus[i] < 0.0)
      throw validation_error("g2_diffusive_general: tau must be >= 0");

  const double gamma = (emitter.t1 + emitter.t2) / (2.0 * emitter.t1 * emitter.t2);
  const double om = drive.rabi;
  const int m = static_cast<int>(taus.size()) + 1; // denominator first

  auto fill_for = [&](double delta, double* out) {
    double c = steady_state_population(drive, emitter, delta);
    double c2 = c * c;
    out[0] = c2;
    for (std::size_t k = 0; k < taus.size(); ++k)
      out[k + 1] =
          taus[k] == 0.0 ? 0.0 : c2 * g2_closed_form(taus[k], delta, om, gamma);
  };

  std::vector<double> vals;
  if (dist.kind == InhomDistribution::Kind::gaussian) {
    double sigma = dist.sigma_omega();
    double dbar = laser_freq - emitter.center_freq;
    double urange = gaussian_u_range(quad.span, fwhm_hom_angular(drive, emitter),
                                     fwhm_dist_angular(dist), sigma);
    vals = gauss_multi_integrate(
        urange, quad.nodes,
        [&](double u, double* out) { fill_for(dbar - sigma * u, out); }, m);
  } else {
    vals = tabulated_multi_integrate(
        dist, quad.nodes,
        [&](double w, double* out) { fill_for(laser_freq - w, out); }, m);
  }
  if (!(vals[0] > 0.0))
    throw numerical_error("g2_diffusive_general: zero weight integral");
  std::vector<double> out(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) out[k] = vals[k + 1] / vals[0];
  return out;
}

double g2_diffusive_general(double tau, const DriveParams& drive,
                            const EmitterParams& emitter,
                            const InhomDistribution& dist, double laser_freq,
                            const QuadratureSpec& quad) {
  std::array<double, 1> t{tau};
  return g2_diffusive_general_curve(t, drive, emitter, dist, laser_freq,
                                    quad)[0];
}

double bunching_asymptote(const DriveParams& drive,
                          const EmitterParams& emitter,
                          const InhomDistribution& dist, double laser_freq,
                          const QuadratureSpec& quad) {
  emitter.validate();
  drive.validate();
  dist.validate();
  quad.validate();
  if (!(drive.rabi > 0.0))
    throw validation_error("bunching_asymptote: requires rabi > 0");

  auto fill_for = [&](double delta, double* out) {
    double c = steady_state_population(drive, emitter, delta);
    out[0] = 1.0;
    out[1] = c;
    out[2] = c * c;
  };

  std::vector<double> vals;
  if (dist.kind == InhomDistribution::Kind::gaussian) {
    double sigma = dist.sigma_omega();
    double dbar = laser_freq - emitter.center_freq;
    double urange = gaussian_u_range(quad.span, fwhm_hom_angular(drive, emitter),
                                     fwhm_dist_angular(dist), sigma);
    vals = gauss_multi_integrate(
        urange, quad.nodes,
        [&](double u, double* out) { fill_for(dbar - sigma * u, out); }, 3);
  } else {
    vals = tabulated_multi_integrate(
        dist, quad.nodes,
        [&](double w, double* out) { fill_for(laser_freq - w, out); }, 3);
  }
  if (!(vals[1] > 0.0))
    throw numerical_error("bunching_asymptote: zero mean rate");
  return vals[2] * vals[0] / (vals[1] * vals[1]);
}

} // namespace specdiff
