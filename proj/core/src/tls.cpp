#include "specdiff/tls.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace specdiff {

namespace {

double sinc(double x) {
  double ax = std::abs(x);
  if (ax < 1e-4) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

double decay_gamma(const EmitterParams& e) {
  return (e.t1 + e.t2) / (2.0 * e.t1 * e.t2);
}

// Bloch vector y = (u, v, w) with u = 2 Re rho_eg, v = 2 Im rho_eg,
// w = 2 rho_ee - 1.  dy/dt = A y + b.
struct BlochSystem {
  double g1, g2, delta, omega;

  std::array<double, 3> deriv(const std::array<double, 3>& y) const {
    return {-g2 * y[0] + delta * y[1],
            -delta * y[0] - g2 * y[1] - omega * y[2],
            omega * y[1] - g1 * (y[2] + 1.0)};
  }

  std::array<double, 3> rk4_step(const std::array<double, 3>& y,
                                 double h) const {
    auto k1 = deriv(y);
    std::array<double, 3> t;
    for (int i = 0; i < 3; ++i) t[i] = y[i] + 0.5 * h * k1[i];
    auto k2 = deriv(t);
    for (int i = 0; i < 3; ++i) t[i] = y[i] + 0.5 * h * k2[i];
    auto k3 = deriv(t);
    for (int i = 0; i < 3; ++i) t[i] = y[i] + h * k3[i];
    auto k4 = deriv(t);
    std::array<double, 3> out;
    for (int i = 0; i < 3; ++i)
      out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
  }

  double residual(const std::array<double, 3>& y) const {
    auto d = deriv(y);
    // density-matrix scale: y components are twice the matrix elements
    return 0.5 * std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  }
};

BlochState to_state(const std::array<double, 3>& y) {
  return {(y[2] + 1.0) / 2.0, y[0] / 2.0, y[1] / 2.0};
}

void check_physical(const std::array<double, 3>& y) {
  // 1e-7 leaves room for RK4 truncation error right at the purity boundary,
  // which the reset state sits on exactly.
  if (!to_state(y).physical(1e-7))
    throw numerical_error(
        "integrate_master_equation: unphysical Bloch state encountered");
}

std::array<double, 3> exact_steady(const BlochSystem& s) {
  Eigen::Matrix3d A;
  A << -s.g2, s.delta, 0.0, -s.delta, -s.g2, -s.omega, 0.0, s.omega, -s.g1;
  Eigen::Vector3d b(0.0, 0.0, -s.g1);
  Eigen::Vector3d y = A.fullPivLu().solve(-b);
  return {y[0], y[1], y[2]};
}

// One full evaluation of the regression curve at a given step size.
std::vector<double> regression_curve(const BlochSystem& sys,
                                     const EmitterParams& emitter,
                                     std::span<const double> tau_grid,
                                     double h, double p_ss, long* steps_out) {
  std::array<double, 3> y = {0.0, 0.0, -1.0}; // reset state after emission
  std::vector<double> out;
  out.reserve(tau_grid.size());
  double t = 0.0;
  long steps = 0;
  for (double tau : tau_grid) {
    while (t + h <= tau) {
      y = sys.rk4_step(y, h);
      t += h;
      ++steps;
      check_physical(y);
    }
    if (tau > t) {
      // partial step onto the grid point; keep marching from the grid point
      y = sys.rk4_step(y, tau - t);
      t = tau;
      ++steps;
      check_physical(y);
    }
    out.push_back(to_state(y).rho_ee / p_ss);
  }
  if (steps_out) *steps_out = steps;
  return out;
}

} // namespace

double steady_state_population(const DriveParams& drive,
                               const EmitterParams& emitter, double detuning) {
  emitter.validate();
  drive.validate();
  double num = 0.5 * drive.rabi * drive.rabi * emitter.t1 / emitter.t2;
  double g2sq = 1.0 / (emitter.t2 * emitter.t2);
  return num / (detuning * detuning + g2sq +
                drive.rabi * drive.rabi * emitter.t1 / emitter.t2);
}

double homogeneous_fwhm(const DriveParams& drive,
                        const EmitterParams& emitter) {
  emitter.validate();
  drive.validate();
  double s = drive.saturation(emitter);
  return std::sqrt(1.0 + s) / (pi * emitter.t2);
}

double g2_homogeneous(double tau, double detuning, const DriveParams& drive,
                      const EmitterParams& emitter) {
  emitter.validate();
  drive.validate();
  double at = std::abs(tau);
  double g = decay_gamma(emitter);
  double oeff = std::hypot(drive.rabi, detuning);
  double x = oeff * at;
  return 1.0 - std::exp(-g * at) * (std::cos(x) + g * at * sinc(x));
}

double g2_envelope_bound(double tau, double detuning, const DriveParams& drive,
                         const EmitterParams& emitter) {
  double g = decay_gamma(emitter);
  double oeff = std::hypot(drive.rabi, detuning);
  if (oeff <= 0.0)
    throw validation_error("g2_envelope_bound: needs Omega or detuning > 0");
  return std::exp(-g * std::abs(tau)) * (1.0 + g / oeff);
}

BlochState bloch_steady_state(const DriveParams& drive,
                              const EmitterParams& emitter, double detuning) {
  emitter.validate();
  drive.validate();
  BlochSystem sys{emitter.gamma1(), emitter.gamma2(), detuning, drive.rabi};
  return to_state(exact_steady(sys));
}

std::vector<double> integrate_master_equation(
    const DriveParams& drive, const EmitterParams& emitter, double detuning,
    std::span<const double> tau_grid, MasterEquationDiagnostics* diag) {
  emitter.validate();
  drive.validate();
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (tau_grid[i] < 0.0 || (i > 0 && tau_grid[i] < tau_grid[i - 1]))
      throw validation_error(
          "integrate_master_equation: tau_grid must be ascending, >= 0");
  }

  if (drive.rabi == 0.0) {
    // No drive: no emission rate to correlate.  Return the Omega -> 0 limit
    // of the closed form, which the regression construction approaches
    // continuously as rabi -> 0.
    std::vector<double> out;
    out.reserve(tau_grid.size());
    for (double tau : tau_grid)
      out.push_back(g2_homogeneous(tau, detuning, drive, emitter));
    if (diag) *diag = {};
    return out;
  }

  BlochSystem sys{emitter.gamma1(), emitter.gamma2(), detuning, drive.rabi};
  double oeff = std::hypot(drive.rabi, detuning);
  double h0 = std::min({emitter.t1, emitter.t2, two_pi / oeff}) / 50.0;

  // Steady state: integrate 50*max(T1,T2) from the ground state, then verify
  // the residual; fall back to the exact 3x3 solve if integration has not
  // settled (it always should for these linear, damped equations).
  std::array<double, 3> y = {0.0, 0.0, -1.0};
  double horizon = 50.0 * std::max(emitter.t1, emitter.t2);
  long nst = static_cast<long>(std::ceil(horizon / h0));
  for (long i = 0; i < nst; ++i) {
    y = sys.rk4_step(y, h0);
    check_physical(y);
  }
  double resid = sys.residual(y);
  bool from_solve = false;
  if (!(resid < 1e-10 * emitter.gamma1())) {
    y = exact_steady(sys);
    resid = sys.residual(y);
    from_solve = true;
  }
  double p_ss = to_state(y).rho_ee;
  if (!(p_ss > 0.0))
    throw numerical_error(
        "integrate_master_equation: steady-state population is zero (residual " +
        std::to_string(resid) + ")");

  // Regression curve with step halving until stable to 1e-6.
  double h = h0;
  long steps = 0;
  std::vector<double> cur = regression_curve(sys, emitter, tau_grid, h, p_ss,
                                             &steps);
  int halvings = 0;
  const int max_halvings = 12;
  while (true) {
    if (halvings >= max_halvings)
      throw numerical_error(
          "integrate_master_equation: step-halving sweep did not converge "
          "after " + std::to_string(halvings) + " halvings (step " +
          std::to_string(h) + ", steps " + std::to_string(steps) + ")");
    double h2 = h / 2.0;
    long steps2 = 0;
    std::vector<double> next =
        regression_curve(sys, emitter, tau_grid, h2, p_ss, &steps2);
    ++halvings;
    double dmax = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i)
      dmax = std::max(dmax, std::abs(next[i] - cur[i]));
    cur = std::move(next);
    h = h2;
    steps = steps2;
    if (dmax < 1e-6) break;
  }

  if (diag) *diag = {h, halvings, steps, resid, from_solve};
  return cur;
}

} // namespace specdiff
