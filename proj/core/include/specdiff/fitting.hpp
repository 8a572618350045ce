#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "specdiff/correlator.hpp"
#include "specdiff/types.hpp"

namespace specdiff {

struct FitParam {
  double value = 0.0;
  double sigma = 0.0; // 1-sigma; infinity marks an unresolved direction
};

enum class ModelId { exp_decay, gaussian_line, g2_zero_detuning, g2_diffusive };

struct FitResult {
  std::map<std::string, FitParam> params;
  ModelId model_id = ModelId::exp_decay;
  double residual_norm = 0.0; // sqrt(chi2 / dof), dimensionless
  bool converged = false;
  int iterations = 0;
};

// Fits A * exp(-t / t1) + B to a (time, counts) histogram.  Bins are
// weighted by 1/max(counts, 1), the Poisson variance estimate, so the
// reported sigmas are absolute.  Parameter keys: amplitude, t1_s, offset.
// Needs at least 10 points with nonnegative counts, not all zero.
FitResult fit_exp_decay(
    const std::vector<std::pair<double, double>>& histogram);

// Fits amplitude * exp(-4 ln2 (f - center)^2 / fwhm^2) + offset to a
// (frequency, rate) scan, uniform weights.  Parameter keys: amplitude,
// center_hz, fwhm_hz, offset.  Needs at least 7 points.
FitResult fit_gaussian_line(
    const std::vector<std::pair<double, double>>& scan);

enum class G2FitModel { zero_detuning, diffusive };

struct G2FitOptions {
  double t1 = 1.83e-9;      // fixed population lifetime, seconds
  bool free_t1 = false;     // also fit t1 (degenerate with t2 at low drive)
  std::optional<double> init_omega; // rad/s; default from the first g2 peak
  std::optional<double> init_t2;    // seconds; default t1
  QuadratureSpec quad{8.0, 801};    // diffusive model evaluation grid
};

// Extracts (Omega_R, T2) from a short-delay g2 curve.  zero_detuning uses
// the single-detuning closed form at zero detuning; diffusive uses the
// detuning-averaged curve (emission-rate-squared weighting).  The model is
// evaluated at bin centers: arithmetic for uniform-width bins, geometric
// otherwise.  Weighted by 1/stat_err^2 when every bin carries a positive
// error, else uniform.  Parameter keys: omega_r_rad_s, t2_s, and t1_s when
// freed.  A curve without resolved oscillations is returned with the
// omega_r_rad_s sigma covering zero rather than as an error.
FitResult fit_g2_short(const G2Curve& curve, G2FitModel model,
                       const G2FitOptions& options);

struct BiasTableRow {
  double true_omega_r_t1 = 0.0;
  double true_t2_t1 = 0.0;
  double fitted_omega_r_t1 = 0.0;
  double fitted_t2_t1 = 0.0;
  bool fit_ok = true; // row kept even when the underlying fit failed
};

// Systematic-bias table: for each Omega_R * T1 in omega_grid, generate a
// noiseless diffusion-averaged curve (t1 = 1.83 ns, t2 = t2_over_t1 * t1,
// delay grid k * 0.25 ns for k = 0..60) and refit it with the
// zero-detuning model, T1 held fixed.  Quantifies how ignoring spectral
// diffusion inflates Omega_R and deflates T2.
std::vector<BiasTableRow> bias_study(const std::vector<double>& omega_grid,
                                     double t2_over_t1);

struct PowerCalibration {
  double power_cal = 0.0; // slope k of Omega_R^2 = k * P, rad^2/s^2/W
  double p_sat = 0.0;     // saturation power 1 / (k * t1 * t2), W
};

// Least-squares slope of Omega_R^2 versus optical power through the
// origin.  Throws numerical_error when the slope is not positive.
PowerCalibration power_calibration(const std::vector<double>& powers_w,
                                   const std::vector<double>& omegas_rad_s,
                                   const EmitterParams& emitter);

} // namespace specdiff
