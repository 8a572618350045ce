#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Shared parameter types for a resonantly driven two-level emitter whose
// transition frequency wanders slowly (spectral diffusion).  All quantities
// are SI at API boundaries: times in seconds, angular frequencies and decay
// rates in rad/s, ordinary frequencies (linewidths given as FWHM) in Hz.

namespace specdiff {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Thrown when a parameter struct violates its documented invariants.
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when an algorithm fails to converge or data is unusable
// (e.g. no bunching plateau found, quadrature not converged).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lifetimes of the emitter plus the static description of its spectral
// wandering.  t2 covers pure dephasing on top of radiative decay, so
// 0 < t2 <= 2*t1 always.  inhom_fwhm is the FWHM (Hz) of the Gaussian
// distribution the transition frequency is drawn from; 0 disables wandering.
struct EmitterParams {
  double t1 = 0.0;          // population lifetime [s]
  double t2 = 0.0;          // coherence lifetime [s]
  double center_freq = 0.0; // mean transition angular frequency offset [rad/s]
  double inhom_fwhm = 0.0;  // FWHM of frequency distribution [Hz]

  void validate() const {
    if (!(t1 > 0.0)) throw validation_error("EmitterParams: t1 must be > 0");
    if (!(t2 > 0.0)) throw validation_error("EmitterParams: t2 must be > 0");
    if (t2 > 2.0 * t1)
      throw validation_error("EmitterParams: t2 must satisfy t2 <= 2*t1");
    if (!(inhom_fwhm >= 0.0) || !std::isfinite(inhom_fwhm))
      throw validation_error("EmitterParams: inhom_fwhm must be >= 0");
    if (!std::isfinite(center_freq))
      throw validation_error("EmitterParams: center_freq must be finite");
  }

  double gamma1() const { return 1.0 / t1; } // population decay rate [rad/s]
  double gamma2() const { return 1.0 / t2; } // coherence decay rate [rad/s]
  // Gaussian standard deviation of the angular-frequency distribution [rad/s].
  double inhom_sigma_omega() const {
    return two_pi * inhom_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  }
};

// Continuous-wave drive.
struct DriveParams {
  double rabi = 0.0;       // Rabi angular frequency [rad/s]
  double laser_freq = 0.0; // laser angular frequency offset, same origin as
                           // EmitterParams::center_freq [rad/s]
  // Optional power-to-drive calibration: rabi^2 = power_cal * P [rad^2/s^2/W].
  std::optional<double> power_cal;

  void validate() const {
    if (!(rabi >= 0.0) || !std::isfinite(rabi))
      throw validation_error("DriveParams: rabi must be >= 0");
    if (!std::isfinite(laser_freq))
      throw validation_error("DriveParams: laser_freq must be finite");
    if (power_cal && !(*power_cal > 0.0))
      throw validation_error("DriveParams: power_cal must be > 0");
  }

  // Dimensionless saturation parameter rabi^2 * t1 * t2.
  double saturation(const EmitterParams& e) const {
    return rabi * rabi * e.t1 * e.t2;
  }
};

// Density-matrix elements of the two-level system observable in this model:
// excited population and the slowly varying optical coherence.
struct BlochState {
  double rho_ee = 0.0;
  double coh_re = 0.0;
  double coh_im = 0.0;

  // Physicality: |rho_eg|^2 <= rho_ee * (1 - rho_ee), up to tolerance.
  bool physical(double tol = 1e-9) const {
    if (rho_ee < -tol || rho_ee > 1.0 + tol) return false;
    double c2 = coh_re * coh_re + coh_im * coh_im;
    return c2 <= rho_ee * (1.0 - rho_ee) + tol;
  }
};

// Distribution of the instantaneous detuning used for ensemble averages.
// Either a Gaussian of given FWHM (Hz) or a tabulated density over detuning
// (rad/s), linearly interpolated and renormalized to unit integral on load.
struct InhomDistribution {
  enum class Kind { gaussian, tabulated };
  Kind kind = Kind::gaussian;
  double fwhm = 0.0;              // [Hz], gaussian only
  std::vector<double> grid;       // [rad/s], tabulated only, strictly ascending
  std::vector<double> density;    // same length as grid, >= 0

  static InhomDistribution make_gaussian(double fwhm_hz) {
    InhomDistribution d;
    d.kind = Kind::gaussian;
    d.fwhm = fwhm_hz;
    d.validate();
    return d;
  }

  static InhomDistribution make_tabulated(std::vector<double> grid_radps,
                                          std::vector<double> dens);

  void validate() const;

  // Standard deviation in rad/s (gaussian) or sqrt of the second central
  // moment of the tabulated density.
  double sigma_omega() const;

  // Interpolated density at detuning [rad/s]; zero outside the table.
  double pdf(double delta_radps) const;
};

// Controls for detuning-ensemble quadrature.  The grid is symmetric about
// the distribution center and spans `span` times the larger of the
// power-broadened homogeneous FWHM and the distribution FWHM.
struct QuadratureSpec {
  double span = 8.0; // half-width in units of the wider linewidth
  int nodes = 801;   // initial node count, odd

  void validate() const {
    if (!(span >= 5.0))
      throw validation_error("QuadratureSpec: span must be >= 5");
    if (nodes < 101 || nodes % 2 == 0)
      throw validation_error("QuadratureSpec: nodes must be odd and >= 101");
  }
};

// Renewal jump process for the wandering transition frequency: the detuning
// holds for an exponentially distributed dwell time with mean `t_sd`, then
// is redrawn independently from `dist`.  Note: for this process the bunching
// in g2 decays to half its plateau at ln(2)*t_sd, not at t_sd itself.
struct JumpProcessParams {
  double t_sd = 0.0; // mean dwell time between jumps [s]
  InhomDistribution dist;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(t_sd > 0.0) || !std::isfinite(t_sd))
      throw validation_error("JumpProcessParams: t_sd must be > 0");
    dist.validate();
  }
};

// Logarithmic delay binning: edges tau_min * 10^(k / bins_per_decade).
struct LogBinSpec {
  double tau_min = 0.0; // [s]
  double tau_max = 0.0; // [s]
  int bins_per_decade = 10;

  void validate() const {
    if (!(tau_min > 0.0) || !(tau_max > tau_min))
      throw validation_error("LogBinSpec: need 0 < tau_min < tau_max");
    if (bins_per_decade < 1)
      throw validation_error("LogBinSpec: bins_per_decade must be >= 1");
  }
};

} // namespace specdiff
