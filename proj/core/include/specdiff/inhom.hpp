#pragma once

#include <span>
#include <vector>

#include "specdiff/types.hpp"

// Detuning-ensemble observables: count rates and linewidths averaged over the
// transition-frequency distribution, the diffusion-averaged g2 (emission-rate
// squared weighting), and the classical short-time bunching plateau.
//
// Conventions: detuning delta = laser_freq - omega_ge.  A gaussian
// InhomDistribution is centered on emitter.center_freq; a tabulated one lists
// absolute omega_ge values on the same axis as laser_freq.

namespace specdiff {

// Mean of the omega_ge distribution on the absolute frequency axis.
double dist_center(const InhomDistribution& dist, const EmitterParams& emitter);

// <rho_ee> over the transition-frequency distribution at the given laser
// frequency.  Simpson quadrature with node doubling to 1e-6 relative; for a
// gaussian distribution the integral runs in standardized units
// u = (omega - center)/sigma so that narrow and wide distributions are
// handled by the same grid.
double averaged_count_rate(const DriveParams& drive,
                           const EmitterParams& emitter,
                           const InhomDistribution& dist, double laser_freq,
                           const QuadratureSpec& quad = {});

// FWHM [Hz] of averaged_count_rate as a function of laser frequency, located
// by bisection on each side of the distribution center.
double scan_fwhm(const DriveParams& drive, const EmitterParams& emitter,
                 const InhomDistribution& dist,
                 const QuadratureSpec& quad = {});

struct DiffusiveCurve {
  std::vector<double> g2;
  int nodes = 0;                // node count of the accepted grid
  bool narrow_dist_warning = false; // emitter.inhom_fwhm < 3x homogeneous FWHM
};

// Diffusion-averaged g2 over a flat detuning measure weighted by the squared
// emission rate:
//   g2bar(tau) = Int C(d)^2 g2(tau, d) dd / Int C(d)^2 dd.
// Valid when the frequency distribution is much broader than the homogeneous
// line, where the result no longer depends on the distribution's shape or
// width.  The grid spans quad.span x the power-broadened FWHM on each side;
// the truncated Lorentzian^2 mass beyond the grid is restored with an
// analytic tail (exact for the normalization, sine-integral based for the
// oscillatory part), which keeps the result stable to ~1e-6 against span and
// node changes and makes g2bar(0) = 0 exact.
DiffusiveCurve g2_diffusive_curve(std::span<const double> taus,
                                  const DriveParams& drive,
                                  const EmitterParams& emitter,
                                  const QuadratureSpec& quad = {},
                                  bool adaptive = true);

double g2_diffusive(double tau, const DriveParams& drive,
                    const EmitterParams& emitter,
                    const QuadratureSpec& quad = {},
                    bool* narrow_dist_warning = nullptr);

// Distribution-weighted generalization: the detuning measure is the actual
// frequency distribution times C^2.  Reduces to g2_diffusive for broad
// distributions and to g2_homogeneous for a near-delta distribution.
std::vector<double> g2_diffusive_general_curve(std::span<const double> taus,
                                               const DriveParams& drive,
                                               const EmitterParams& emitter,
                                               const InhomDistribution& dist,
                                               double laser_freq,
                                               const QuadratureSpec& quad = {});

double g2_diffusive_general(double tau, const DriveParams& drive,
                            const EmitterParams& emitter,
                            const InhomDistribution& dist, double laser_freq,
                            const QuadratureSpec& quad = {});

// Classical short-time bunching plateau <C^2>/<C>^2 over the distribution.
// >= 1 (Cauchy-Schwarz, guaranteed here by evaluating numerator and
// denominator on one shared grid); -> 1 for vanishing inhomogeneity or
// overwhelming power broadening.
double bunching_asymptote(const DriveParams& drive,
                          const EmitterParams& emitter,
                          const InhomDistribution& dist, double laser_freq,
                          const QuadratureSpec& quad = {});

} // namespace specdiff
