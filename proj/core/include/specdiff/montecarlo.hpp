#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "specdiff/types.hpp"

// Stochastic generator: a renewal jump process for the wandering transition
// frequency and an inhomogeneous Poisson photon stream driven by the
// resulting time-dependent emission rate, thinned into two detection
// channels.  This is a classical-rate model for delays well above the
// lifetime; sub-lifetime antibunching is deliberately out of scope here and
// lives in the fixed-detuning closed forms.

namespace specdiff {

inline constexpr double tick_seconds = 1e-12;
inline constexpr std::uint32_t tick_resolution_ps = 1;

enum class Channel : std::uint8_t { A = 0, B = 1 };

struct SpectralTrajectory {
  // Transition frequency is piecewise constant: freqs[k] holds on
  // [jump_times[k-1], jump_times[k]), with jump_times implicitly bracketed by
  // 0 and duration.  Values are absolute angular frequencies [rad/s] on the
  // same axis as laser_freq / center_freq.
  std::vector<double> jump_times;
  std::vector<double> freqs;
  double duration = 0.0;

  void validate() const;
};

struct PhotonStream {
  std::vector<std::uint64_t> timestamps; // strictly ascending, ps ticks
  Channel channel = Channel::A;
  std::uint64_t duration_ticks = 0;

  void validate() const;
};

// Exponential dwell times with mean params.t_sd; after each jump the
// transition frequency is redrawn i.i.d. from params.dist (gaussian samples
// are centered on emitter.center_freq).  Deterministic given params.seed:
// the draw order is freq, then alternating (dwell, freq).
SpectralTrajectory simulate_trajectory(const JumpProcessParams& params,
                                       const EmitterParams& emitter,
                                       double duration);

// Inhomogeneous Poisson sampling with rate rate_scale * rho_ee(delta(t)),
// exact per constant-rate segment via exponential gaps, split into two
// channels by an independent Bernoulli draw per photon.  Precondition
// rate_scale * max(rho_ee) * T1 <= 0.1 keeps the classical rate description
// valid (well below one photon per lifetime).  Deterministic given seed;
// segment k draws from substream k+1, so the stream is reproducible even if
// segments were generated in parallel.
std::pair<PhotonStream, PhotonStream> simulate_photon_stream(
    const SpectralTrajectory& traj, const DriveParams& drive,
    const EmitterParams& emitter, double rate_scale, std::uint64_t seed,
    double split);

// Constant-rate control stream (no spectral diffusion in the rate): the
// correlation of such a stream is flat at 1.
std::pair<PhotonStream, PhotonStream> constant_rate_stream(double rate,
                                                           double duration,
                                                           std::uint64_t seed,
                                                           double split);

// One-sample Kolmogorov-Smirnov p-value of `samples` against a normal
// distribution with the given mean and standard deviation.
double ks_gaussian_pvalue(std::vector<double> samples, double mean,
                          double sigma);

} // namespace specdiff
