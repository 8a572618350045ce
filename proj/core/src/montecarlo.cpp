#include "specdiff/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "specdiff/inhom.hpp"
#include "specdiff/philox.hpp"
#include "specdiff/tls.hpp"

namespace specdiff {

namespace {

// Inverse-CDF sampler for a piecewise-linear tabulated density.
class TabulatedSampler {
 public:
  explicit TabulatedSampler(const InhomDistribution& dist) : dist_(dist) {
    cdf_.resize(dist.grid.size());
    cdf_[0] = 0.0;
    for (std::size_t i = 1; i < dist.grid.size(); ++i)
      cdf_[i] = cdf_[i - 1] + 0.5 * (dist.density[i] + dist.density[i - 1]) *
                                  (dist.grid[i] - dist.grid[i - 1]);
    // force exact unit total so u in [0,1) always lands in a segment
    for (double& c : cdf_) c /= cdf_.back();
  }

  double sample(double u) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t hi = std::min<std::size_t>(
        static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    std::size_t lo = hi - 1;
    double dx = dist_.grid[hi] - dist_.grid[lo];
    double p0 = dist_.density[lo], p1 = dist_.density[hi];
    double y = (u - cdf_[lo]) * norm_mass(); // mass to place inside segment
    double dp = p1 - p0;
    double t;
    if (std::abs(dp) < 1e-14 * std::max(p0, p1)) {
      t = p0 > 0.0 ? y / (dx * p0) : 0.5;
    } else {
      double disc = p0 * p0 + 2.0 * dp * y / dx;
      t = (std::sqrt(std::max(disc, 0.0)) - p0) / dp;
    }
    t = std::clamp(t, 0.0, 1.0);
    return dist_.grid[lo] + t * dx;
  }

 private:
  double norm_mass() const { return 1.0; } // cdf_ is rescaled to 1
  const InhomDistribution& dist_;
  std::vector<double> cdf_;
};

double draw_freq(const InhomDistribution& dist, const EmitterParams& emitter,
                 const TabulatedSampler* tab, PhiloxStream& rng) {
  if (dist.kind == InhomDistribution::Kind::gaussian)
    return emitter.center_freq + dist.sigma_omega() * rng.next_gaussian();
  return tab->sample(rng.next_double());
}

void generate_segment(PhiloxStream& rng, double rate, double seg_start,
                      double seg_end, std::uint64_t duration_ticks,
                      double split, std::uint64_t& last_tick,
                      std::vector<std::uint64_t>& a,
                      std::vector<std::uint64_t>& b) {
  if (!(rate > 0.0)) return;
  double t = seg_start;
  while (true) {
    t += rng.next_exponential() / rate;
    if (t >= seg_end) break;
    auto tick = static_cast<std::uint64_t>(std::llround(t * 1e12));
    if (tick <= last_tick) tick = last_tick + 1;
    if (tick >= duration_ticks) break;
    last_tick = tick;
    (rng.next_double() < split ? a : b).push_back(tick);
  }
}

} // namespace

void SpectralTrajectory::validate() const {
  if (!(duration > 0.0))
    throw validation_error("SpectralTrajectory: duration must be > 0");
  if (freqs.size() != jump_times.size() + 1)
    throw validation_error(
        "SpectralTrajectory: freqs must have jump_times.size() + 1 entries");
  for (std::size_t i = 0; i < jump_times.size(); ++i) {
    if (!(jump_times[i] < duration))
      throw validation_error("SpectralTrajectory: jumps must precede duration");
    if (i > 0 && !(jump_times[i] > jump_times[i - 1]))
      throw validation_error(
          "SpectralTrajectory: jump times must be strictly ascending");
  }
}

void PhotonStream::validate() const {
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (timestamps[i] >= duration_ticks)
      throw validation_error("PhotonStream: timestamp beyond duration");
    if (i > 0 && timestamps[i] <= timestamps[i - 1])
      throw validation_error("PhotonStream: timestamps must be strictly ascending");
  }
}

SpectralTrajectory simulate_trajectory(const JumpProcessParams& params,
                                       const EmitterParams& emitter,
                                       double duration) {
  params.validate();
  emitter.validate();
  if (!(duration > 0.0))
    throw validation_error("simulate_trajectory: duration must be > 0");

  std::optional<TabulatedSampler> tab;
  if (params.dist.kind == InhomDistribution::Kind::tabulated)
    tab.emplace(params.dist);

  PhiloxStream rng(params.seed, 0);
  SpectralTrajectory traj;
  traj.duration = duration;
  traj.jump_times.reserve(
      static_cast<std::size_t>(duration / params.t_sd * 1.05) + 16);
  traj.freqs.reserve(traj.jump_times.capacity() + 1);

  traj.freqs.push_back(draw_freq(params.dist, emitter, tab ? &*tab : nullptr, rng));
  double t = 0.0;
  while (true) {
    t += params.t_sd * rng.next_exponential();
    if (t >= duration) break;
    traj.jump_times.push_back(t);
    traj.freqs.push_back(draw_freq(params.dist, emitter, tab ? &*tab : nullptr, rng));
  }
  return traj;
}

std::pair<PhotonStream, PhotonStream> simulate_photon_stream(
    const SpectralTrajectory& traj, const DriveParams& drive,
    const EmitterParams& emitter, double rate_scale, std::uint64_t seed,
    double split) {
  traj.validate();
  emitter.validate();
  drive.validate();
  if (!(split > 0.0) || !(split < 1.0))
    throw validation_error("simulate_photon_stream: split must be in (0, 1)");
  if (!(rate_scale > 0.0))
    throw validation_error("simulate_photon_stream: rate_scale must be > 0");
  double rho_max = steady_state_population(drive, emitter, 0.0);
  if (rate_scale * rho_max * emitter.t1 > 0.1)
    throw validation_error(
        "simulate_photon_stream: rate_scale * max(rho_ee) * T1 = " +
        std::to_string(rate_scale * rho_max * emitter.t1) +
        " exceeds 0.1; the classical rate model needs well under one photon "
        "per lifetime");

  const std::size_t nseg = traj.freqs.size();
  // expected photon count, for right-sized allocations
  double expected = 0.0;
  for (std::size_t k = 0; k < nseg; ++k) {
    double start = k == 0 ? 0.0 : traj.jump_times[k - 1];
    double end = k + 1 == nseg ? traj.duration : traj.jump_times[k];
    double delta = drive.laser_freq - traj.freqs[k];
    expected +=
        rate_scale * steady_state_population(drive, emitter, delta) * (end - start);
  }

  PhotonStream a, b;
  a.channel = Channel::A;
  b.channel = Channel::B;
  a.duration_ticks = b.duration_ticks =
      static_cast<std::uint64_t>(std::llround(traj.duration * 1e12));
  a.timestamps.reserve(
      static_cast<std::size_t>(expected * split + 6.0 * std::sqrt(expected) + 64));
  b.timestamps.reserve(static_cast<std::size_t>(expected * (1.0 - split) +
                                                6.0 * std::sqrt(expected) + 64));

  std::uint64_t last_tick = 0;
  for (std::size_t k = 0; k < nseg; ++k) {
    double start = k == 0 ? 0.0 : traj.jump_times[k - 1];
    double end = k + 1 == nseg ? traj.duration : traj.jump_times[k];
    double delta = drive.laser_freq - traj.freqs[k];
    double rate = rate_scale * steady_state_population(drive, emitter, delta);
    PhiloxStream rng(seed, k + 1);
    generate_segment(rng, rate, start, end, a.duration_ticks, split, last_tick,
                     a.timestamps, b.timestamps);
  }
  return {std::move(a), std::move(b)};
}

std::pair<PhotonStream, PhotonStream> constant_rate_stream(double rate,
                                                           double duration,
                                                           std::uint64_t seed,
                                                           double split) {
  if (!(rate > 0.0) || !(duration > 0.0))
    throw validation_error("constant_rate_stream: rate and duration must be > 0");
  if (!(split > 0.0) || !(split < 1.0))
    throw validation_error("constant_rate_stream: split must be in (0, 1)");
  PhotonStream a, b;
  a.channel = Channel::A;
  b.channel = Channel::B;
  a.duration_ticks = b.duration_ticks =
      static_cast<std::uint64_t>(std::llround(duration * 1e12));
  double expected = rate * duration;
  a.timestamps.reserve(
      static_cast<std::size_t>(expected * split + 6.0 * std::sqrt(expected) + 64));
  b.timestamps.reserve(static_cast<std::size_t>(expected * (1.0 - split) +
                                                6.0 * std::sqrt(expected) + 64));
  PhiloxStream rng(seed, 1);
  std::uint64_t last_tick = 0;
  generate_segment(rng, rate, 0.0, duration, a.duration_ticks, split, last_tick,
                   a.timestamps, b.timestamps);
  return {std::move(a), std::move(b)};
}

double ks_gaussian_pvalue(std::vector<double> samples, double mean,
                          double sigma) {
  if (samples.size() < 8)
    throw validation_error("ks_gaussian_pvalue: need at least 8 samples");
  if (!(sigma > 0.0))
    throw validation_error("ks_gaussian_pvalue: sigma must be > 0");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double z = (samples[i] - mean) / sigma;
    double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    double lo = static_cast<double>(i) / n;
    double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, cdf - lo, hi - cdf});
  }
  double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = 2.0 * std::exp(-2.0 * j * j * lambda * lambda);
    p += (j % 2 == 1) ? term : -term;
    if (term < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

} // namespace specdiff
