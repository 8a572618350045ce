#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specdiff/montecarlo.hpp"
#include "specdiff/types.hpp"

// Normalized second-order correlation curves from timestamp streams, binned
// in logarithmically scaled delay bins spanning nanoseconds to seconds.

namespace specdiff {

// Geometric delay-bin edges: edges[k] = tau_min * 10^(k / bins_per_decade),
// the last edge being the first to reach or pass tau_max.
std::vector<double> make_log_bins(const LogBinSpec& spec);

// Uniform-width edges 0, width, 2*width, ... covering [0, tau_max]; for
// short-delay curves where oscillations must be resolved.
std::vector<double> make_linear_bins(double width, double tau_max);

// counts[k] = #{(ta in a, tb in b) : edges[k] <= tb - ta < edges[k+1]}.
// Implemented as one monotone two-pointer sweep per bin edge (prefix pair
// counts, then differenced), never as an all-pairs loop.
std::vector<std::uint64_t> correlate(const PhotonStream& a,
                                     const PhotonStream& b,
                                     const std::vector<double>& edges);

// Symmetrized positive-delay histogram: correlate(a, b) + correlate(b, a).
std::vector<std::uint64_t> correlate_symmetrized(
    const PhotonStream& a, const PhotonStream& b,
    const std::vector<double>& edges);

struct G2Meta {
  double duration_s = 0.0;
  double rate_a = 0.0; // events / s
  double rate_b = 0.0;
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  bool symmetrized = false;
};

struct G2Curve {
  std::vector<double> bin_edges; // seconds, size = g2.size() + 1
  std::vector<double> g2;
  std::vector<std::uint64_t> raw_counts;
  std::vector<double> stat_err; // sqrt(raw)/denominator, Poisson 1-sigma
  double norm_constant = 1.0;
  G2Meta meta;

  void validate() const;
  // geometric bin center, the natural abscissa for log-spaced bins
  double bin_center(std::size_t k) const;
};

enum class NormalizationMethod { poisson_rate, asymptote };

struct NormalizationOptions {
  NormalizationMethod method = NormalizationMethod::poisson_rate;
  // asymptote only: delay window whose weighted-mean level defines g2 = 1
  double window_lo = 1.0;
  double window_hi = 10.0;
  bool symmetrized = false; // counts came from correlate_symmetrized
};

// Divide raw counts by the uncorrelated-pair expectation
// N_a * N_b * bin_width / T (doubled for symmetrized counts); the asymptote
// method additionally rescales so the weighted mean inside the window is 1.
G2Curve normalize(const std::vector<std::uint64_t>& raw,
                  const std::vector<double>& edges, const PhotonStream& a,
                  const PhotonStream& b, const NormalizationOptions& opts);

// Exact expected pair count in [tau_lo, tau_hi) for independent Poisson
// streams of the given rates over duration T (one delay direction):
// r_a * r_b * Integral_{tau_lo}^{tau_hi} (T - tau) dtau.
double expected_flat_pairs(double rate_a, double rate_b, double duration,
                           double tau_lo, double tau_hi);

// Standard deviation of that pair count.  Pairs sharing a photon are
// positively correlated, which inflates the variance over Poisson:
// Var = E * (1 + (r_a + r_b) * bin_width), and twice that correction term
// when both delay directions are accumulated into one bin.
double flat_pair_sigma(double expected, double rate_a, double rate_b,
                       double bin_width, bool symmetrized);

struct TsdEstimate {
  double t_sd = 0.0;    // delay where the bunching has decayed to half
  double g2_st = 0.0;   // plateau level
  double g2_st_err = 0.0; // 1-sigma from bin statistics inside the window
  double window_lo = 0.0, window_hi = 0.0; // plateau window used
};

// Plateau level and half-decay delay of a bunched curve.  If no window is
// given, a two-pass rule picks one: start from the first decade of bins,
// locate the rough half-decay, then rebalance the window top so the decay
// bias inside the window stays below the statistical resolution.  Throws
// numerical_error("no bunching detected") for flat or non-decaying curves.
TsdEstimate extract_tsd(const G2Curve& curve,
                        std::optional<std::pair<double, double>> window =
                            std::nullopt);

} // namespace specdiff
