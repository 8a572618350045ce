#include "specdiff/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "specdiff/numeric.hpp"

namespace specdiff {

namespace {

// Prefix pair count F(E) = #{(i, j) : b[j] - a[i] < E} for integer tick
// threshold E, by one monotone sweep.  Signed arithmetic on the comparison
// avoids wraparound for b[j] < a[i].
std::uint64_t prefix_pairs(const std::vector<std::uint64_t>& a,
                           const std::vector<std::uint64_t>& b,
                           std::int64_t threshold) {
  std::uint64_t total = 0;
  std::size_t j = 0;
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto ai = static_cast<std::int64_t>(a[i]);
    while (j < nb && static_cast<std::int64_t>(b[j]) - ai < threshold) ++j;
    total += j;
  }
  return total;
}

std::int64_t edge_ticks(double edge_s) {
  // bin condition edge <= delta * 1 ps; first integer delay inside the bin
  return static_cast<std::int64_t>(std::ceil(edge_s * 1e12 - 1e-9));
}

} // namespace

std::vector<double> make_log_bins(const LogBinSpec& spec) {
  spec.validate();
  double decades = std::log10(spec.tau_max / spec.tau_min);
  int nbins = static_cast<int>(
      std::ceil(spec.bins_per_decade * decades - 1e-9));
  std::vector<double> edges(static_cast<std::size_t>(nbins) + 1);
  for (int k = 0; k <= nbins; ++k)
    edges[static_cast<std::size_t>(k)] =
        spec.tau_min *
        std::pow(10.0, static_cast<double>(k) / spec.bins_per_decade);
  return edges;
}

std::vector<double> make_linear_bins(double width, double tau_max) {
  if (!(width > 0.0) || !(tau_max > width))
    throw validation_error("make_linear_bins: need 0 < width < tau_max");
  int nbins = static_cast<int>(std::ceil(tau_max / width - 1e-9));
  std::vector<double> edges(static_cast<std::size_t>(nbins) + 1);
  for (int k = 0; k <= nbins; ++k)
    edges[static_cast<std::size_t>(k)] = width * k;
  return edges;
}

std::vector<std::uint64_t> correlate(const PhotonStream& a,
                                     const PhotonStream& b,
                                     const std::vector<double>& edges) {
  if (edges.size() < 2)
    throw validation_error("correlate: need at least two bin edges");
  for (std::size_t k = 1; k < edges.size(); ++k)
    if (!(edges[k] > edges[k - 1]))
      throw validation_error("correlate: edges must be strictly ascending");
  a.validate();
  b.validate();
  if (a.duration_ticks != b.duration_ticks)
    throw validation_error("correlate: streams must share a duration");

  std::vector<std::uint64_t> prefix(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k)
    prefix[k] = prefix_pairs(a.timestamps, b.timestamps, edge_ticks(edges[k]));
  std::vector<std::uint64_t> counts(edges.size() - 1);
  for (std::size_t k = 0; k + 1 < edges.size(); ++k)
    counts[k] = prefix[k + 1] - prefix[k];
  return counts;
}

std::vector<std::uint64_t> correlate_symmetrized(
    const PhotonStream& a, const PhotonStream& b,
    const std::vector<double>& edges) {
  auto ab = correlate(a, b, edges);
  auto ba = correlate(b, a, edges);
  for (std::size_t k = 0; k < ab.size(); ++k) ab[k] += ba[k];
  return ab;
}

void G2Curve::validate() const {
  if (bin_edges.size() != g2.size() + 1 || g2.size() != raw_counts.size() ||
      g2.size() != stat_err.size() || g2.empty())
    throw validation_error("G2Curve: inconsistent column lengths");
  if (!(norm_constant > 0.0))
    throw validation_error("G2Curve: norm_constant must be > 0");
  for (double v : g2)
    if (v < 0.0) throw validation_error("G2Curve: g2 must be >= 0");
}

double G2Curve::bin_center(std::size_t k) const {
  double lo = bin_edges[k], hi = bin_edges[k + 1];
  if (lo <= 0.0) return 0.5 * (lo + hi);
  return std::sqrt(lo * hi);
}

G2Curve normalize(const std::vector<std::uint64_t>& raw,
                  const std::vector<double>& edges, const PhotonStream& a,
                  const PhotonStream& b, const NormalizationOptions& opts) {
  if (raw.size() + 1 != edges.size())
    throw validation_error("normalize: counts/edges size mismatch");
  if (a.duration_ticks == 0 || a.duration_ticks != b.duration_ticks)
    throw validation_error("normalize: streams must share a nonzero duration");
  const double duration = static_cast<double>(a.duration_ticks) * tick_seconds;
  const auto n_a = static_cast<double>(a.timestamps.size());
  const auto n_b = static_cast<double>(b.timestamps.size());
  if (n_a == 0.0 || n_b == 0.0)
    throw validation_error("normalize: empty stream");

  G2Curve curve;
  curve.bin_edges = edges;
  curve.raw_counts = raw;
  curve.meta = {duration, n_a / duration, n_b / duration,
                a.timestamps.size(), b.timestamps.size(), opts.symmetrized};
  curve.g2.resize(raw.size());
  curve.stat_err.resize(raw.size());
  const double directions = opts.symmetrized ? 2.0 : 1.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    double denom = directions * n_a * n_b * (edges[k + 1] - edges[k]) / duration;
    curve.g2[k] = static_cast<double>(raw[k]) / denom;
    curve.stat_err[k] = std::sqrt(static_cast<double>(raw[k])) / denom;
  }

  if (opts.method == NormalizationMethod::asymptote) {
    if (!(opts.window_lo < opts.window_hi))
      throw validation_error("normalize: asymptote window must be ordered");
    std::vector<double> vals, sigs;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      if (edges[k] >= opts.window_lo && edges[k + 1] <= opts.window_hi) {
        if (raw[k] == 0) continue;
        vals.push_back(curve.g2[k]);
        sigs.push_back(curve.stat_err[k]);
      }
    }
    if (vals.size() < 3)
      throw numerical_error(
          "normalize: asymptote window holds fewer than 3 populated bins");
    auto wm = weighted_mean(vals, sigs);
    if (!(wm.mean > 0.0))
      throw numerical_error("normalize: asymptote level is zero");
    curve.norm_constant = wm.mean;
    for (std::size_t k = 0; k < raw.size(); ++k) {
      curve.g2[k] /= wm.mean;
      curve.stat_err[k] /= wm.mean;
    }
  }
  curve.validate();
  return curve;
}

double expected_flat_pairs(double rate_a, double rate_b, double duration,
                           double tau_lo, double tau_hi) {
  if (!(tau_hi > tau_lo) || tau_lo < 0.0)
    throw validation_error("expected_flat_pairs: need 0 <= tau_lo < tau_hi");
  double width = tau_hi - tau_lo;
  return rate_a * rate_b * (width * duration -
                            0.5 * (tau_hi * tau_hi - tau_lo * tau_lo));
}

double flat_pair_sigma(double expected, double rate_a, double rate_b,
                       double bin_width, bool symmetrized) {
  double corr = (symmetrized ? 2.0 : 1.0) * (rate_a + rate_b) * bin_width;
  return std::sqrt(expected * (1.0 + corr));
}

TsdEstimate extract_tsd(const G2Curve& curve,
                        std::optional<std::pair<double, double>> window) {
  curve.validate();
  const std::size_t nbins = curve.g2.size();

  auto plateau_in = [&](double lo, double hi) {
    std::vector<double> vals, sigs;
    double used_lo = 0.0, used_hi = 0.0;
    for (std::size_t k = 0; k < nbins; ++k) {
      if (curve.bin_edges[k] >= lo && curve.bin_edges[k + 1] <= hi &&
          curve.raw_counts[k] > 0) {
        vals.push_back(curve.g2[k]);
        sigs.push_back(std::max(curve.stat_err[k],
                                std::numeric_limits<double>::min()));
        if (vals.size() == 1) used_lo = curve.bin_edges[k];
        used_hi = curve.bin_edges[k + 1];
      }
    }
    if (vals.size() < 2)
      throw numerical_error("extract_tsd: plateau window holds fewer than 2 bins");
    auto wm = weighted_mean(vals, sigs);
    return std::tuple<double, double, double, double>{wm.mean, wm.sigma,
                                                      used_lo, used_hi};
  };

  auto crossing_after = [&](double g2st, double from) -> double {
    double level = 1.0 + (g2st - 1.0) / 2.0;
    for (std::size_t k = 0; k + 1 < nbins; ++k) {
      double t0 = curve.bin_center(k), t1 = curve.bin_center(k + 1);
      if (t0 < from) continue;
      double y0 = curve.g2[k], y1 = curve.g2[k + 1];
      if (y0 >= level && y1 < level) {
        double f = (y0 - level) / (y0 - y1);
        return std::exp(std::log(t0) + f * (std::log(t1) - std::log(t0)));
      }
    }
    return 0.0;
  };

  double lo, hi;
  if (window) {
    lo = window->first;
    hi = window->second;
  } else {
    lo = curve.bin_edges.front();
    hi = lo * 10.0; // first decade of bins as the rough plateau
  }

  auto [g2st, g2err, used_lo, used_hi] = plateau_in(lo, hi);
  if (!(g2st > 1.0 + 3.0 * g2err))
    throw numerical_error("no bunching detected");
  double tcross = crossing_after(g2st, used_hi);
  if (tcross <= 0.0) throw numerical_error("no bunching detected");

  if (!window) {
    // Rebalance: the plateau decays like exp(-tau/dwell) with
    // dwell = tcross/ln2, so the weighted-mean bias from including bins up to
    // u is about (g2st - 1) * (2/3) * (u/dwell) (weights grow linearly with
    // tau for log bins).  Choose u so this bias is about half the statistical
    // error sqrt(g2st / (r_a * r_b * u * T)), then re-estimate.
    double dwell = tcross / std::log(2.0);
    double ra = curve.meta.rate_a, rb = curve.meta.rate_b;
    double T = curve.meta.duration_s;
    if (ra > 0.0 && rb > 0.0 && T > 0.0 && g2st > 1.0) {
      double u32 = g2st * dwell /
                   ((g2st - 1.0) * (4.0 / 3.0) * std::sqrt(ra * rb * T * g2st));
      double u = std::pow(std::max(u32, 0.0), 2.0 / 3.0);
      u = std::min(u, dwell / 20.0);    // never deep into the decay
      u = std::max(u, lo * 2.5);        // keep at least a few bins
      try {
        auto [g2st2, g2err2, ul2, uh2] = plateau_in(lo, u);
        double t2 = crossing_after(g2st2, uh2);
        if (g2st2 > 1.0 + 3.0 * g2err2 && t2 > 0.0) {
          return {t2, g2st2, g2err2, ul2, uh2};
        }
      } catch (const numerical_error&) {
        // sparse second window: keep the first-pass estimate
      }
    }
  }
  return {tcross, g2st, g2err, used_lo, used_hi};
}

} // namespace specdiff
