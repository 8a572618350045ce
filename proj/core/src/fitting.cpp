#include "specdiff/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "specdiff/inhom.hpp"
#include "specdiff/tls.hpp"

namespace specdiff {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Positive parameters are handled as logarithms internally, which keeps
// them positive without explicit bounds and makes finite-difference steps
// relative automatically.
enum class ParamKind { log_positive, linear };

struct ParamSpec {
  std::string name;
  ParamKind kind;
  double init;       // linear-space initial value
  double diff_scale; // q-space scale for steps and the step-size stop rule
};

using ModelFn = std::function<bool(const VectorXd&, VectorXd&)>;

VectorXd to_internal(const std::vector<ParamSpec>& specs) {
  VectorXd q(static_cast<Eigen::Index>(specs.size()));
  for (std::size_t j = 0; j < specs.size(); ++j)
    q[static_cast<Eigen::Index>(j)] = specs[j].kind == ParamKind::log_positive
                                          ? std::log(specs[j].init)
                                          : specs[j].init;
  return q;
}

VectorXd to_linear(const std::vector<ParamSpec>& specs, const VectorXd& q) {
  VectorXd p = q;
  for (std::size_t j = 0; j < specs.size(); ++j)
    if (specs[j].kind == ParamKind::log_positive)
      p[static_cast<Eigen::Index>(j)] = std::exp(q[static_cast<Eigen::Index>(j)]);
  return p;
}

struct LmRun {
  VectorXd q;
  double chi2 = kInf;
  bool converged = false;
  int iterations = 0;
  bool ok = false;
};

struct LmSolution {
  VectorXd p;     // linear space
  VectorXd sigma; // linear space, kInf for unresolved directions
  double residual_norm = 0.0;
  double chi2 = kInf;
  bool converged = false;
  int iterations = 0;
};

class LmEngine {
public:
  LmEngine(std::vector<ParamSpec> specs, ModelFn model, VectorXd y,
           VectorXd wsqrt, bool scale_covariance)
      : specs_(std::move(specs)), model_(std::move(model)), y_(std::move(y)),
        wsqrt_(std::move(wsqrt)), scale_covariance_(scale_covariance) {}

  LmSolution solve() {
    // Rabi-oscillation chi2 landscapes have aliased local minima; a handful
    // of deterministic restarts around the heuristic guess covers them.
    static constexpr double kFactors[] = {1.0, 0.7, 1.4, 0.85, 1.2};
    LmRun best;
    for (double f : kFactors) {
      VectorXd q0 = to_internal(specs_);
      for (std::size_t j = 0; j < specs_.size(); ++j) {
        auto i = static_cast<Eigen::Index>(j);
        if (specs_[j].kind == ParamKind::log_positive)
          q0[i] += std::log(f);
        else
          q0[i] += (f - 1.0) * specs_[j].diff_scale;
      }
      LmRun run = minimize(q0);
      if (run.ok && run.chi2 < best.chi2) best = run;
    }
    if (!best.ok)
      throw numerical_error("fit failed: model not evaluable at any start");
    return finalize(best);
  }

private:
  bool residuals(const VectorXd& q, VectorXd& r) const {
    VectorXd f(y_.size());
    if (!model_(to_linear(specs_, q), f)) return false;
    r = (f - y_).cwiseProduct(wsqrt_);
    return r.allFinite();
  }

  bool jacobian(const VectorXd& q, MatrixXd& jac) const {
    const auto np = static_cast<Eigen::Index>(specs_.size());
    jac.resize(y_.size(), np);
    for (Eigen::Index j = 0; j < np; ++j) {
      double h = 1e-6 * specs_[static_cast<std::size_t>(j)].diff_scale;
      VectorXd qp = q, qm = q, rp, rm;
      qp[j] += h;
      qm[j] -= h;
      if (!residuals(qp, rp) || !residuals(qm, rm)) return false;
      jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return jac.allFinite();
  }

  LmRun minimize(const VectorXd& q0) const {
    LmRun run;
    run.q = q0;
    VectorXd r;
    if (!residuals(run.q, r)) return run;
    run.ok = true;
    run.chi2 = r.squaredNorm();
    double lambda = 1e-3;
    const auto np = static_cast<Eigen::Index>(specs_.size());
    MatrixXd jac;
    for (run.iterations = 0; run.iterations < kMaxIterations;) {
      ++run.iterations;
      if (!jacobian(run.q, jac)) break;
      MatrixXd jtj = jac.transpose() * jac;
      VectorXd grad = jac.transpose() * r;
      bool accepted = false;
      for (int tries = 0; tries < 40 && lambda < 1e14; ++tries) {
        MatrixXd damped = jtj;
        for (Eigen::Index d = 0; d < np; ++d)
          damped(d, d) += lambda * std::max(jtj(d, d), 1e-300);
        VectorXd dq = damped.ldlt().solve(-grad);
        if (!dq.allFinite()) {
          lambda *= 3.0;
          continue;
        }
        VectorXd qn = run.q + dq, rn;
        if (!residuals(qn, rn)) {
          lambda *= 3.0;
          continue;
        }
        double chi2n = rn.squaredNorm();
        if (chi2n <= run.chi2) {
          double rel = 0.0;
          for (Eigen::Index j = 0; j < np; ++j)
            rel = std::max(rel, std::abs(dq[j]) /
                                    specs_[static_cast<std::size_t>(j)]
                                        .diff_scale);
          run.q = qn;
          r = rn;
          run.chi2 = chi2n;
          lambda *= 0.3;
          accepted = true;
          if (rel < kRelStepTol) run.converged = true;
          break;
        }
        lambda *= 3.0;
      }
      // no downhill step even under heavy damping: a (local) minimum
      if (!accepted) run.converged = true;
      if (run.converged) break;
    }
    return run;
  }

  LmSolution finalize(const LmRun& run) const {
    const auto np = static_cast<Eigen::Index>(specs_.size());
    const auto nd = y_.size();
    LmSolution sol;
    sol.p = to_linear(specs_, run.q);
    sol.converged = run.converged;
    sol.iterations = run.iterations;
    sol.chi2 = run.chi2;
    double dof = std::max<double>(1.0, static_cast<double>(nd - np));
    sol.residual_norm = std::sqrt(run.chi2 / dof);

    sol.sigma = VectorXd::Constant(np, kInf);
    MatrixXd jac;
    if (!jacobian(run.q, jac)) return sol;
    MatrixXd jtj = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(jtj);
    if (es.info() != Eigen::Success) return sol;
    const VectorXd& ev = es.eigenvalues();
    const MatrixXd& evec = es.eigenvectors();
    double emax = ev.maxCoeff();
    double scale2 = scale_covariance_ ? run.chi2 / dof : 1.0;
    for (Eigen::Index j = 0; j < np; ++j) {
      double var = 0.0;
      bool unbounded = emax <= 0.0;
      for (Eigen::Index k = 0; k < np && !unbounded; ++k) {
        if (ev[k] <= emax * 1e-12) {
          if (std::abs(evec(j, k)) > 1e-8) unbounded = true;
        } else {
          var += evec(j, k) * evec(j, k) / ev[k];
        }
      }
      double sq = unbounded ? kInf : std::sqrt(var * scale2);
      // map back to linear space: d(exp q) = exp(q) dq
      sol.sigma[j] = specs_[static_cast<std::size_t>(j)].kind ==
                             ParamKind::log_positive
                         ? sol.p[j] * sq
                         : sq;
    }
    return sol;
  }

  static constexpr int kMaxIterations = 500;
  static constexpr double kRelStepTol = 1e-8;

  std::vector<ParamSpec> specs_;
  ModelFn model_;
  VectorXd y_;
  VectorXd wsqrt_;
  bool scale_covariance_;
};

FitResult pack(const std::vector<ParamSpec>& specs, const LmSolution& sol,
               ModelId id) {
  FitResult out;
  out.model_id = id;
  out.residual_norm = sol.residual_norm;
  out.converged = sol.converged;
  out.iterations = sol.iterations;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    auto i = static_cast<Eigen::Index>(j);
    out.params[specs[j].name] = {sol.p[i], sol.sigma[i]};
  }
  return out;
}

} // namespace

FitResult fit_exp_decay(
    const std::vector<std::pair<double, double>>& histogram) {
  if (histogram.size() < 10)
    throw validation_error("fit_exp_decay: need at least 10 points");
  auto data = histogram;
  std::sort(data.begin(), data.end());
  double ymax = -kInf, ymin = kInf;
  std::size_t imax = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i].first) || !std::isfinite(data[i].second) ||
        data[i].second < 0.0)
      throw validation_error("fit_exp_decay: counts must be finite and >= 0");
    if (data[i].second > ymax) {
      ymax = data[i].second;
      imax = i;
    }
    ymin = std::min(ymin, data[i].second);
  }
  if (ymax <= 0.0)
    throw validation_error("fit_exp_decay: all counts are zero");

  double b0 = ymin;
  double a0 = std::max(ymax - ymin, 1e-3 * ymax);
  double span = data.back().first - data.front().first;
  double t10 = span > 0.0 ? span / 5.0 : 1.0;
  for (std::size_t i = imax; i < data.size(); ++i) {
    if (data[i].second - b0 <= a0 / std::exp(1.0)) {
      double dt = data[i].first - data[imax].first;
      if (dt > 0.0) t10 = dt;
      break;
    }
  }

  std::vector<double> t(data.size());
  VectorXd y(static_cast<Eigen::Index>(data.size()));
  VectorXd wsqrt(y.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    t[i] = data[i].first;
    y[static_cast<Eigen::Index>(i)] = data[i].second;
    // Poisson variance estimate per bin, floored at one count
    wsqrt[static_cast<Eigen::Index>(i)] =
        1.0 / std::sqrt(std::max(data[i].second, 1.0));
  }

  std::vector<ParamSpec> specs = {
      {"amplitude", ParamKind::log_positive, a0, 1.0},
      {"t1_s", ParamKind::log_positive, t10, 1.0},
      {"offset", ParamKind::linear, b0, std::max(a0, 1.0)},
  };
  ModelFn model = [&t](const VectorXd& p, VectorXd& out) {
    for (std::size_t i = 0; i < t.size(); ++i)
      out[static_cast<Eigen::Index>(i)] = p[0] * std::exp(-t[i] / p[1]) + p[2];
    return true;
  };
  LmEngine engine(specs, model, y, wsqrt, /*scale_covariance=*/false);
  return pack(specs, engine.solve(), ModelId::exp_decay);
}

FitResult fit_gaussian_line(
    const std::vector<std::pair<double, double>>& scan) {
  if (scan.size() < 7)
    throw validation_error("fit_gaussian_line: need at least 7 points");
  auto data = scan;
  std::sort(data.begin(), data.end());
  double ymax = -kInf, ymin = kInf;
  std::size_t imax = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i].first) || !std::isfinite(data[i].second))
      throw validation_error("fit_gaussian_line: non-finite input");
    if (data[i].second > ymax) {
      ymax = data[i].second;
      imax = i;
    }
    ymin = std::min(ymin, data[i].second);
  }

  double b0 = ymin;
  double a0 = std::max(ymax - ymin, 1e-12 * std::max(std::abs(ymax), 1.0));
  double c0 = data[imax].first;
  double span = data.back().first - data.front().first;
  double half = b0 + 0.5 * a0;
  double lo = data.front().first, hi = data.back().first;
  for (std::size_t i = imax; i < data.size(); ++i)
    if (data[i].second < half) {
      hi = data[i].first;
      break;
    }
  for (std::size_t i = imax; i-- > 0;)
    if (data[i].second < half) {
      lo = data[i].first;
      break;
    }
  double w0 = hi - lo > 0.0 ? hi - lo : (span > 0.0 ? span / 4.0 : 1.0);

  std::vector<double> x(data.size());
  VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    x[i] = data[i].first;
    y[static_cast<Eigen::Index>(i)] = data[i].second;
  }
  VectorXd wsqrt = VectorXd::Ones(y.size());

  std::vector<ParamSpec> specs = {
      {"amplitude", ParamKind::log_positive, a0, 1.0},
      {"center_hz", ParamKind::linear, c0, w0},
      {"fwhm_hz", ParamKind::log_positive, w0, 1.0},
      {"offset", ParamKind::linear, b0, std::max(a0, 1e-12)},
  };
  const double four_ln2 = 4.0 * std::log(2.0);
  ModelFn model = [&x, four_ln2](const VectorXd& p, VectorXd& out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double d = x[i] - p[1];
      out[static_cast<Eigen::Index>(i)] =
          p[0] * std::exp(-four_ln2 * d * d / (p[2] * p[2])) + p[3];
    }
    return true;
  };
  LmEngine engine(specs, model, y, wsqrt, /*scale_covariance=*/true);
  return pack(specs, engine.solve(), ModelId::gaussian_line);
}

FitResult fit_g2_short(const G2Curve& curve, G2FitModel model,
                       const G2FitOptions& options) {
  curve.validate();
  if (!(options.t1 > 0.0))
    throw validation_error("fit_g2_short: t1 must be > 0");
  options.quad.validate();
  const std::size_t n = curve.g2.size();
  if (n < 10) throw validation_error("fit_g2_short: need at least 10 bins");

  bool uniform_bins = true;
  double w0 = curve.bin_edges[1] - curve.bin_edges[0];
  for (std::size_t k = 0; k < n; ++k) {
    double w = curve.bin_edges[k + 1] - curve.bin_edges[k];
    if (w > 1e-9 * (1.0 + 1e-9))
      throw validation_error("fit_g2_short: needs sub-ns bins");
    if (std::abs(w - w0) > 1e-9 * w0) uniform_bins = false;
  }

  std::vector<double> taus(n);
  for (std::size_t k = 0; k < n; ++k) {
    double c = uniform_bins
                   ? 0.5 * (curve.bin_edges[k] + curve.bin_edges[k + 1])
                   : curve.bin_center(k);
    taus[k] = std::abs(c);
  }

  VectorXd y(static_cast<Eigen::Index>(n));
  VectorXd wsqrt(y.size());
  bool have_err = true;
  for (std::size_t k = 0; k < n; ++k) {
    y[static_cast<Eigen::Index>(k)] = curve.g2[k];
    if (!(curve.stat_err[k] > 0.0)) have_err = false;
  }
  for (std::size_t k = 0; k < n; ++k)
    wsqrt[static_cast<Eigen::Index>(k)] =
        have_err ? 1.0 / curve.stat_err[k] : 1.0;

  // first Rabi peak sits near Omega * tau = pi
  double omega0;
  if (options.init_omega) {
    omega0 = *options.init_omega;
  } else {
    std::size_t imax = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (curve.g2[k] > curve.g2[imax]) imax = k;
    omega0 = (curve.g2[imax] > 1.02 && taus[imax] > 0.0)
                 ? pi / taus[imax]
                 : 1.0 / options.t1;
  }
  double t20 = options.init_t2 ? *options.init_t2 : options.t1;
  if (!(omega0 > 0.0) || !(t20 > 0.0))
    throw validation_error("fit_g2_short: initial guesses must be > 0");

  std::vector<ParamSpec> specs = {
      {"omega_r_rad_s", ParamKind::log_positive, omega0, 1.0},
      {"t2_s", ParamKind::log_positive, std::min(t20, 2.0 * options.t1), 1.0},
  };
  if (options.free_t1)
    specs.push_back({"t1_s", ParamKind::log_positive, options.t1, 1.0});

  const double t1_fixed = options.t1;
  const bool free_t1 = options.free_t1;
  const QuadratureSpec quad = options.quad;
  ModelFn fn = [&taus, t1_fixed, free_t1, quad, model](const VectorXd& p,
                                                       VectorXd& out) {
    double t1 = free_t1 ? p[2] : t1_fixed;
    EmitterParams emitter;
    emitter.t1 = t1;
    emitter.t2 = std::min(p[1], 2.0 * t1); // coherence cannot outlive 2*T1
    emitter.center_freq = 0.0;
    emitter.inhom_fwhm = 0.0;
    DriveParams drive{p[0], 0.0};
    try {
      if (model == G2FitModel::zero_detuning) {
        for (std::size_t k = 0; k < taus.size(); ++k)
          out[static_cast<Eigen::Index>(k)] =
              g2_homogeneous(taus[k], 0.0, drive, emitter);
      } else {
        auto dc = g2_diffusive_curve(taus, drive, emitter, quad,
                                     /*adaptive=*/false);
        for (std::size_t k = 0; k < taus.size(); ++k)
          out[static_cast<Eigen::Index>(k)] = dc.g2[k];
      }
    } catch (const std::exception&) {
      return false;
    }
    return true;
  };

  LmEngine engine(specs, fn, y, wsqrt, /*scale_covariance=*/!have_err);
  LmSolution sol = engine.solve();
  // report the value the model actually used when t2 hit the physical cap
  double t1_out = free_t1 ? sol.p[2] : t1_fixed;
  sol.p[1] = std::min(sol.p[1], 2.0 * t1_out);
  FitResult out = pack(specs, sol,
                       model == G2FitModel::zero_detuning
                           ? ModelId::g2_zero_detuning
                           : ModelId::g2_diffusive);
  return out;
}

std::vector<BiasTableRow> bias_study(const std::vector<double>& omega_grid,
                                     double t2_over_t1) {
  if (omega_grid.empty())
    throw validation_error("bias_study: empty grid");
  for (double w : omega_grid)
    if (!(w > 0.0))
      throw validation_error("bias_study: grid values must be > 0");
  if (!(t2_over_t1 > 0.0) || !(t2_over_t1 <= 2.0))
    throw validation_error("bias_study: t2_over_t1 must be in (0, 2]");

  const double t1 = 1.83e-9;
  EmitterParams emitter{t1, t2_over_t1 * t1, 0.0, 0.0};

  constexpr int kPoints = 61; // 0.25 ns steps out to 15 ns
  std::vector<double> taus(kPoints);
  std::vector<double> edges(kPoints + 1);
  const double dt = 0.25e-9;
  for (int k = 0; k < kPoints; ++k) taus[static_cast<std::size_t>(k)] = k * dt;
  for (int k = 0; k <= kPoints; ++k)
    edges[static_cast<std::size_t>(k)] = (k - 0.5) * dt;

  std::vector<BiasTableRow> rows;
  rows.reserve(omega_grid.size());
  for (double omega_t1 : omega_grid) {
    BiasTableRow row;
    row.true_omega_r_t1 = omega_t1;
    row.true_t2_t1 = t2_over_t1;
    try {
      DriveParams drive{omega_t1 / t1, 0.0};
      auto dc = g2_diffusive_curve(taus, drive, emitter);
      G2Curve c;
      c.bin_edges = edges;
      c.g2 = dc.g2;
      c.raw_counts.assign(taus.size(), 1);
      c.stat_err.assign(taus.size(), 0.0);
      G2FitOptions opt;
      opt.t1 = t1;
      FitResult fr = fit_g2_short(c, G2FitModel::zero_detuning, opt);
      row.fitted_omega_r_t1 = fr.params.at("omega_r_rad_s").value * t1;
      row.fitted_t2_t1 = fr.params.at("t2_s").value / t1;
      row.fit_ok = fr.converged;
    } catch (const std::exception&) {
      row.fit_ok = false;
    }
    rows.push_back(row);
  }
  return rows;
}

PowerCalibration power_calibration(const std::vector<double>& powers_w,
                                   const std::vector<double>& omegas_rad_s,
                                   const EmitterParams& emitter) {
  if (powers_w.size() != omegas_rad_s.size() || powers_w.size() < 2)
    throw validation_error("power_calibration: need >= 2 matching points");
  emitter.validate();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < powers_w.size(); ++i) {
    if (!(powers_w[i] > 0.0) || !std::isfinite(omegas_rad_s[i]))
      throw validation_error("power_calibration: powers must be > 0");
    num += powers_w[i] * omegas_rad_s[i] * omegas_rad_s[i];
    den += powers_w[i] * powers_w[i];
  }
  double k = num / den;
  if (!(k > 0.0))
    throw numerical_error("power_calibration: nonpositive slope");
  return {k, 1.0 / (k * emitter.t1 * emitter.t2)};
}

} // namespace specdiff
