#pragma once

// Exponential-family random graph engine: Metropolis toggle sampler, exact
// enumeration for tiny networks, maximum pseudolikelihood, Monte-Carlo MLE
// with a trust-region ratio step, likelihood evaluation by path sampling,
// and degeneracy screening.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "netinfer/glm.hpp"
#include "netinfer/mathutil.hpp"
#include "netinfer/network.hpp"
#include "netinfer/rng.hpp"
#include "netinfer/stats.hpp"
#include "netinfer/terms.hpp"

namespace netinfer {

class hull_violation_error : public std::runtime_error {
 public:
  hull_violation_error(const std::string& what, std::vector<std::string> terms, int iteration)
      : std::runtime_error(what), violating_terms(std::move(terms)), at_iteration(iteration) {}
  std::vector<std::string> violating_terms;
  int at_iteration = 0;
};

// ---------------------------------------------------------------------------
// Sampling

struct SamplerInit {
  enum class Kind { Observed, Empty, Random };
  Kind kind = Kind::Observed;
  double density = 0.5;  // Random only
};

struct SamplerConfig {
  long burn_in = -1;   // toggle attempts before retention; -1 -> 10 n^2
  long interval = -1;  // attempts between retained draws; -1 -> n^2
  int n_samples = 1024;
  std::uint64_t seed = 1;
  SamplerInit init{};
  bool keep_networks = false;

  long resolved_burn_in(int n) const {
    return burn_in >= 0 ? burn_in : 10L * static_cast<long>(n) * n;
  }
  long resolved_interval(int n) const {
    return interval >= 1 ? interval : std::max(1L, static_cast<long>(n) * n);
  }
  void validate() const {
    if (n_samples < 1) throw validation_error("sampler: n_samples must be >= 1");
    if (interval == 0 || interval < -1)
      throw validation_error("sampler: interval must be >= 1 (or -1 for the default)");
    if (burn_in < -1) throw validation_error("sampler: burn_in must be >= 0 (or -1)");
    if (init.kind == SamplerInit::Kind::Random &&
        (init.density < 0.0 || init.density > 1.0))
      throw validation_error("sampler: random-init density must lie in [0,1]");
  }
};

struct SampleBatch {
  Eigen::MatrixXd stats;  // n_samples x p, canonical term order
  std::vector<DirectedNetwork> networks;
  Eigen::VectorXd densities;
  double acceptance = 0.0;
  DirectedNetwork final_state;
};

namespace ergm_detail {

inline DirectedNetwork initial_state(const DirectedNetwork& observed, const SamplerInit& init,
                                     Rng& rng) {
  switch (init.kind) {
    case SamplerInit::Kind::Observed:
      return observed;
    case SamplerInit::Kind::Empty: {
      DirectedNetwork y(observed.node_labels());
      return y;
    }
    case SamplerInit::Kind::Random: {
      DirectedNetwork y(observed.node_labels());
      for_each_dyad(y.n(), [&](int i, int j) {
        if (rng.rbern(init.density)) y.set_edge(i, j, true);
      });
      return y;
    }
  }
  throw std::logic_error("unreachable sampler init kind");
}

// Single Metropolis toggle chain. Statistics are maintained incrementally and
// re-synchronized from scratch every ~1M attempts to kill accumulation drift.
inline SampleBatch run_chain(const ModelSpec& spec, const CovariateSet& cov,
                             const Eigen::VectorXd& theta, DirectedNetwork y, long burn_in,
                             long interval, int n_samples, Rng& rng, bool keep_networks) {
  const int n = y.n();
  const long p = static_cast<long>(spec.size());
  ChangeStatContext ctx(spec, y, cov);
  StatVector s = eval_stats(spec, y, cov);
  StatVector delta(p);
  SampleBatch batch;
  batch.stats.resize(n_samples, p);
  batch.densities.resize(n_samples);
  if (keep_networks) batch.networks.reserve(static_cast<std::size_t>(n_samples));

  long accepted = 0, attempts = 0;
  const double max_edges = static_cast<double>(dyad_count(n));
  auto toggle = [&] {
    ++attempts;
    const int i = static_cast<int>(rng.rint(0, n - 1));
    int j = static_cast<int>(rng.rint(0, n - 2));
    if (j >= i) ++j;
    ctx.change_into(y, i, j, delta);
    const double dir = y.edge(i, j) ? -1.0 : 1.0;
    const double logr = dir * theta.dot(delta);
    if (logr >= 0.0 || std::log(rng.runif()) < logr) {
      ctx.commit_toggle(y, i, j);
      s += dir * delta;
      ++accepted;
    }
    if ((attempts & 0xFFFFF) == 0) s = eval_stats(spec, y, cov);
  };

  for (long t = 0; t < burn_in; ++t) toggle();
  for (int m = 0; m < n_samples; ++m) {
    for (long t = 0; t < interval; ++t) toggle();
    batch.stats.row(m) = s.transpose();
    batch.densities[m] = static_cast<double>(y.edge_count()) / max_edges;
    if (keep_networks) batch.networks.push_back(y);
  }
  batch.acceptance = attempts > 0 ? static_cast<double>(accepted) / attempts : 0.0;
  batch.final_state = std::move(y);
  return batch;
}

}  // namespace ergm_detail

// Draws `config.n_samples` networks per chain from the model at `theta`.
// Chain c uses the RNG stream derive_seed(config.seed, c), so results are
// reproducible given (seed, n_chains) and independent of `threads`.
inline std::vector<SampleBatch> sample_networks(const ModelSpec& spec,
                                                const CovariateSet& cov,
                                                const Eigen::VectorXd& theta,
                                                const DirectedNetwork& observed,
                                                const SamplerConfig& config, int n_chains = 1,
                                                int threads = 1) {
  config.validate();
  spec.validate(cov, observed.n());
  if (theta.size() != static_cast<long>(spec.size()))
    throw validation_error("sample_networks: theta length != number of terms");
  if (!theta.allFinite()) throw validation_error("sample_networks: theta must be finite");
  if (n_chains < 1) throw validation_error("sample_networks: n_chains must be >= 1");

  const int n = observed.n();
  const long burn = config.resolved_burn_in(n);
  const long interval = config.resolved_interval(n);
  std::vector<SampleBatch> batches(static_cast<std::size_t>(n_chains));
  auto run_one = [&](int c) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(c)));
    DirectedNetwork start = ergm_detail::initial_state(observed, config.init, rng);
    batches[static_cast<std::size_t>(c)] =
        ergm_detail::run_chain(spec, cov, theta, std::move(start), burn, interval,
                               config.n_samples, rng, config.keep_networks);
  };
  if (threads <= 1 || n_chains == 1) {
    for (int c = 0; c < n_chains; ++c) run_one(c);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int workers = std::min(threads, n_chains);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int c = next.fetch_add(1); c < n_chains; c = next.fetch_add(1)) run_one(c);
      });
    for (auto& t : pool) t.join();
  }
  return batches;
}

inline Eigen::MatrixXd pooled_stats(const std::vector<SampleBatch>& batches) {
  long rows = 0;
  for (const auto& b : batches) rows += b.stats.rows();
  Eigen::MatrixXd all(rows, batches.front().stats.cols());
  long at = 0;
  for (const auto& b : batches) {
    all.middleRows(at, b.stats.rows()) = b.stats;
    at += b.stats.rows();
  }
  return all;
}

// ---------------------------------------------------------------------------
// Exact enumeration (tiny n)

struct ExactModel {
  double log_kappa = 0.0;
  Eigen::VectorXd expected_stats;
  Eigen::MatrixXd expected_outer;   // E[s s^T]
  std::vector<double> log_weights;  // theta^T s(y) indexed by encode_network mask
  int n_dyads = 0;
};

// Bitmask of a network over the canonical dyad order.
inline std::uint32_t encode_network(const DirectedNetwork& y) {
  if (dyad_count(y.n()) > 20) throw validation_error("encode_network: n(n-1) must be <= 20");
  std::uint32_t mask = 0;
  for_each_dyad(y.n(), [&](int i, int j) {
    if (y.edge(i, j)) mask |= 1u << dyad_rank(y.n(), i, j);
  });
  return mask;
}

// Sums over all 2^{n(n-1)} networks by a Gray-code walk, so consecutive masks
// differ by one toggle and statistics update incrementally.
inline ExactModel enumerate_exact(const ModelSpec& spec, const CovariateSet& cov,
                                  const Eigen::VectorXd& theta,
                                  const std::vector<std::string>& labels,
                                  bool want_probabilities = false) {
  const int n = static_cast<int>(labels.size());
  const long d = dyad_count(n);
  if (d > 20) throw validation_error("enumerate_exact: n(n-1) must be <= 20");
  spec.validate(cov, n);
  if (theta.size() != static_cast<long>(spec.size()))
    throw validation_error("enumerate_exact: theta length != number of terms");

  std::vector<DyadIndex> dyads;
  dyads.reserve(static_cast<std::size_t>(d));
  for_each_dyad(n, [&](int i, int j) { dyads.push_back({i, j}); });
  const std::uint64_t total = 1ull << d;
  const long p = static_cast<long>(spec.size());

  ExactModel model;
  model.n_dyads = static_cast<int>(d);
  model.log_weights.assign(static_cast<std::size_t>(total), 0.0);

  // Pass 1: log weights and the normalizer.
  {
    DirectedNetwork y(labels);
    ChangeStatContext ctx(spec, y, cov);
    StatVector s = eval_stats(spec, y, cov);
    std::uint32_t gray = 0;
    LogSumAcc acc;
    for (std::uint64_t m = 0;; ++m) {
      model.log_weights[gray] = theta.dot(s);
      acc.add(model.log_weights[gray]);
      if (m + 1 == total) break;
      const std::uint32_t next = static_cast<std::uint32_t>((m + 1) ^ ((m + 1) >> 1));
      const int bit = static_cast<int>(std::countr_zero(gray ^ next));
      const auto dy = dyads[static_cast<std::size_t>(bit)];
      const double dir = y.edge(dy.i, dy.j) ? -1.0 : 1.0;
      s += dir * ctx.change(y, dy.i, dy.j);
      ctx.commit_toggle(y, dy.i, dy.j);
      gray = next;
      if ((m & 0xFFFF) == 0xFFFF) s = eval_stats(spec, y, cov);  // drift guard
    }
    model.log_kappa = acc.value();
  }

  // Pass 2: expected statistics and second moments under the exact law.
  {
    DirectedNetwork y(labels);
    ChangeStatContext ctx(spec, y, cov);
    StatVector s = eval_stats(spec, y, cov);
    std::uint32_t gray = 0;
    Eigen::VectorXd es = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd ess = Eigen::MatrixXd::Zero(p, p);
    for (std::uint64_t m = 0;; ++m) {
      const double w = std::exp(model.log_weights[gray] - model.log_kappa);
      es.noalias() += w * s;
      ess.noalias() += w * (s * s.transpose());
      if (m + 1 == total) break;
      const std::uint32_t next = static_cast<std::uint32_t>((m + 1) ^ ((m + 1) >> 1));
      const int bit = static_cast<int>(std::countr_zero(gray ^ next));
      const auto dy = dyads[static_cast<std::size_t>(bit)];
      const double dir = y.edge(dy.i, dy.j) ? -1.0 : 1.0;
      s += dir * ctx.change(y, dy.i, dy.j);
      ctx.commit_toggle(y, dy.i, dy.j);
      gray = next;
      if ((m & 0xFFFF) == 0xFFFF) s = eval_stats(spec, y, cov);
    }
    model.expected_stats = es;
    model.expected_outer = ess;
  }

  if (!want_probabilities) {
    // The weights were needed for the walk; keep memory bounded afterwards.
    if (total > (1u << 12)) model.log_weights.clear();
  }
  return model;
}

inline double exact_probability(const ExactModel& model, std::uint32_t mask) {
  return std::exp(model.log_weights.at(mask) - model.log_kappa);
}

// Newton ascent of the exact log-likelihood theta^T s_obs - log kappa(theta).
inline Eigen::VectorXd fit_exact_mle(const ModelSpec& spec, const DirectedNetwork& y,
                                     const CovariateSet& cov, int max_iter = 100,
                                     double tol = 1e-10) {
  const Eigen::VectorXd s_obs = eval_stats(spec, y, cov);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<long>(spec.size()));
  for (int iter = 0; iter < max_iter; ++iter) {
    const ExactModel model = enumerate_exact(spec, cov, theta, y.node_labels());
    const Eigen::VectorXd grad = s_obs - model.expected_stats;
    if (grad.lpNorm<Eigen::Infinity>() < tol) return theta;
    Eigen::MatrixXd covm =
        model.expected_outer - model.expected_stats * model.expected_stats.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(covm);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("fit_exact_mle: statistic covariance is singular");
    theta += ldlt.solve(grad);
    if (!theta.allFinite() || theta.lpNorm<Eigen::Infinity>() > 50.0)
      throw std::runtime_error(
          "fit_exact_mle: estimate diverged; the observed statistic vector lies on the "
          "boundary of its attainable range, so no finite optimum exists");
  }
  throw std::runtime_error("fit_exact_mle did not converge");
}

// ---------------------------------------------------------------------------
// Maximum pseudolikelihood

struct MpleFit {
  Eigen::VectorXd theta;
  Eigen::MatrixXd vcov;
  GlmFit glm;
  Eigen::MatrixXd design;     // n(n-1) x p change statistics at the observed network
  Eigen::VectorXd response;   // observed dyad indicators, canonical order
};

// Change-statistic design at the observed network: row r is delta(y_obs, i, j)
// for the r-th canonical dyad.
inline void mple_design(const ModelSpec& spec, const DirectedNetwork& y,
                        const CovariateSet& cov, Eigen::MatrixXd& X, Eigen::VectorXd& resp) {
  const int n = y.n();
  const long p = static_cast<long>(spec.size());
  X.resize(dyad_count(n), p);
  resp.resize(dyad_count(n));
  ChangeStatContext ctx(spec, y, cov);
  StatVector delta(p);
  for_each_dyad(n, [&](int i, int j) {
    const long r = dyad_rank(n, i, j);
    ctx.change_into(y, i, j, delta);
    X.row(r) = delta.transpose();
    resp[r] = y.edge(i, j) ? 1.0 : 0.0;
  });
}

inline MpleFit fit_mple(const ModelSpec& spec, const DirectedNetwork& y,
                        const CovariateSet& cov) {
  spec.validate(cov, y.n());
  MpleFit fit;
  mple_design(spec, y, cov, fit.design, fit.response);
  fit.glm = fit_glm(fit.design, fit.response, GlmLink::Logit);
  fit.theta = fit.glm.coef;
  fit.vcov = fit.glm.vcov;
  return fit;
}

// ---------------------------------------------------------------------------
// Monte-Carlo MLE

struct DegenTermBand {
  std::string term;
  double observed = 0.0;
  double lo = 0.0;  // central 99% band of the simulated statistic
  double hi = 0.0;
  bool flagged = false;
};

struct DegeneracyReport {
  std::vector<DegenTermBand> terms;
  double mean_density = 0.0;
  bool absorbed_empty = false;
  bool absorbed_full = false;
  int n_sim = 0;
  bool any_flag() const {
    if (absorbed_empty || absorbed_full) return true;
    for (const auto& t : terms)
      if (t.flagged) return true;
    return false;
  }
};

struct ErgmFit {
  std::vector<std::string> term_labels;
  Eigen::VectorXd theta;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd mc_std_errors;
  Eigen::VectorXd z;
  Eigen::VectorXd p_values;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd mple_start;
  double log_lik = std::numeric_limits<double>::quiet_NaN();
  double log_lik_mc_se = 0.0;
  double aic = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  int mcmle_iterations = 0;
  bool converged = false;
  double inner_grad_norm = 0.0;
  double acceptance = 0.0;
  DegeneracyReport degeneracy;
  std::uint64_t seed = 0;
  int n_nodes = 0;

  bool has_log_lik() const { return std::isfinite(log_lik); }
};

struct McmleOptions {
  SamplerConfig sampler{};  // carried seed also seeds the likelihood ladder
  int max_outer = 20;
  double tol = 1e-3;       // outer-step infinity-norm convergence threshold
  double step_cap = 0.5;   // trust region: max infinity-norm move per outer step
  int n_chains = 1;
  int threads = 1;
  bool compute_loglik = true;
  int loglik_points = 20;   // path-sampling ladder size
  int loglik_draws = 1000;  // draws per ladder point
  std::optional<Eigen::VectorXd> theta_start;  // overrides the MPLE start
};

namespace ergm_detail {

// Componentwise range screen: a necessary condition for s_obs to lie in the
// convex hull of the simulated statistics.
inline void check_hull(const Eigen::MatrixXd& stats, const Eigen::VectorXd& s_obs,
                       const std::vector<std::string>& labels, int outer_iteration) {
  std::vector<std::string> violating;
  std::string detail;
  for (long k = 0; k < s_obs.size(); ++k) {
    const double lo = stats.col(k).minCoeff();
    const double hi = stats.col(k).maxCoeff();
    if (s_obs[k] < lo || s_obs[k] > hi) {
      violating.push_back(labels[static_cast<std::size_t>(k)]);
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s'%s' observed %.6g outside simulated range [%.6g, %.6g]",
                    detail.empty() ? "" : "; ", labels[static_cast<std::size_t>(k)].c_str(),
                    s_obs[k], lo, hi);
      detail += buf;
    }
  }
  if (!violating.empty())
    throw hull_violation_error(
        "observed statistics fall outside the simulated statistic cloud at outer iteration " +
            std::to_string(outer_iteration) + ": " + detail +
            ". The model may be near-degenerate or the starting point poor; increase the "
            "sample size, reduce the step cap, or supply a better starting vector.",
        violating, outer_iteration);
}

struct RatioStep {
  double grad_norm = std::numeric_limits<double>::infinity();
  Eigen::VectorXd step_mc_sd;  // simulation noise of each coordinate of t
  double weight_ess = 0.0;     // effective sample size of the final weights
};

// Maximizes t -> -log mean_m exp(t^T d_m), d_m = s_m - s_obs (the sampled
// likelihood-ratio objective, concave). Returns the achieved gradient norm
// and the Monte-Carlo standard deviation of the maximizer: the sandwich
// H^{-1} (sum w^2 Cov_w) H^{-1} with Cov_w ~ H collapses to H^{-1} sum w^2.
inline RatioStep maximize_ratio_objective(const Eigen::MatrixXd& diffs, Eigen::VectorXd& t,
                                          int max_iter = 60, double tol = 1e-9) {
  const long m = diffs.rows(), p = diffs.cols();
  Eigen::VectorXd logw(m), w(m);
  Eigen::VectorXd grad(p);
  Eigen::MatrixXd hess(p, p);
  auto objective = [&](const Eigen::VectorXd& tt) {
    double c = -std::numeric_limits<double>::infinity();
    logw = diffs * tt;
    c = logw.maxCoeff();
    return -(c + std::log((logw.array() - c).exp().mean()));
  };
  double f = objective(t);
  RatioStep result;
  for (int iter = 0; iter < max_iter; ++iter) {
    logw = diffs * t;
    const double c = logw.maxCoeff();
    w = (logw.array() - c).exp();
    w /= w.sum();
    grad = -(diffs.transpose() * w);
    result.grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (result.grad_norm < tol) break;
    const Eigen::VectorXd mu = diffs.transpose() * w;
    hess = diffs.transpose() * w.asDiagonal() * diffs - mu * mu.transpose();
    // Weight collapse: too few effective samples to shape the step further.
    const double ess = 1.0 / w.squaredNorm();
    if (ess < std::max(8.0, 0.005 * static_cast<double>(m))) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(grad);
    } else {
      Eigen::MatrixXd ridge = hess;
      ridge.diagonal().array() += 1e-8 * (1.0 + hess.diagonal().maxCoeff());
      step = ridge.ldlt().solve(grad);
    }
    double scale = 1.0;
    for (int half = 0; half < 40; ++half) {
      const double f_new = objective(t + scale * step);
      if (f_new >= f - 1e-12) {
        t += scale * step;
        f = f_new;
        break;
      }
      scale *= 0.5;
    }
  }
  // Noise of the maximizer at the returned point.
  result.step_mc_sd = Eigen::VectorXd::Zero(p);
  logw = diffs * t;
  const double c = logw.maxCoeff();
  w = (logw.array() - c).exp();
  w /= w.sum();
  result.weight_ess = 1.0 / w.squaredNorm();
  const Eigen::VectorXd mu = diffs.transpose() * w;
  hess = diffs.transpose() * w.asDiagonal() * diffs - mu * mu.transpose();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Eigen::MatrixXd hinv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    result.step_mc_sd = (hinv.diagonal() * w.squaredNorm()).cwiseMax(0.0).cwiseSqrt();
  }
  return result;
}

inline std::vector<double> column_as_vector(const Eigen::MatrixXd& m, long k) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (long r = 0; r < m.rows(); ++r) v[static_cast<std::size_t>(r)] = m(r, k);
  return v;
}

inline DegeneracyReport build_degeneracy(const Eigen::VectorXd& s_obs,
                                         const Eigen::MatrixXd& stats,
                                         const Eigen::VectorXd& densities,
                                         const std::vector<std::string>& labels) {
  DegeneracyReport report;
  report.n_sim = static_cast<int>(stats.rows());
  for (long k = 0; k < s_obs.size(); ++k) {
    DegenTermBand band;
    band.term = labels[static_cast<std::size_t>(k)];
    band.observed = s_obs[k];
    auto col = column_as_vector(stats, k);
    band.lo = quantile(col, 0.005);
    band.hi = quantile(col, 0.995);
    band.flagged = band.observed < band.lo || band.observed > band.hi;
    report.terms.push_back(std::move(band));
  }
  report.mean_density = densities.size() ? densities.mean() : 0.0;
  report.absorbed_empty = report.mean_density < 0.01;
  report.absorbed_full = report.mean_density > 0.99;
  return report;
}

// Closed-form log normalizer when only dyad-independent coordinates of theta
// are active: kappa factorizes over dyads into 1 + exp(theta^T x_ij).
inline double independence_log_kappa(const Eigen::MatrixXd& design,
                                     const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = design * theta;
  double lk = 0.0;
  for (long r = 0; r < eta.size(); ++r) {
    // log(1 + e^eta), stable on both tails
    lk += eta[r] > 0.0 ? eta[r] + std::log1p(std::exp(-eta[r])) : std::log1p(std::exp(eta[r]));
  }
  return lk;
}

}  // namespace ergm_detail

// Standalone degeneracy screen: simulate at theta and compare the observed
// statistics with the central 99% of the simulated ones; also flags chains
// stuck near the empty or complete graph.
inline DegeneracyReport degeneracy_check(const Eigen::VectorXd& theta, const ModelSpec& spec,
                                         const DirectedNetwork& y, const CovariateSet& cov,
                                         const SamplerConfig& config, int n_chains = 1,
                                         int threads = 1) {
  auto batches = sample_networks(spec, cov, theta, y, config, n_chains, threads);
  const Eigen::MatrixXd stats = pooled_stats(batches);
  Eigen::VectorXd dens(stats.rows());
  long at = 0;
  for (const auto& b : batches) {
    dens.segment(at, b.densities.size()) = b.densities;
    at += b.densities.size();
  }
  return ergm_detail::build_degeneracy(eval_stats(spec, y, cov), stats, dens, spec.labels());
}

inline ErgmFit fit_mcmle(const ModelSpec& spec, const DirectedNetwork& y,
                         const CovariateSet& cov, const McmleOptions& options = {}) {
  spec.validate(cov, y.n());
  options.sampler.validate();
  if (options.max_outer < 1) throw validation_error("fit_mcmle: max_outer must be >= 1");
  if (options.step_cap <= 0.0) throw validation_error("fit_mcmle: step_cap must be > 0");

  const int n = y.n();
  const long p = static_cast<long>(spec.size());
  const Eigen::VectorXd s_obs = eval_stats(spec, y, cov);

  ErgmFit fit;
  fit.term_labels = spec.labels();
  fit.seed = options.sampler.seed;
  fit.n_nodes = n;

  Eigen::VectorXd theta;
  if (options.theta_start) {
    theta = *options.theta_start;  // caller-supplied start; MPLE is skipped
  } else {
    theta = fit_mple(spec, y, cov).theta;
  }
  fit.mple_start = theta;
  if (theta.size() != p) throw validation_error("fit_mcmle: starting vector has wrong length");

  // Outer Geyer-Thompson loop: sample at theta, maximize the ratio objective,
  // move within the trust region, repeat until the move is below tolerance.
  SamplerConfig stage = options.sampler;
  int outer = 0;
  for (outer = 1; outer <= options.max_outer; ++outer) {
    stage.seed = derive_seed(options.sampler.seed, 0x100u + static_cast<std::uint64_t>(outer));
    auto batches =
        sample_networks(spec, cov, theta, y, stage, options.n_chains, options.threads);
    Eigen::MatrixXd stats = pooled_stats(batches);
    ergm_detail::check_hull(stats, s_obs, fit.term_labels, outer);

    Eigen::MatrixXd diffs = stats.rowwise() - s_obs.transpose();
    Eigen::VectorXd t = Eigen::VectorXd::Zero(p);
    const auto step = ergm_detail::maximize_ratio_objective(diffs, t);
    fit.inner_grad_norm = step.grad_norm;
    const double move = t.lpNorm<Eigen::Infinity>();
    // Converged when the move is below tolerance, or when every coordinate
    // of the move is statistically indistinguishable from the simulation
    // noise of the maximizer itself: more iterations at this sample size
    // cannot improve the estimate. The noise exit is only trustworthy when
    // the importance weights stayed healthy (collapsed weights make the
    // noise estimate itself meaningless) and the trust region did not bind.
    bool within_noise = step.step_mc_sd.size() == p && step.step_mc_sd.minCoeff() > 0.0 &&
                        step.weight_ess >= 0.25 * static_cast<double>(stats.rows()) &&
                        move <= options.step_cap;
    for (long k = 0; within_noise && k < p; ++k)
      within_noise = std::fabs(t[k]) <= 2.0 * step.step_mc_sd[k];
    if (move > options.step_cap) t *= options.step_cap / move;
    theta += t;
    if (move < options.tol || within_noise) {
      fit.converged = true;
      break;
    }
  }
  fit.mcmle_iterations = std::min(outer, options.max_outer);
  fit.theta = theta;

  // Final sample at theta-hat: Fisher information, Wald errors, degeneracy.
  stage.seed = derive_seed(options.sampler.seed, 0xF1A1u);
  auto final_batches =
      sample_networks(spec, cov, theta, y, stage, options.n_chains, options.threads);
  Eigen::MatrixXd stats = pooled_stats(final_batches);
  const long m_total = stats.rows();
  const Eigen::VectorXd mean_s = stats.colwise().mean();
  Eigen::MatrixXd centered = stats.rowwise() - mean_s.transpose();
  Eigen::MatrixXd info = centered.transpose() * centered / static_cast<double>(m_total - 1);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    Eigen::MatrixXd ridge = info;
    ridge.diagonal().array() += 1e-10 * (1.0 + info.diagonal().maxCoeff());
    ldlt.compute(ridge);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error(
          "fit_mcmle: simulated statistic covariance is singular; the model is likely "
          "degenerate at the estimate");
  }
  fit.vcov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.std_errors = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.z.resize(p);
  fit.p_values.resize(p);
  fit.mc_std_errors.resize(p);
  double mean_acc = 0.0;
  for (const auto& b : final_batches) mean_acc += b.acceptance;
  fit.acceptance = mean_acc / static_cast<double>(final_batches.size());
  for (long k = 0; k < p; ++k) {
    fit.z[k] = fit.std_errors[k] > 0.0 ? theta[k] / fit.std_errors[k] : 0.0;
    fit.p_values[k] = two_sided_p(fit.z[k]);
    // Monte-Carlo error of the estimate itself: Wald error shrunk by the
    // effective simulation size (autocorrelation time over chains averaged).
    double tau = 0.0;
    for (const auto& b : final_batches)
      tau += autocorr_time(ergm_detail::column_as_vector(b.stats, k));
    tau /= static_cast<double>(final_batches.size());
    fit.mc_std_errors[k] =
        fit.std_errors[k] * std::sqrt(tau / static_cast<double>(m_total));
  }

  Eigen::VectorXd dens(m_total);
  long at = 0;
  for (const auto& b : final_batches) {
    dens.segment(at, b.densities.size()) = b.densities;
    at += b.densities.size();
  }
  fit.degeneracy = ergm_detail::build_degeneracy(s_obs, stats, dens, fit.term_labels);

  if (options.compute_loglik) {
    if (dyad_count(n) <= 20) {
      const ExactModel exact = enumerate_exact(spec, cov, theta, y.node_labels());
      fit.log_lik = theta.dot(s_obs) - exact.log_kappa;
      fit.log_lik_mc_se = 0.0;
    } else {
      // Path sampling from the dyad-independent sub-model, whose normalizer
      // is closed-form: log kappa(theta_hat) - log kappa(theta_ref) equals
      // the integral of Delta^T E_{theta(t)}[s] over the segment, evaluated
      // with a midpoint ladder.
      Eigen::VectorXd theta_ref = theta;
      for (long k = 0; k < p; ++k)
        if (!spec.terms[static_cast<std::size_t>(k)].dyad_independent()) theta_ref[k] = 0.0;
      Eigen::MatrixXd dyad_design;
      Eigen::VectorXd dyad_resp;
      mple_design(spec, y, cov, dyad_design, dyad_resp);
      const double log_kappa_ref = ergm_detail::independence_log_kappa(dyad_design, theta_ref);
      const Eigen::VectorXd delta_theta = theta - theta_ref;
      double log_kappa = log_kappa_ref;
      double var_sum = 0.0;
      if (delta_theta.lpNorm<Eigen::Infinity>() > 0.0) {
        const int K = options.loglik_points;
        SamplerConfig ladder = options.sampler;
        ladder.n_samples = options.loglik_draws;
        ladder.interval = std::max(1L, static_cast<long>(n) * n / 4);
        ladder.keep_networks = false;
        DirectedNetwork state = y;
        double integral = 0.0;
        for (int kpt = 0; kpt < K; ++kpt) {
          const double tmid = (kpt + 0.5) / K;
          const Eigen::VectorXd theta_t = theta_ref + tmid * delta_theta;
          ladder.seed = derive_seed(options.sampler.seed, 0xA000u + static_cast<std::uint64_t>(kpt));
          ladder.burn_in = kpt == 0 ? 10L * n * n : 2L * n * n;
          Rng rng(ladder.seed);
          auto batch = ergm_detail::run_chain(spec, cov, theta_t, state,
                                              ladder.resolved_burn_in(n),
                                              ladder.resolved_interval(n), ladder.n_samples,
                                              rng, false);
          state = batch.final_state;  // warm start for the next rung
          const Eigen::VectorXd proj = batch.stats * delta_theta;
          std::vector<double> series(proj.data(), proj.data() + proj.size());
          integral += mean(series) / K;
          const double tau = autocorr_time(series);
          var_sum += sample_variance(series) * tau / static_cast<double>(proj.size());
        }
        log_kappa += integral;
        fit.log_lik_mc_se = std::sqrt(var_sum) / K;
      } else {
        fit.log_lik_mc_se = 0.0;
      }
      fit.log_lik = theta.dot(s_obs) - log_kappa;
    }
    fit.aic = 2.0 * static_cast<double>(p) - 2.0 * fit.log_lik;
    fit.bic = static_cast<double>(p) * std::log(static_cast<double>(dyad_count(n))) -
              2.0 * fit.log_lik;
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string ergm_coefficients_csv(const ErgmFit& fit) {
  std::string out = "term,estimate,std_error,z,p\n";
  for (long k = 0; k < fit.theta.size(); ++k)
    out += fit.term_labels[static_cast<std::size_t>(k)] + "," + format_real(fit.theta[k]) +
           "," + format_real(fit.std_errors[k]) + "," + format_real(fit.z[k]) + "," +
           format_real(fit.p_values[k]) + "\n";
  return out;
}

}  // namespace netinfer
