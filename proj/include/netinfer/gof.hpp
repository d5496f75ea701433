#pragma once

// Simulation-based goodness-of-fit for both model families, threshold-sweep
// ROC / precision-recall curves, and chain trace diagnostics, all emitted as
// data tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "netinfer/ame.hpp"
#include "netinfer/ergm.hpp"
#include "netinfer/mathutil.hpp"
#include "netinfer/network.hpp"
#include "netinfer/rng.hpp"
#include "netinfer/stats.hpp"
#include "netinfer/terms.hpp"

namespace netinfer {

// One goodness-of-fit row: a statistic's observed value against the
// simulated distribution, summarized by both quantile and min-max whiskers.
struct GofRow {
  std::string family;
  std::string bin;
  double observed = 0.0;
  double sim_min = 0.0, q01 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q99 = 0.0, sim_max = 0.0;
  bool outside_band = false;  // observed outside the simulated min-max range

  void summarize(double obs, std::vector<double> sims) {
    observed = obs;
    std::sort(sims.begin(), sims.end());
    sim_min = sims.front();
    sim_max = sims.back();
    q01 = quantile(sims, 0.01);
    q25 = quantile(sims, 0.25);
    q50 = quantile(sims, 0.50);
    q75 = quantile(sims, 0.75);
    q99 = quantile(sims, 0.99);
    outside_band = obs < sim_min || obs > sim_max;
  }
};

struct GofReport {
  std::vector<GofRow> rows;
  int n_simulations = 0;

  int flagged() const {
    int k = 0;
    for (const auto& r : rows) k += r.outside_band ? 1 : 0;
    return k;
  }
};

inline std::string gof_csv(const GofReport& report) {
  std::string out = "family,bin,observed,q01,q25,q50,q75,q99,min,max\n";
  for (const auto& r : report.rows)
    out += r.family + "," + r.bin + "," + format_real(r.observed) + "," + format_real(r.q01) +
           "," + format_real(r.q25) + "," + format_real(r.q50) + "," + format_real(r.q75) +
           "," + format_real(r.q99) + "," + format_real(r.sim_min) + "," +
           format_real(r.sim_max) + "\n";
  return out;
}

namespace gof_detail {

inline std::vector<double> degree_histogram(const DirectedNetwork& y, bool incoming) {
  std::vector<double> hist(static_cast<std::size_t>(y.n()), 0.0);
  for (int i = 0; i < y.n(); ++i)
    ++hist[static_cast<std::size_t>(incoming ? y.in_degree(i) : y.out_degree(i))];
  return hist;
}

inline std::vector<double> esp_histogram_real(const DirectedNetwork& y, EspVariant v) {
  const std::vector<long> hist = esp_distribution(y, v);
  return std::vector<double>(hist.begin(), hist.end());
}

// Tabulate one statistic family: per-bin simulated quantiles vs observed.
inline void add_family(GofReport& report, const std::string& family,
                       const std::vector<std::string>& bins,
                       const std::vector<double>& observed,
                       const std::vector<std::vector<double>>& simulated) {
  for (std::size_t b = 0; b < bins.size(); ++b) {
    GofRow row;
    row.family = family;
    row.bin = bins[b];
    std::vector<double> sims(simulated.size());
    for (std::size_t s = 0; s < simulated.size(); ++s) sims[s] = simulated[s][b];
    row.summarize(observed[b], std::move(sims));
    report.rows.push_back(std::move(row));
  }
}

inline std::vector<std::string> count_bins(int n) {
  std::vector<std::string> bins(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) bins[static_cast<std::size_t>(k)] = std::to_string(k);
  return bins;
}

}  // namespace gof_detail

// Goodness of fit for an edge-statistic model: simulate networks at theta and
// compare in-degree, out-degree, edgewise-shared-partner, and model-term
// distributions against the observed network.
inline GofReport gof_ergm(const ModelSpec& spec, const Eigen::VectorXd& theta,
                          const DirectedNetwork& y, const CovariateSet& cov, int n_sim,
                          std::uint64_t seed, int threads = 1) {
  if (n_sim < 100) throw validation_error("gof: n_sim must be at least 100");
  spec.validate(y, cov);
  if (theta.size() != static_cast<long>(spec.size()))
    throw validation_error("gof: theta length does not match the model");

  SamplerConfig config;
  config.seed = seed;
  config.n_samples = n_sim;
  config.keep_networks = true;
  const SampleBatch batch =
      sample_networks(spec, cov, theta, y, config, 1, threads).front();

  // shared-partner variants shown: those in the model, else outgoing two-path
  std::vector<EspVariant> variants = spec.esp_variants();
  if (variants.empty()) variants.push_back(EspVariant::OTP);

  const int n = y.n();
  GofReport report;
  report.n_simulations = n_sim;

  std::vector<std::vector<double>> sim_in(batch.networks.size()), sim_out(batch.networks.size());
  for (std::size_t s = 0; s < batch.networks.size(); ++s) {
    sim_in[s] = gof_detail::degree_histogram(batch.networks[s], true);
    sim_out[s] = gof_detail::degree_histogram(batch.networks[s], false);
  }
  gof_detail::add_family(report, "in_degree", gof_detail::count_bins(n),
                         gof_detail::degree_histogram(y, true), sim_in);
  gof_detail::add_family(report, "out_degree", gof_detail::count_bins(n),
                         gof_detail::degree_histogram(y, false), sim_out);

  for (EspVariant v : variants) {
    std::vector<std::vector<double>> sim_esp(batch.networks.size());
    for (std::size_t s = 0; s < batch.networks.size(); ++s)
      sim_esp[s] = gof_detail::esp_histogram_real(batch.networks[s], v);
    gof_detail::add_family(report, std::string("esp_") + esp_variant_name(v),
                           gof_detail::count_bins(n - 1), gof_detail::esp_histogram_real(y, v),
                           sim_esp);
  }

  const StatVector obs_stats = eval_stats(spec, y, cov);
  std::vector<std::string> term_bins;
  for (const auto& t : spec.terms) term_bins.push_back(t.label());
  std::vector<std::vector<double>> sim_terms(static_cast<std::size_t>(batch.stats.rows()));
  for (long s = 0; s < batch.stats.rows(); ++s) {
    sim_terms[static_cast<std::size_t>(s)].assign(batch.stats.row(s).begin(),
                                                  batch.stats.row(s).end());
  }
  std::vector<double> obs_terms(obs_stats.begin(), obs_stats.end());
  gof_detail::add_family(report, "model_terms", term_bins, obs_terms, sim_terms);
  return report;
}

inline GofReport gof_ergm(const ErgmFit& fit, const ModelSpec& spec, const DirectedNetwork& y,
                          const CovariateSet& cov, int n_sim, std::uint64_t seed,
                          int threads = 1) {
  return gof_ergm(spec, fit.theta, y, cov, n_sim, seed, threads);
}

// ---------------------------------------------------------------------------
// Four scalar network diagnostics used for the latent-effects model.

// sd of row means, sd of column means, correlation of reciprocal entries,
// and a third-moment measure of triadic closure on the centered adjacency.
struct NetworkDiagnostics {
  double sd_row_mean = 0.0;
  double sd_col_mean = 0.0;
  double dyad_dependence = 0.0;
  double triad_dependence = 0.0;

  std::vector<std::pair<std::string, double>> named() const {
    return {{"sd_row_mean", sd_row_mean},
            {"sd_col_mean", sd_col_mean},
            {"dyad_dependence", dyad_dependence},
            {"triad_dependence", triad_dependence}};
  }
};

inline NetworkDiagnostics network_diagnostics(const DirectedNetwork& y) {
  const int n = y.n();
  if (n < 3) throw validation_error("network diagnostics need at least 3 nodes");
  NetworkDiagnostics d;

  std::vector<double> row_means(static_cast<std::size_t>(n)), col_means(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    row_means[static_cast<std::size_t>(i)] =
        static_cast<double>(y.out_degree(i)) / static_cast<double>(n - 1);
    col_means[static_cast<std::size_t>(i)] =
        static_cast<double>(y.in_degree(i)) / static_cast<double>(n - 1);
  }
  d.sd_row_mean = sample_sd(row_means);
  d.sd_col_mean = sample_sd(col_means);

  // correlation of (y_ij, y_ji); both orientations enter so the value does
  // not depend on which node of a pair is listed first
  const double ybar = density(y);
  double num = 0.0, den = 0.0;
  for_each_dyad(n, [&](int i, int j) {
    const double e_ij = (y.edge(i, j) ? 1.0 : 0.0) - ybar;
    const double e_ji = (y.edge(j, i) ? 1.0 : 0.0) - ybar;
    num += e_ij * e_ji;
    den += e_ij * e_ij;
  });
  d.dyad_dependence = den > 0.0 ? num / den : 0.0;

  // sum of E_ij E_jk E_ik over distinct triples, scaled by count and sd^3
  double ss = 0.0;
  for_each_dyad(n, [&](int i, int j) {
    const double e = (y.edge(i, j) ? 1.0 : 0.0) - ybar;
    ss += e * e;
  });
  const double m = static_cast<double>(dyad_count(n));
  const double s = std::sqrt(ss / (m - 1.0));
  if (s <= 0.0) {
    d.triad_dependence = 0.0;
    return d;
  }
  double triple_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double e_ij = (y.edge(i, j) ? 1.0 : 0.0) - ybar;
      if (e_ij == 0.0) continue;
      for (int k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        const double e_jk = (y.edge(j, k) ? 1.0 : 0.0) - ybar;
        const double e_ik = (y.edge(i, k) ? 1.0 : 0.0) - ybar;
        triple_sum += e_ij * e_jk * e_ik;
      }
    }
  }
  const double triples = static_cast<double>(n) * (n - 1) * (n - 2);
  d.triad_dependence = triple_sum / (triples * s * s * s);
  return d;
}

// Posterior-predictive goodness of fit: draws resampled with replacement
// from the retained iterations, one simulated network per draw.
inline GofReport gof_ame(const AmePosterior& post, const DirectedNetwork& y,
                         const CovariateSet& cov, int n_sim, std::uint64_t seed) {
  if (n_sim < 100) throw validation_error("gof: n_sim must be at least 100");
  if (post.draws.empty()) throw validation_error("gof: empty posterior");
  post.spec.validate(cov, post.n());
  if (y.n() != post.n()) throw validation_error("gof: network size does not match posterior");

  const NetworkDiagnostics observed = network_diagnostics(y);
  Rng rng(derive_seed(seed, 0x60F));
  std::vector<std::vector<double>> sims(static_cast<std::size_t>(n_sim));
  for (int s = 0; s < n_sim; ++s) {
    const auto& draw =
        post.draws[static_cast<std::size_t>(rng.rint(0, static_cast<int>(post.draws.size()) - 1))];
    const DirectedNetwork ystar = simulate_ame(draw, post.spec, cov, post.node_labels, rng);
    const NetworkDiagnostics nd = network_diagnostics(ystar);
    for (const auto& [name, value] : nd.named()) sims[static_cast<std::size_t>(s)].push_back(value);
  }
  GofReport report;
  report.n_simulations = n_sim;
  std::vector<std::string> bins;
  std::vector<double> obs;
  for (const auto& [name, value] : observed.named()) {
    bins.push_back(name);
    obs.push_back(value);
  }
  gof_detail::add_family(report, "network_diagnostics", bins, obs, sims);
  return report;
}

// Same battery for the plain probit baseline: independent dyads, tie
// probability Phi(x^T theta-hat).
inline GofReport gof_probit(const ProbitFit& fit, const AmeSpec& spec, const DirectedNetwork& y,
                            const CovariateSet& cov, int n_sim, std::uint64_t seed) {
  if (n_sim < 100) throw validation_error("gof: n_sim must be at least 100");
  spec.validate(cov, y.n());
  const int n = y.n();
  const Eigen::MatrixXd X = ame_design(spec, cov, n);
  const NetworkDiagnostics observed = network_diagnostics(y);
  Rng rng(derive_seed(seed, 0x60F));
  std::vector<std::vector<double>> sims(static_cast<std::size_t>(n_sim));
  for (int s = 0; s < n_sim; ++s) {
    DirectedNetwork ystar(y.node_labels());
    for_each_dyad(n, [&](int i, int j) {
      const double p = normal_cdf(X.row(dyad_rank(n, i, j)).dot(fit.glm.coef));
      if (rng.runif() < p) ystar.set_edge(i, j, true);
    });
    const NetworkDiagnostics nd = network_diagnostics(ystar);
    for (const auto& [name, value] : nd.named()) sims[static_cast<std::size_t>(s)].push_back(value);
  }
  GofReport report;
  report.n_simulations = n_sim;
  std::vector<std::string> bins;
  std::vector<double> obs;
  for (const auto& [name, value] : observed.named()) {
    bins.push_back(name);
    obs.push_back(value);
  }
  gof_detail::add_family(report, "network_diagnostics", bins, obs, sims);
  return report;
}

// ---------------------------------------------------------------------------
// In-sample prediction curves.

struct CurvePoint {
  double x = 0.0, y = 0.0;
};

struct CurveReport {
  std::vector<CurvePoint> roc_points;  // (false positive rate, true positive rate)
  std::vector<CurvePoint> pr_points;   // (recall, precision)
  double auc_roc = 0.0;
  double auc_pr = 0.0;
};

// Threshold sweep over distinct score values, descending. The ROC area is
// accumulated in integers, so it equals the concordant-pair count exactly.
inline CurveReport curves(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size()) throw validation_error("curves: length mismatch");
  if (labels.empty()) throw validation_error("curves: empty input");
  long positives = 0, negatives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw validation_error("curves: labels must be 0/1");
    l ? ++positives : ++negatives;
  }
  if (positives == 0 || negatives == 0)
    throw validation_error("curves: need at least one positive and one negative label");
  for (double s : scores)
    if (!std::isfinite(s)) throw validation_error("curves: scores must be finite");

  std::vector<std::size_t> order(labels.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  CurveReport report;
  long tp = 0, fp = 0, tp_prev = 0, fp_prev = 0;
  long area2 = 0;  // twice the ROC area in count units
  report.roc_points.push_back({0.0, 0.0});
  double first_precision = -1.0;
  std::vector<CurvePoint> achieved;  // (recall, precision) at each threshold

  std::size_t k = 0;
  while (k < order.size()) {
    const double threshold = scores[order[k]];
    // absorb the whole tie group before emitting a point
    while (k < order.size() && scores[order[k]] == threshold) {
      labels[order[k]] ? ++tp : ++fp;
      ++k;
    }
    area2 += (fp - fp_prev) * (tp_prev + tp);
    report.roc_points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                                 static_cast<double>(tp) / static_cast<double>(positives)});
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (first_precision < 0.0) first_precision = precision;
    achieved.push_back({static_cast<double>(tp) / static_cast<double>(positives), precision});
    tp_prev = tp;
    fp_prev = fp;
  }
  report.auc_roc = static_cast<double>(area2) /
                   (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));

  // precision-recall: anchored at zero recall, linear between achieved points
  report.pr_points.push_back({0.0, first_precision});
  for (const auto& pt : achieved) report.pr_points.push_back(pt);
  double auc_pr = 0.0;
  for (std::size_t t = 1; t < report.pr_points.size(); ++t) {
    const auto& lo = report.pr_points[t - 1];
    const auto& hi = report.pr_points[t];
    auc_pr += (hi.x - lo.x) * 0.5 * (lo.y + hi.y);
  }
  report.auc_pr = auc_pr;
  return report;
}

// Edge scores for the dependence model: the conditional probability of each
// tie given the rest of the observed network, in canonical dyad order.
inline std::vector<double> ergm_conditional_scores(const ModelSpec& spec,
                                                   const Eigen::VectorXd& theta,
                                                   const DirectedNetwork& y,
                                                   const CovariateSet& cov) {
  spec.validate(y, cov);
  if (theta.size() != static_cast<long>(spec.size()))
    throw validation_error("conditional scores: theta length does not match the model");
  ChangeStatContext ctx(spec, y, cov);
  StatVector delta(theta.size());
  std::vector<double> scores(static_cast<std::size_t>(dyad_count(y.n())));
  for_each_dyad(y.n(), [&](int i, int j) {
    ctx.change_into(y, i, j, delta);
    scores[static_cast<std::size_t>(dyad_rank(y.n(), i, j))] = logistic(theta.dot(delta));
  });
  return scores;
}

inline std::vector<int> edge_labels(const DirectedNetwork& y) {
  std::vector<int> labels(static_cast<std::size_t>(dyad_count(y.n())));
  for_each_dyad(y.n(), [&](int i, int j) {
    labels[static_cast<std::size_t>(dyad_rank(y.n(), i, j))] = y.edge(i, j) ? 1 : 0;
  });
  return labels;
}

inline std::string roc_csv(const CurveReport& report) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : report.roc_points)
    out += format_real(p.x) + "," + format_real(p.y) + "\n";
  return out;
}

inline std::string pr_csv(const CurveReport& report) {
  std::string out = "recall,precision\n";
  for (const auto& p : report.pr_points)
    out += format_real(p.x) + "," + format_real(p.y) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Chain trace diagnostics.

struct TraceDiagnostic {
  std::string name;
  double ess = 0.0;
  double split_rhat = 0.0;
  bool trend_flag = false;
};

// Effective sample size, split-half shrink factor, and a linear-trend flag
// (|slope| above twice its standard error) for each named chain.
inline std::vector<TraceDiagnostic> trace_diagnostics(
    const std::vector<std::pair<std::string, std::vector<double>>>& chains) {
  std::vector<TraceDiagnostic> out;
  for (const auto& [name, chain] : chains) {
    if (chain.size() < 100)
      throw validation_error("trace diagnostics need at least 100 draws, got " +
                             std::to_string(chain.size()));
    TraceDiagnostic d;
    d.name = name;
    d.ess = effective_sample_size(chain);

    // split the chain into halves and compare between to within variation
    const std::size_t half = chain.size() / 2;
    const std::vector<double> first(chain.begin(), chain.begin() + static_cast<long>(half));
    const std::vector<double> second(chain.end() - static_cast<long>(half), chain.end());
    const double w = 0.5 * (sample_variance(first) + sample_variance(second));
    const double mdiff = mean(first) - mean(second);
    const double b = static_cast<double>(half) * 0.5 * mdiff * mdiff;  // 2-group between
    if (w > 0.0) {
      const double var_plus =
          (static_cast<double>(half) - 1.0) / static_cast<double>(half) * w +
          b / static_cast<double>(half);
      d.split_rhat = std::sqrt(var_plus / w);
    } else {
      d.split_rhat = 1.0;
    }

    // least squares trend against the iteration index
    const double n = static_cast<double>(chain.size());
    const double tbar = (n - 1.0) / 2.0;
    double sxx = 0.0, sxy = 0.0;
    const double ybar = mean(chain);
    for (std::size_t t = 0; t < chain.size(); ++t) {
      const double dx = static_cast<double>(t) - tbar;
      sxx += dx * dx;
      sxy += dx * (chain[t] - ybar);
    }
    const double slope = sxy / sxx;
    double rss = 0.0;
    for (std::size_t t = 0; t < chain.size(); ++t) {
      const double fitted = ybar + slope * (static_cast<double>(t) - tbar);
      rss += (chain[t] - fitted) * (chain[t] - fitted);
    }
    const double slope_se = std::sqrt(rss / (n - 2.0) / sxx);
    d.trend_flag = slope_se > 0.0 && std::fabs(slope) > 2.0 * slope_se;
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<TraceDiagnostic> trace_diagnostics(const AmePosterior& post) {
  return trace_diagnostics(post.scalar_chains());
}

}  // namespace netinfer
