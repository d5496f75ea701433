#pragma once

// Slow, independent reference implementations used to cross-check the fast
// engines. These share type definitions with the rest of the library but no
// algorithm code: statistics are evaluated by literal definition loops, the
// GLM is fitted by IRLS with a QR solve, and AUC is computed by exhaustive
// pair concordance. Shipped in the library (not test-only) so the CLI can
// re-run the agreement checks in the field.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "netinfer/network.hpp"
#include "netinfer/terms.hpp"

namespace netinfer::oracle {

// Result wrapper for verification runs: the value(s) produced, which method
// produced them, and a rough operation count for reporting.
struct OracleResult {
  Eigen::VectorXd values;
  std::string method;
  long cost = 0;
};

namespace detail {

inline long esp_partners(const DirectedNetwork& y, int i, int j, EspVariant v) {
  long k = 0;
  for (int h = 0; h < y.n(); ++h) {
    if (h == i || h == j) continue;
    bool hit = false;
    switch (v) {
      case EspVariant::OTP: hit = y.edge(i, h) && y.edge(h, j); break;
      case EspVariant::ISP: hit = y.edge(h, i) && y.edge(h, j); break;
      case EspVariant::OSP: hit = y.edge(i, h) && y.edge(j, h); break;
      case EspVariant::ITP: hit = y.edge(h, i) && y.edge(j, h); break;
    }
    if (hit) ++k;
  }
  return k;
}

inline double gw_weight(double decay, long k) {
  return 1.0 - std::pow(1.0 - std::exp(-decay), static_cast<double>(k));
}

inline double brute_one(const StatTerm& t, const DirectedNetwork& y, const CovariateSet& cov) {
  const int n = y.n();
  double s = 0.0;
  switch (t.kind) {
    case TermKind::Edges:
      for_each_dyad(n, [&](int i, int j) { s += y.edge(i, j) ? 1.0 : 0.0; });
      break;
    case TermKind::Mutual:
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (y.edge(i, j) && y.edge(j, i)) s += 1.0;
      break;
    case TermKind::NodeOutCov: {
      const auto& x = cov.nodal_values(t.covariate);
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j)) s += x[i];
      });
      break;
    }
    case TermKind::NodeInCov: {
      const auto& x = cov.nodal_values(t.covariate);
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j)) s += x[j];
      });
      break;
    }
    case TermKind::EdgeCov:
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j)) s += cov.dyadic_value(t.covariate, i, j);
      });
      break;
    case TermKind::AbsDiffCov: {
      const auto& x = cov.nodal_values(t.covariate);
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j)) s += std::fabs(x[i] - x[j]);
      });
      break;
    }
    case TermKind::GwIdegree:
      for (int v = 0; v < n; ++v)
        s += std::exp(t.decay) * gw_weight(t.decay, y.in_degree(v));
      break;
    case TermKind::GwOdegree:
      for (int v = 0; v < n; ++v)
        s += std::exp(t.decay) * gw_weight(t.decay, y.out_degree(v));
      break;
    case TermKind::GwEsp:
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j))
          s += std::exp(t.decay) * gw_weight(t.decay, esp_partners(y, i, j, t.variant));
      });
      break;
    case TermKind::IdegreeCount:
      for (int v = 0; v < n; ++v)
        if (y.in_degree(v) == t.degree) s += 1.0;
      break;
    case TermKind::OdegreeCount:
      for (int v = 0; v < n; ++v)
        if (y.out_degree(v) == t.degree) s += 1.0;
      break;
  }
  return s;
}

}  // namespace detail

// Statistic vector by naive definition loops. Guarded to small networks: the
// point is transparency, not speed.
inline Eigen::VectorXd brute_stats(const ModelSpec& spec, const DirectedNetwork& y,
                                   const CovariateSet& cov, int max_n = 12) {
  if (y.n() > max_n)
    throw validation_error("brute_stats is restricted to n <= " + std::to_string(max_n));
  Eigen::VectorXd s(static_cast<long>(spec.size()));
  for (std::size_t k = 0; k < spec.size(); ++k)
    s[static_cast<long>(k)] = detail::brute_one(spec.terms[k], y, cov);
  return s;
}

// Edgewise shared partner histogram by literal triple enumeration.
inline std::vector<long> brute_esp_distribution(const DirectedNetwork& y, EspVariant v) {
  std::vector<long> hist(std::max(1, y.n() - 1), 0);
  for_each_dyad(y.n(), [&](int i, int j) {
    if (y.edge(i, j)) ++hist[detail::esp_partners(y, i, j, v)];
  });
  return hist;
}

// Binomial-family GLM by iteratively reweighted least squares, each step
// solved as a weighted least-squares problem via QR. Converges to gradient
// max-norm below `tol`; throws if it cannot.
inline Eigen::VectorXd glm_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const std::string& link, int max_iter = 200,
                                double tol = 1e-10) {
  if (link != "logit" && link != "probit")
    throw validation_error("glm_irls: link must be 'logit' or 'probit'");
  const bool logit = link == "logit";
  const long N = X.rows(), p = X.cols();
  if (y.size() != N) throw validation_error("glm_irls: response length mismatch");
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd w(N), z(N);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    for (long r = 0; r < N; ++r) {
      const double e = std::clamp(eta[r], -30.0, 30.0);
      double m, dmu;
      if (logit) {
        m = 1.0 / (1.0 + std::exp(-e));
        dmu = m * (1.0 - m);
      } else {
        m = 0.5 * std::erfc(-e / std::sqrt(2.0));
        dmu = std::exp(-0.5 * e * e) / std::sqrt(2.0 * 3.14159265358979323846);
      }
      m = std::clamp(m, 1e-12, 1.0 - 1e-12);
      dmu = std::max(dmu, 1e-12);
      const double var = m * (1.0 - m);
      w[r] = dmu * dmu / var;
      z[r] = e + (y[r] - m) / dmu;
      grad += X.row(r).transpose() * ((y[r] - m) * dmu / var);
    }
    if (grad.cwiseAbs().maxCoeff() < tol) return beta;
    Eigen::VectorXd sw = w.array().sqrt();
    Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    Eigen::VectorXd zw = sw.array() * z.array();
    beta = Xw.colPivHouseholderQr().solve(zw);
    if (!beta.allFinite())
      throw std::runtime_error("glm_irls produced non-finite coefficients");
  }
  throw std::runtime_error("glm_irls failed to converge (possible separation)");
}

// Area under the ROC curve by exhaustive pair concordance; ties in the score
// count one half. Throws unless both classes are present.
inline double pair_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size())
    throw validation_error("pair_auc: length mismatch");
  long P = 0, N = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw validation_error("pair_auc: labels must be 0/1");
    l ? ++P : ++N;
  }
  if (P == 0 || N == 0)
    throw validation_error("pair_auc: needs at least one positive and one negative");
  long twice_concordant = 0;  // 2*concordant + ties, kept integral
  for (std::size_t a = 0; a < labels.size(); ++a) {
    if (!labels[a]) continue;
    for (std::size_t b = 0; b < labels.size(); ++b) {
      if (labels[b]) continue;
      if (scores[a] > scores[b])
        twice_concordant += 2;
      else if (scores[a] == scores[b])
        twice_concordant += 1;
    }
  }
  return static_cast<double>(twice_concordant) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
}

}  // namespace netinfer::oracle
