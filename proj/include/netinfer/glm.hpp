#pragma once

// Newton (Fisher-scoring) binomial GLM for the logit and probit links.
// This is the workhorse behind pseudolikelihood fits and the classical
// probit baseline; it is deliberately independent of the IRLS+QR routine
// in oracle.hpp so the two can cross-check each other.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "netinfer/csv.hpp"
#include "netinfer/mathutil.hpp"

namespace netinfer {

class rank_deficiency_error : public std::runtime_error {
 public:
  explicit rank_deficiency_error(const std::string& what) : std::runtime_error(what) {}
};

class separation_error : public std::runtime_error {
 public:
  explicit separation_error(const std::string& what) : std::runtime_error(what) {}
};

enum class GlmLink { Logit, Probit };

inline std::string glm_link_name(GlmLink link) {
  return link == GlmLink::Logit ? "logit" : "probit";
}

struct GlmFit {
  Eigen::VectorXd coef;
  Eigen::MatrixXd vcov;        // inverse Fisher information at the MLE
  Eigen::VectorXd std_errors;  // sqrt of vcov diagonal
  Eigen::VectorXd z;           // Wald z = coef / std_error
  Eigen::VectorXd p;           // two-sided normal p-values
  double log_lik = 0.0;
  double aic = 0.0;  // 2p - 2 log_lik
  double bic = 0.0;  // p log(rows) - 2 log_lik
  int iterations = 0;
};

namespace glm_detail {

constexpr double kEtaCap = 30.0;    // |linear predictor| beyond this is saturated
constexpr double kMuFloor = 1e-12;  // keeps weights and logs finite
constexpr double kCoefCap = 1e3;    // runaway coefficients signal separation

inline double mean_response(GlmLink link, double eta) {
  if (link == GlmLink::Logit) return 1.0 / (1.0 + std::exp(-eta));
  return normal_cdf(eta);
}

// Per-observation score factor g and Fisher weight w so that the score is
// X^T diag(g)(y - mu) ... collapsed here to scalar contributions:
//   logit:  score_i = (y - mu) x_i,                w = mu (1 - mu)
//   probit: score_i = (y - mu) phi/(mu(1-mu)) x_i, w = phi^2 / (mu (1 - mu))
inline void score_weight(GlmLink link, double eta, double mu, double& g, double& w) {
  const double v = std::max(mu * (1.0 - mu), kMuFloor);
  if (link == GlmLink::Logit) {
    g = 1.0;
    w = v;
  } else {
    const double phi = normal_pdf(eta);
    g = phi / v;
    w = phi * phi / v;
  }
}

inline double bernoulli_log_lik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double ll = 0.0;
  for (long r = 0; r < y.size(); ++r) {
    const double m = std::min(1.0 - kMuFloor, std::max(kMuFloor, mu[r]));
    ll += y[r] > 0.5 ? std::log(m) : std::log(1.0 - m);
  }
  return ll;
}

}  // namespace glm_detail

// Rejects designs whose smallest singular value is numerically zero; the
// message carries the condition number for the caller's diagnostics.
inline void check_design_rank(const Eigen::MatrixXd& X) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
  if (smax <= 0.0 || smin <= smax * 1e-10) {
    const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    char buf[128];
    std::snprintf(buf, sizeof buf, "design matrix is rank deficient (condition number %.3e)",
                  cond);
    throw rank_deficiency_error(buf);
  }
}

inline GlmFit fit_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, GlmLink link,
                      int max_iter = 100, double tol = 1e-10) {
  using namespace glm_detail;
  const long nrow = X.rows(), p = X.cols();
  if (y.size() != nrow) throw validation_error("fit_glm: response length != design rows");
  if (nrow < p) throw validation_error("fit_glm: fewer rows than columns");
  for (long r = 0; r < nrow; ++r)
    if (y[r] != 0.0 && y[r] != 1.0) throw validation_error("fit_glm: response must be 0/1");
  check_design_rank(X);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta(nrow), mu(nrow);
  Eigen::MatrixXd info(p, p);
  Eigen::VectorXd score(p);

  Eigen::VectorXd step = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  for (int iter = 1; iter <= max_iter; ++iter) {
    eta = X * beta;
    score.setZero();
    info.setZero();
    for (long r = 0; r < nrow; ++r) {
      const double e = std::clamp(eta[r], -kEtaCap, kEtaCap);
      mu[r] = mean_response(link, e);
      double g, w;
      score_weight(link, e, mu[r], g, w);
      score.noalias() += X.row(r).transpose() * (g * (y[r] - mu[r]));
      info.noalias() += X.row(r).transpose() * (w * X.row(r));
    }
    // Two exits: the score criterion, or a Newton step (from the previous
    // iteration) so small that beta is converged to machine precision. The
    // second matters on large designs whose accumulated score never drops
    // below an absolute tolerance because of floating-point summation noise.
    const bool step_converged =
        step.lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + beta.lpNorm<Eigen::Infinity>());
    if (score.lpNorm<Eigen::Infinity>() < tol || step_converged) {
      // A score this small at a point that strictly classifies every
      // observation means the likelihood is unbounded along beta's ray
      // (no finite optimum exists); report that instead of a fake MLE.
      bool separated = true;
      for (long r = 0; r < nrow && separated; ++r)
        separated = y[r] > 0.5 ? eta[r] > 0.0 : eta[r] < 0.0;
      if (separated)
        throw separation_error(
            "the fitted score strictly classifies every observation, so no finite maximum "
            "likelihood estimate exists (separated data)");
      GlmFit fit;
      fit.coef = beta;
      Eigen::LLT<Eigen::MatrixXd> llt(info);
      if (llt.info() != Eigen::Success)
        throw rank_deficiency_error("Fisher information not positive definite at the optimum");
      fit.vcov = llt.solve(Eigen::MatrixXd::Identity(p, p));
      fit.std_errors = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
      fit.z.resize(p);
      fit.p.resize(p);
      for (long k = 0; k < p; ++k) {
        fit.z[k] = fit.std_errors[k] > 0.0 ? beta[k] / fit.std_errors[k] : 0.0;
        fit.p[k] = two_sided_p(fit.z[k]);
      }
      fit.log_lik = bernoulli_log_lik(y, mu);
      fit.aic = 2.0 * static_cast<double>(p) - 2.0 * fit.log_lik;
      fit.bic = static_cast<double>(p) * std::log(static_cast<double>(nrow)) - 2.0 * fit.log_lik;
      fit.iterations = iter;
      return fit;
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw rank_deficiency_error("Fisher information is singular during Newton iteration");
    step = ldlt.solve(score);

    // Step-halving keeps the log-likelihood monotone from a cold start.
    const double ll_here = bernoulli_log_lik(y, mu);
    Eigen::VectorXd trial;
    double scale = 1.0;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 30; ++half) {
      trial = beta + scale * step;
      Eigen::VectorXd eta_t = X * trial;
      Eigen::VectorXd mu_t(nrow);
      for (long r = 0; r < nrow; ++r)
        mu_t[r] = mean_response(link, std::clamp(eta_t[r], -kEtaCap, kEtaCap));
      ll_new = bernoulli_log_lik(y, mu_t);
      if (ll_new >= ll_here - 1e-12) break;
      scale *= 0.5;
    }
    beta = trial;
    step *= scale;  // the realized move, which the convergence check inspects
    if (!beta.allFinite() || beta.lpNorm<Eigen::Infinity>() > kCoefCap)
      throw separation_error(
          "coefficients diverged, which indicates separated data (a linear combination of "
          "predictors perfectly classifies the response)");
  }
  // Out of iterations: call it separation if a fitted probability saturated,
  // otherwise report plain non-convergence.
  if ((X * beta).lpNorm<Eigen::Infinity>() > 0.8 * kEtaCap)
    throw separation_error("no interior optimum after " + std::to_string(max_iter) +
                           " iterations; saturated fitted probabilities indicate separation");
  throw std::runtime_error("fit_glm failed to converge in " + std::to_string(max_iter) +
                           " iterations");
}

// coefficient table: term,estimate,std_error,z,p
inline std::string glm_coefficients_csv(const GlmFit& fit,
                                        const std::vector<std::string>& labels) {
  std::string out = "term,estimate,std_error,z,p\n";
  for (long k = 0; k < fit.coef.size(); ++k) {
    out += labels[static_cast<std::size_t>(k)] + "," + format_real(fit.coef[k]) + "," +
           format_real(fit.std_errors[k]) + "," + format_real(fit.z[k]) + "," +
           format_real(fit.p[k]) + "\n";
  }
  return out;
}

}  // namespace netinfer
