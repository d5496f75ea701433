#pragma once

// Additive and multiplicative effects probit model for directed binary
// networks, fitted by Gibbs sampling with latent-scale data augmentation:
//   Z_ij = theta^T x_ij + a_i + b_j + u_i^T v_j + eps_ij,   y_ij = 1{Z_ij > 0}
// with (eps_ij, eps_ji) bivariate normal (unit variance, correlation rho),
// (a_i, b_i) ~ N(0, Sigma1), rows (u_i, v_i) ~ N(0, Sigma3).

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "netinfer/glm.hpp"
#include "netinfer/mathutil.hpp"
#include "netinfer/network.hpp"
#include "netinfer/rng.hpp"

namespace netinfer {

struct AmeSpec {
  std::vector<std::string> sender_covariates;    // nodal, enters as x[i]
  std::vector<std::string> receiver_covariates;  // nodal, enters as x[j]
  std::vector<std::string> dyadic_covariates;
  int latent_dim = 0;
  bool include_additive = true;
  bool include_dyadic_correlation = true;
  bool intercept = true;

  long p() const {
    return (intercept ? 1 : 0) + static_cast<long>(sender_covariates.size()) +
           static_cast<long>(receiver_covariates.size()) +
           static_cast<long>(dyadic_covariates.size());
  }

  std::vector<std::string> design_labels() const {
    std::vector<std::string> out;
    if (intercept) out.push_back("(intercept)");
    for (const auto& c : sender_covariates) out.push_back("sender:" + c);
    for (const auto& c : receiver_covariates) out.push_back("receiver:" + c);
    for (const auto& c : dyadic_covariates) out.push_back("dyad:" + c);
    return out;
  }

  void validate(const CovariateSet& cov, int n) const {
    if (latent_dim < 0) throw validation_error("latent_dim must be >= 0");
    if (latent_dim > n - 1) throw validation_error("latent_dim must be <= n-1");
    if (p() < 1) throw validation_error("the model needs an intercept or a covariate");
    for (const auto& c : sender_covariates)
      if (!cov.has_nodal(c)) throw validation_error("missing sender covariate: " + c);
    for (const auto& c : receiver_covariates)
      if (!cov.has_nodal(c)) throw validation_error("missing receiver covariate: " + c);
    for (const auto& c : dyadic_covariates)
      if (!cov.has_dyadic(c)) throw validation_error("missing dyadic covariate: " + c);
  }
};

// Dyad-level design over the canonical dyad order of `labels`-sized networks.
inline Eigen::MatrixXd ame_design(const AmeSpec& spec, const CovariateSet& cov, int n) {
  const long p = spec.p();
  Eigen::MatrixXd X(dyad_count(n), p);
  for_each_dyad(n, [&](int i, int j) {
    const long r = dyad_rank(n, i, j);
    long c = 0;
    if (spec.intercept) X(r, c++) = 1.0;
    for (const auto& name : spec.sender_covariates)
      X(r, c++) = cov.nodal_values(name)[static_cast<std::size_t>(i)];
    for (const auto& name : spec.receiver_covariates)
      X(r, c++) = cov.nodal_values(name)[static_cast<std::size_t>(j)];
    for (const auto& name : spec.dyadic_covariates) X(r, c++) = cov.dyadic_value(name, i, j);
  });
  return X;
}

// Classical probit baseline: the spec's covariates with no node effects.
struct ProbitFit {
  std::vector<std::string> term_labels;
  GlmFit glm;
};

inline ProbitFit fit_probit(const AmeSpec& spec, const DirectedNetwork& y,
                            const CovariateSet& cov) {
  spec.validate(cov, y.n());
  const Eigen::MatrixXd X = ame_design(spec, cov, y.n());
  Eigen::VectorXd resp(dyad_count(y.n()));
  for_each_dyad(y.n(), [&](int i, int j) {
    resp[dyad_rank(y.n(), i, j)] = y.edge(i, j) ? 1.0 : 0.0;
  });
  ProbitFit fit;
  fit.term_labels = spec.design_labels();
  fit.glm = fit_glm(X, resp, GlmLink::Probit);
  return fit;
}

struct AmeState {
  Eigen::VectorXd theta;
  Eigen::VectorXd a, b;
  Eigen::MatrixXd U, V;       // n x d
  Eigen::Matrix2d Sigma1;     // covariance of (a_i, b_i)
  double rho = 0.0;
  Eigen::MatrixXd Z;          // latent scale, diagonal unused
};

struct AmeDraw {
  Eigen::VectorXd theta;
  double sigma2_a = 0.0, sigma2_b = 0.0, sigma_ab = 0.0, rho = 0.0;
  Eigen::VectorXd a, b;      // input node order
  Eigen::MatrixXd U, V;      // input node order
};

struct AmeMcmcConfig {
  int n_iter = 10000;
  int burn_in = 5000;
  int thin = 5;
  std::uint64_t seed = 1;
  // Optional orthogonal d x d matrix applied to the factor initialization;
  // U V^T is invariant to it, which the tests exploit.
  std::optional<Eigen::MatrixXd> init_factor_rotation;
  // Called with iteration 0 right after initialization and then after every
  // completed Gibbs iteration, with the state in canonical (label-sorted)
  // node order and the canonical network.
  std::function<void(int, const AmeState&, const DirectedNetwork&)> inspect;

  void validate() const {
    if (n_iter < 1) throw validation_error("mcmc: n_iter must be >= 1");
    if (burn_in < 0 || burn_in >= n_iter)
      throw validation_error("mcmc: burn_in must lie in [0, n_iter)");
    if (thin < 1) throw validation_error("mcmc: thin must be >= 1");
    if ((n_iter - burn_in) / thin < 2)
      throw validation_error("mcmc: fewer than two retained draws; increase n_iter");
  }
};

struct AmeScalarSummary {
  std::string name;
  double mean = 0.0, sd = 0.0, q025 = 0.0, q975 = 0.0, ess = 0.0;
};

struct AmePosterior {
  AmeSpec spec;
  std::vector<std::string> term_labels;
  std::vector<std::string> node_labels;  // input order
  std::vector<AmeDraw> draws;
  Eigen::VectorXd mean_a, mean_b;
  Eigen::MatrixXd mean_uv;
  int n_iter = 0, burn_in = 0, thin = 0;
  std::uint64_t seed = 0;
  double rho_acceptance = 0.0;

  int n() const { return static_cast<int>(node_labels.size()); }

  // Scalar chains in draw order: theta terms, then the variance components.
  std::vector<std::pair<std::string, std::vector<double>>> scalar_chains() const {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    const std::size_t m = draws.size();
    for (std::size_t k = 0; k < term_labels.size(); ++k) {
      std::vector<double> chain(m);
      for (std::size_t t = 0; t < m; ++t) chain[t] = draws[t].theta[static_cast<long>(k)];
      out.emplace_back(term_labels[k], std::move(chain));
    }
    auto add = [&](const std::string& name, auto getter) {
      std::vector<double> chain(m);
      for (std::size_t t = 0; t < m; ++t) chain[t] = getter(draws[t]);
      out.emplace_back(name, std::move(chain));
    };
    if (spec.include_additive) {
      add("sigma2_a", [](const AmeDraw& d) { return d.sigma2_a; });
      add("sigma2_b", [](const AmeDraw& d) { return d.sigma2_b; });
      add("sigma_ab", [](const AmeDraw& d) { return d.sigma_ab; });
    }
    if (spec.include_dyadic_correlation)
      add("rho", [](const AmeDraw& d) { return d.rho; });
    return out;
  }

  std::vector<AmeScalarSummary> summaries() const {
    std::vector<AmeScalarSummary> out;
    for (const auto& [name, chain] : scalar_chains()) {
      AmeScalarSummary s;
      s.name = name;
      s.mean = mean(chain);
      s.sd = sample_sd(chain);
      s.q025 = quantile(chain, 0.025);
      s.q975 = quantile(chain, 0.975);
      s.ess = effective_sample_size(chain);
      out.push_back(std::move(s));
    }
    return out;
  }
};

namespace ame_detail {

struct Canonical {
  std::vector<int> to_canonical;    // input index -> canonical index
  std::vector<int> to_input;       // canonical index -> input index
  DirectedNetwork y;
  CovariateSet cov;
};

// Internal node order is sorted by label, so consistently permuted inputs
// produce bit-identical Gibbs trajectories.
inline Canonical canonicalize(const DirectedNetwork& y, const CovariateSet& cov) {
  const int n = y.n();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int l, int r) {
    return y.node_labels()[static_cast<std::size_t>(l)] <
           y.node_labels()[static_cast<std::size_t>(r)];
  });
  std::vector<std::string> labels(static_cast<std::size_t>(n));
  std::vector<int> to_canonical(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    labels[static_cast<std::size_t>(c)] =
        y.node_labels()[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])];
    to_canonical[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])] = c;
  }
  Canonical result{to_canonical, order, DirectedNetwork(labels), CovariateSet{n}};
  for_each_dyad(n, [&](int i, int j) {
    if (y.edge(i, j))
      result.y.set_edge(to_canonical[static_cast<std::size_t>(i)],
                        to_canonical[static_cast<std::size_t>(j)], true);
  });
  for (const auto& [name, values] : cov.nodal) {
    std::vector<double> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      perm[static_cast<std::size_t>(to_canonical[static_cast<std::size_t>(i)])] =
          values[static_cast<std::size_t>(i)];
    result.cov.nodal[name] = std::move(perm);
  }
  for (const auto& [name, values] : cov.dyadic) {
    std::vector<double> perm(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        perm[static_cast<std::size_t>(to_canonical[static_cast<std::size_t>(i)]) * n +
             to_canonical[static_cast<std::size_t>(j)]] =
            values[static_cast<std::size_t>(i) * n + j];
    result.cov.dyadic[name] = std::move(perm);
  }
  return result;
}

inline Eigen::Matrix2d sigma2_inverse(double rho) {
  const double s = 1.0 / (1.0 - rho * rho);
  Eigen::Matrix2d inv;
  inv << s, -rho * s, -rho * s, s;
  return inv;
}

// Draw from N(prec^{-1} lin, prec^{-1}) via the Cholesky factor of prec.
inline Eigen::VectorXd draw_gaussian_by_precision(const Eigen::MatrixXd& prec,
                                                  const Eigen::VectorXd& lin, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("Gibbs step: precision matrix not positive definite");
  const Eigen::VectorXd mean = llt.solve(lin);
  Eigen::VectorXd z(lin.size());
  for (long k = 0; k < z.size(); ++k) z[k] = rng.rnorm();
  // solve L^T x = z gives x with covariance prec^{-1}
  return mean + llt.matrixU().solve(z);
}

}  // namespace ame_detail

inline AmePosterior fit_ame(const AmeSpec& spec, const DirectedNetwork& y_input,
                            const CovariateSet& cov_input, const AmeMcmcConfig& config = {}) {
  spec.validate(cov_input, y_input.n());
  config.validate();
  const int n = y_input.n();
  if (n < 3) throw validation_error("fit_ame needs at least 3 nodes");
  const long p = spec.p();
  const int d = spec.latent_dim;

  auto canon = ame_detail::canonicalize(y_input, cov_input);
  const DirectedNetwork& y = canon.y;
  const Eigen::MatrixXd X = ame_design(spec, canon.cov, n);
  Eigen::VectorXd resp(dyad_count(n));
  for_each_dyad(n, [&](int i, int j) {
    resp[dyad_rank(n, i, j)] = y.edge(i, j) ? 1.0 : 0.0;
  });
  if (config.init_factor_rotation) {
    const Eigen::MatrixXd& r = *config.init_factor_rotation;
    if (r.rows() != d || r.cols() != d)
      throw validation_error("init_factor_rotation must be latent_dim x latent_dim");
    if (!(r.transpose() * r).isApprox(Eigen::MatrixXd::Identity(d, d), 1e-8))
      throw validation_error("init_factor_rotation must be orthogonal");
  }

  Rng rng(derive_seed(config.seed, 0));

  // ---- initialization ----
  AmeState st;
  st.theta = Eigen::VectorXd::Zero(p);
  try {
    st.theta = fit_glm(X, resp, GlmLink::Probit).coef;
  } catch (const separation_error&) {
    // Separated designs still admit a posterior; start from the prior mean.
  }
  st.a = Eigen::VectorXd::Zero(n);
  st.b = Eigen::VectorXd::Zero(n);
  st.U = Eigen::MatrixXd::Zero(n, d);
  st.V = Eigen::MatrixXd::Zero(n, d);
  st.Sigma1 = Eigen::Matrix2d::Identity();
  st.rho = 0.0;
  st.Z = Eigen::MatrixXd::Zero(n, n);

  {
    // Raw-response residuals drive the additive and factor starting values.
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
    for_each_dyad(n, [&](int i, int j) {
      R(i, j) = resp[dyad_rank(n, i, j)] - normal_cdf(X.row(dyad_rank(n, i, j)).dot(st.theta));
    });
    if (spec.include_additive) {
      st.a = R.rowwise().sum() / static_cast<double>(n - 1);
      st.b = R.colwise().sum().transpose() / static_cast<double>(n - 1);
    }
    if (d > 0) {
      Eigen::MatrixXd M = R;
      for_each_dyad(n, [&](int i, int j) { M(i, j) -= st.a[i] + st.b[j]; });
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
      for (int k = 0; k < d; ++k) {
        const double scale = std::sqrt(std::max(svd.singularValues()[k], 1e-12));
        st.U.col(k) = svd.matrixU().col(k) * scale;
        st.V.col(k) = svd.matrixV().col(k) * scale;
      }
      if (config.init_factor_rotation) {
        st.U = st.U * *config.init_factor_rotation;
        st.V = st.V * *config.init_factor_rotation;
      }
    }
    for_each_dyad(n, [&](int i, int j) {
      const double mu = X.row(dyad_rank(n, i, j)).dot(st.theta) + st.a[i] + st.b[j] +
                        st.U.row(i).dot(st.V.row(j));
      st.Z(i, j) = y.edge(i, j) ? rng.rtnorm_lower(mu, 1.0, 0.0) : rng.rtnorm_upper(mu, 1.0, 0.0);
    });
  }

  // Constant pieces of the theta step.
  Eigen::MatrixXd g0 = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(p, p);
  for_each_dyad(n, [&](int i, int j) {
    const auto xi = X.row(dyad_rank(n, i, j));
    const auto xj = X.row(dyad_rank(n, j, i));
    g0.noalias() += xi.transpose() * xi;
    g1.noalias() += xi.transpose() * xj;
  });
  const double theta_prior_precision = 1.0 / 100.0;
  Eigen::Matrix2d sigma1_inv = st.Sigma1.inverse();
  Eigen::MatrixXd sigma3_inv = Eigen::MatrixXd::Identity(2 * d, 2 * d);

  AmePosterior post;
  post.spec = spec;
  post.term_labels = spec.design_labels();
  post.node_labels = y_input.node_labels();
  post.n_iter = config.n_iter;
  post.burn_in = config.burn_in;
  post.thin = config.thin;
  post.seed = config.seed;
  post.mean_a = Eigen::VectorXd::Zero(n);
  post.mean_b = Eigen::VectorXd::Zero(n);
  post.mean_uv = Eigen::MatrixXd::Zero(n, n);

  if (config.inspect) config.inspect(0, st, y);

  Eigen::MatrixXd mu(n, n);        // full conditional mean surface
  Eigen::VectorXd theta_lin(p);
  double rho_width = 0.15;
  long rho_attempts = 0, rho_accepts = 0, rho_window_attempts = 0, rho_window_accepts = 0;

  for (int iter = 1; iter <= config.n_iter; ++iter) {
    const double c11 = 1.0 / (1.0 - st.rho * st.rho);
    const double c12 = -st.rho * c11;

    // mean surface at the current parameters
    for_each_dyad(n, [&](int i, int j) {
      mu(i, j) = X.row(dyad_rank(n, i, j)).dot(st.theta) + st.a[i] + st.b[j] +
                 st.U.row(i).dot(st.V.row(j));
    });

    // (1) latent scale: alternating truncated conditional draws per pair
    const double csd = std::sqrt(1.0 - st.rho * st.rho);
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const double m_ij = mu(i, j) + st.rho * (st.Z(j, i) - mu(j, i));
          st.Z(i, j) = y.edge(i, j) ? rng.rtnorm_lower(m_ij, csd, 0.0)
                                    : rng.rtnorm_upper(m_ij, csd, 0.0);
          const double m_ji = mu(j, i) + st.rho * (st.Z(i, j) - mu(i, j));
          st.Z(j, i) = y.edge(j, i) ? rng.rtnorm_lower(m_ji, csd, 0.0)
                                    : rng.rtnorm_upper(m_ji, csd, 0.0);
        }
      }
    }

    // (2) regression coefficients by correlated-pair generalized least squares
    theta_lin.setZero();
    for_each_dyad(n, [&](int i, int j) {
      const double r_ij = st.Z(i, j) - st.a[i] - st.b[j] - st.U.row(i).dot(st.V.row(j));
      const double r_ji = st.Z(j, i) - st.a[j] - st.b[i] - st.U.row(j).dot(st.V.row(i));
      theta_lin.noalias() += X.row(dyad_rank(n, i, j)).transpose() * (c11 * r_ij + c12 * r_ji);
    });
    {
      Eigen::MatrixXd prec = c11 * g0 + c12 * g1;
      prec.diagonal().array() += theta_prior_precision;
      st.theta = ame_detail::draw_gaussian_by_precision(prec, theta_lin, rng);
    }

    // (3) additive effects, jointly per node
    if (spec.include_additive) {
      const Eigen::Matrix2d s2inv = ame_detail::sigma2_inverse(st.rho);
      for (int i = 0; i < n; ++i) {
        Eigen::Vector2d sum = Eigen::Vector2d::Zero();
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double t_ij = st.Z(i, j) - X.row(dyad_rank(n, i, j)).dot(st.theta) -
                              st.U.row(i).dot(st.V.row(j));
          const double t_ji = st.Z(j, i) - X.row(dyad_rank(n, j, i)).dot(st.theta) -
                              st.U.row(j).dot(st.V.row(i));
          sum[0] += t_ij - st.b[j];
          sum[1] += t_ji - st.a[j];
        }
        const Eigen::Matrix2d prec = static_cast<double>(n - 1) * s2inv + sigma1_inv;
        const Eigen::Vector2d lin = s2inv * sum;
        const Eigen::Vector2d w = ame_detail::draw_gaussian_by_precision(prec, lin, rng);
        st.a[i] = w[0];
        st.b[i] = w[1];
      }
      // (4) their covariance, conjugate inverse-Wishart
      Eigen::Matrix2d scale = Eigen::Matrix2d::Identity();
      for (int i = 0; i < n; ++i) {
        Eigen::Vector2d w(st.a[i], st.b[i]);
        scale += w * w.transpose();
      }
      st.Sigma1 = rng.rinvwishart(4.0 + n, scale);
      sigma1_inv = st.Sigma1.inverse();
    }

    // (5) multiplicative effects, jointly per node row, then their covariance
    if (d > 0) {
      const Eigen::Matrix2d s2inv = ame_detail::sigma2_inverse(st.rho);
      for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd prec = sigma3_inv;
        Eigen::VectorXd lin = Eigen::VectorXd::Zero(2 * d);
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double q_ij =
              st.Z(i, j) - X.row(dyad_rank(n, i, j)).dot(st.theta) - st.a[i] - st.b[j];
          const double q_ji =
              st.Z(j, i) - X.row(dyad_rank(n, j, i)).dot(st.theta) - st.a[j] - st.b[i];
          const Eigen::VectorXd vj = st.V.row(j).transpose();
          const Eigen::VectorXd uj = st.U.row(j).transpose();
          prec.topLeftCorner(d, d).noalias() += s2inv(0, 0) * (vj * vj.transpose());
          prec.topRightCorner(d, d).noalias() += s2inv(0, 1) * (vj * uj.transpose());
          prec.bottomLeftCorner(d, d).noalias() += s2inv(1, 0) * (uj * vj.transpose());
          prec.bottomRightCorner(d, d).noalias() += s2inv(1, 1) * (uj * uj.transpose());
          lin.head(d).noalias() += vj * (s2inv(0, 0) * q_ij + s2inv(0, 1) * q_ji);
          lin.tail(d).noalias() += uj * (s2inv(1, 0) * q_ij + s2inv(1, 1) * q_ji);
        }
        const Eigen::VectorXd w = ame_detail::draw_gaussian_by_precision(prec, lin, rng);
        st.U.row(i) = w.head(d).transpose();
        st.V.row(i) = w.tail(d).transpose();
      }
      Eigen::MatrixXd scale = Eigen::MatrixXd::Identity(2 * d, 2 * d);
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd w(2 * d);
        w << st.U.row(i).transpose(), st.V.row(i).transpose();
        scale.noalias() += w * w.transpose();
      }
      const Eigen::MatrixXd sigma3 = rng.rinvwishart(2.0 * d + 2.0 + n, scale);
      sigma3_inv = sigma3.inverse();
    }

    // (6) residual correlation by a reflecting random-walk Metropolis step
    if (spec.include_dyadic_correlation) {
      for_each_dyad(n, [&](int i, int j) {
        mu(i, j) = X.row(dyad_rank(n, i, j)).dot(st.theta) + st.a[i] + st.b[j] +
                   st.U.row(i).dot(st.V.row(j));
      });
      double s11 = 0.0, s12 = 0.0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const double e1 = st.Z(i, j) - mu(i, j);
          const double e2 = st.Z(j, i) - mu(j, i);
          s11 += e1 * e1 + e2 * e2;
          s12 += e1 * e2;
        }
      }
      const double pairs = static_cast<double>(dyad_count(n) / 2);
      auto log_density = [&](double r) {
        return -0.5 * pairs * std::log(1.0 - r * r) -
               (s11 - 2.0 * r * s12) / (2.0 * (1.0 - r * r));
      };
      double proposal = st.rho + rng.runif(-rho_width, rho_width);
      while (proposal > 0.995 || proposal < -0.995) {
        if (proposal > 0.995) proposal = 2.0 * 0.995 - proposal;
        if (proposal < -0.995) proposal = -2.0 * 0.995 - proposal;
      }
      ++rho_attempts;
      ++rho_window_attempts;
      const double log_accept = log_density(proposal) - log_density(st.rho);
      const double u = rng.runif();
      if (std::log(u) < log_accept) {
        st.rho = proposal;
        ++rho_accepts;
        ++rho_window_accepts;
      }
      // proposal-width tuning, burn-in only, aiming at 20-50% acceptance
      if (iter <= config.burn_in && rho_window_attempts == 100) {
        const double rate =
            static_cast<double>(rho_window_accepts) / static_cast<double>(rho_window_attempts);
        if (rate < 0.20) rho_width = std::max(1e-3, rho_width * 0.5);
        if (rate > 0.50) rho_width = std::min(0.9, rho_width * 2.0);
        rho_window_attempts = rho_window_accepts = 0;
      }
    }

    if (config.inspect) config.inspect(iter, st, y);

    // ---- retain ----
    if (iter > config.burn_in && (iter - config.burn_in) % config.thin == 0) {
      AmeDraw draw;
      draw.theta = st.theta;
      draw.sigma2_a = st.Sigma1(0, 0);
      draw.sigma2_b = st.Sigma1(1, 1);
      draw.sigma_ab = st.Sigma1(0, 1);
      draw.rho = st.rho;
      draw.a.resize(n);
      draw.b.resize(n);
      draw.U.resize(n, d);
      draw.V.resize(n, d);
      for (int i = 0; i < n; ++i) {
        const int c = canon.to_canonical[static_cast<std::size_t>(i)];
        draw.a[i] = st.a[c];
        draw.b[i] = st.b[c];
        draw.U.row(i) = st.U.row(c);
        draw.V.row(i) = st.V.row(c);
      }
      post.mean_a += draw.a;
      post.mean_b += draw.b;
      post.mean_uv.noalias() += draw.U * draw.V.transpose();
      post.draws.push_back(std::move(draw));
    }
  }

  const double m = static_cast<double>(post.draws.size());
  post.mean_a /= m;
  post.mean_b /= m;
  post.mean_uv /= m;
  post.rho_acceptance =
      rho_attempts > 0 ? static_cast<double>(rho_accepts) / static_cast<double>(rho_attempts)
                       : 0.0;
  return post;
}

// Posterior predictive tie probabilities: mean over draws of Phi(mu_ij).
inline Eigen::MatrixXd predict_ame(const AmePosterior& post, const CovariateSet& cov) {
  const int n = post.n();
  if (post.draws.empty()) throw validation_error("predict_ame: empty posterior");
  post.spec.validate(cov, n);
  const Eigen::MatrixXd X = ame_design(post.spec, cov, n);
  Eigen::MatrixXd prob = Eigen::MatrixXd::Zero(n, n);
  for (const auto& draw : post.draws) {
    for_each_dyad(n, [&](int i, int j) {
      const double mu = X.row(dyad_rank(n, i, j)).dot(draw.theta) + draw.a[i] + draw.b[j] +
                        draw.U.row(i).dot(draw.V.row(j));
      prob(i, j) += normal_cdf(mu);
    });
  }
  prob /= static_cast<double>(post.draws.size());
  return prob;
}

// One posterior-predictive network from a single retained draw: fresh pair
// errors with the draw's residual correlation.
inline DirectedNetwork simulate_ame(const AmeDraw& draw, const AmeSpec& spec,
                                    const CovariateSet& cov,
                                    const std::vector<std::string>& labels, Rng& rng) {
  const int n = static_cast<int>(labels.size());
  const Eigen::MatrixXd X = ame_design(spec, cov, n);
  DirectedNetwork y(labels);
  const double rho = draw.rho;
  const double tail = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double z1 = rng.rnorm();
      const double z2 = rho * z1 + tail * rng.rnorm();
      const double mu_ij = X.row(dyad_rank(n, i, j)).dot(draw.theta) + draw.a[i] + draw.b[j] +
                           draw.U.row(i).dot(draw.V.row(j));
      const double mu_ji = X.row(dyad_rank(n, j, i)).dot(draw.theta) + draw.a[j] + draw.b[i] +
                           draw.U.row(j).dot(draw.V.row(i));
      if (mu_ij + z1 > 0.0) y.set_edge(i, j, true);
      if (mu_ji + z2 > 0.0) y.set_edge(j, i, true);
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string ame_draws_csv(const AmePosterior& post) {
  std::string out = "iteration";
  for (const auto& t : post.term_labels) out += "," + t;
  out += ",sigma2_a,sigma2_b,sigma_ab,rho\n";
  for (std::size_t t = 0; t < post.draws.size(); ++t) {
    const auto& d = post.draws[t];
    out += std::to_string(post.burn_in + static_cast<int>(t + 1) * post.thin);
    for (long k = 0; k < d.theta.size(); ++k) out += "," + format_real(d.theta[k]);
    out += "," + format_real(d.sigma2_a) + "," + format_real(d.sigma2_b) + "," +
           format_real(d.sigma_ab) + "," + format_real(d.rho) + "\n";
  }
  return out;
}

inline std::string ame_summary_csv(const AmePosterior& post) {
  std::string out = "term,mean,sd,q2.5,q97.5\n";
  for (const auto& s : post.summaries())
    out += s.name + "," + format_real(s.mean) + "," + format_real(s.sd) + "," +
           format_real(s.q025) + "," + format_real(s.q975) + "\n";
  return out;
}

inline std::string ame_effects_csv(const AmePosterior& post) {
  std::string out = "node,a,b\n";
  for (int i = 0; i < post.n(); ++i)
    out += post.node_labels[static_cast<std::size_t>(i)] + "," + format_real(post.mean_a[i]) +
           "," + format_real(post.mean_b[i]) + "\n";
  return out;
}

inline std::string ame_multiplicative_csv(const AmePosterior& post) {
  std::string out = "node";
  for (const auto& l : post.node_labels) out += "," + l;
  out += "\n";
  for (int i = 0; i < post.n(); ++i) {
    out += post.node_labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < post.n(); ++j)
      out += "," + format_real(i == j ? 0.0 : post.mean_uv(i, j));
    out += "\n";
  }
  return out;
}

// Per-draw node effects, enough to rebuild posterior-predictive simulations.
inline std::string ame_effect_draws_csv(const AmePosterior& post) {
  const int d = post.spec.latent_dim;
  std::string out = "iteration,node,a,b";
  for (int k = 0; k < d; ++k) out += ",u" + std::to_string(k + 1);
  for (int k = 0; k < d; ++k) out += ",v" + std::to_string(k + 1);
  out += "\n";
  for (std::size_t t = 0; t < post.draws.size(); ++t) {
    const auto& draw = post.draws[t];
    const int iteration = post.burn_in + static_cast<int>(t + 1) * post.thin;
    for (int i = 0; i < post.n(); ++i) {
      out += std::to_string(iteration) + "," + post.node_labels[static_cast<std::size_t>(i)] +
             "," + format_real(draw.a[i]) + "," + format_real(draw.b[i]);
      for (int k = 0; k < d; ++k) out += "," + format_real(draw.U(i, k));
      for (int k = 0; k < d; ++k) out += "," + format_real(draw.V(i, k));
      out += "\n";
    }
  }
  return out;
}

}  // namespace netinfer
