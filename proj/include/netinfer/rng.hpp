#pragma once

// Seeded random number streams. Every stochastic routine in the library takes
// an explicit seed; independent streams (chains, parallel draws) are derived
// from (seed, stream id) with a splitmix64 hash so results are reproducible
// given the pair regardless of scheduling.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace netinfer {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x51ED2700FFEE1234ull));
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double runif() { return unif_(engine_); }
  double runif(double a, double b) { return a + (b - a) * runif(); }
  double rnorm() { return norm_(engine_); }
  double rnorm(double mean, double sd) { return mean + sd * rnorm(); }
  double rchisq(double df) {
    std::gamma_distribution<double> g(0.5 * df, 2.0);
    return g(engine_);
  }
  long rint(long lo, long hi) {  // inclusive bounds
    std::uniform_int_distribution<long> d(lo, hi);
    return d(engine_);
  }
  bool rbern(double p) { return runif() < p; }

  // Standard normal conditioned on X >= a. Plain rejection when the bound is
  // not deep in the tail, otherwise the shifted-exponential rejection sampler
  // (Robert 1995), which stays efficient for any a.
  double rtnorm_lower_std(double a) {
    if (a < 0.4) {
      for (;;) {
        const double x = rnorm();
        if (x >= a) return x;
      }
    }
    const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double x = a - std::log(runif()) / lambda;
      const double d = x - lambda;
      if (std::log(runif()) <= -0.5 * d * d) return x;
    }
  }

  // N(mean, sd^2) truncated below at `lo` (sample >= lo).
  double rtnorm_lower(double mean, double sd, double lo) {
    return mean + sd * rtnorm_lower_std((lo - mean) / sd);
  }

  // N(mean, sd^2) truncated above at `hi` (sample <= hi).
  double rtnorm_upper(double mean, double sd, double hi) {
    return mean - sd * rtnorm_lower_std((mean - hi) / sd);
  }

  // Multivariate normal given the lower Cholesky factor of the covariance.
  Eigen::VectorXd rmvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower) {
    Eigen::VectorXd z(mean.size());
    for (long k = 0; k < z.size(); ++k) z[k] = rnorm();
    return mean + chol_lower * z;
  }

  // Wishart(df, scale) by Bartlett decomposition; df > dim - 1 required.
  Eigen::MatrixXd rwishart(double df, const Eigen::MatrixXd& scale) {
    const long d = scale.rows();
    if (df <= d - 1) throw std::invalid_argument("rwishart: df too small");
    Eigen::LLT<Eigen::MatrixXd> llt(scale);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("rwishart: scale matrix not positive definite");
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    for (long i = 0; i < d; ++i) {
      A(i, i) = std::sqrt(rchisq(df - static_cast<double>(i)));
      for (long j = 0; j < i; ++j) A(i, j) = rnorm();
    }
    Eigen::MatrixXd LA = llt.matrixL() * A;
    return LA * LA.transpose();
  }

  // Inverse-Wishart(df, scale): inverse of a Wishart draw with inverted scale.
  // Symmetrized so round-off cannot leave the cone of covariance matrices.
  Eigen::MatrixXd rinvwishart(double df, const Eigen::MatrixXd& scale) {
    const Eigen::MatrixXd w = rwishart(df, scale.inverse()).inverse();
    return 0.5 * (w + w.transpose());
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace netinfer
