#pragma once

// Small numeric helpers shared across the library: stable log-sum-exp
// accumulation, normal / chi-squared distribution functions, empirical
// quantiles, and an autocorrelation-time estimator for MCMC output.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace netinfer {

inline constexpr double kPi = 3.14159265358979323846;

// Streaming log(sum(exp(x_i))) without materializing the terms.
class LogSumAcc {
public:
  void add(double log_term) {
    if (std::isnan(log_term)) throw std::runtime_error("log-sum-exp: NaN term");
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (log_term > max_) {
      sum_ = sum_ * std::exp(max_ - log_term) + 1.0;
      max_ = log_term;
    } else {
      sum_ += std::exp(log_term - max_);
    }
    ++count_;
  }
  double value() const {
    if (count_ == 0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_);
  }
  long count() const { return count_; }

private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
  long count_ = 0;
};

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Two-sided normal tail probability, used for Wald p-values.
inline double two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

// Regularized lower incomplete gamma P(a, x), series for x < a+1 and
// continued fraction otherwise (standard Lentz evaluation).
inline double reg_lower_gamma(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("reg_lower_gamma: bad arguments");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a, sum = term, ap = a;
    for (int k = 0; k < 500; ++k) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int k = 1; k < 500; ++k) {
    const double an = -k * (k - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

inline double chi2_cdf(double x, double df) { return reg_lower_gamma(0.5 * df, 0.5 * x); }
inline double chi2_sf(double x, double df) { return 1.0 - chi2_cdf(x, df); }

inline double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of empty vector");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sample_sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

// Empirical quantile with linear interpolation between order statistics
// (the common "type 7" rule). p in [0, 1].
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw std::invalid_argument("quantile of empty vector");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile level outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = p * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = h - std::floor(h);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// Integrated autocorrelation time via the initial-positive-sequence rule:
// sum lag autocorrelations in adjacent pairs and truncate at the first pair
// whose sum is non-positive. Returns tau >= 0 such that ess = n / tau.
inline double autocorr_time(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  if (n < 4) return 1.0;
  const double m = mean(chain);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = chain[i] - m;
  double c0 = 0.0;
  for (double x : centered) c0 += x * x;
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return 1.0;  // constant chain
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / static_cast<double>(n);
  };
  double tau = 1.0;  // lag-0 term
  for (std::size_t k = 1; k + 1 < n / 2; k += 2) {
    const double pair = (acov(k) + acov(k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::max(tau, 1e-12);
}

inline double effective_sample_size(const std::vector<double>& chain) {
  return static_cast<double>(chain.size()) / autocorr_time(chain);
}

}  // namespace netinfer
