#pragma once

// Shared helpers for the test suite: deterministic random fixtures and a few
// fixed networks reused across files.

#include <string>
#include <vector>

#include "netinfer/network.hpp"
#include "netinfer/rng.hpp"

namespace nitest {

inline std::vector<std::string> letter_labels(int n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (int k = 0; k < n; ++k) labels.push_back("n" + std::to_string(k + 1));
  return labels;
}

inline netinfer::DirectedNetwork random_network(netinfer::Rng& rng, int n, double p) {
  netinfer::DirectedNetwork y(letter_labels(n));
  netinfer::for_each_dyad(n, [&](int i, int j) {
    if (rng.runif() < p) y.set_edge(i, j, true);
  });
  return y;
}

inline std::vector<double> random_nodal(netinfer::Rng& rng, int n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.rnorm();
  return x;
}

inline std::vector<double> random_dyadic(netinfer::Rng& rng, int n) {
  std::vector<double> x(static_cast<std::size_t>(n) * n, 0.0);
  netinfer::for_each_dyad(n, [&](int i, int j) {
    x[static_cast<std::size_t>(i) * n + j] = rng.rnorm();
  });
  return x;
}

inline netinfer::CovariateSet random_covariates(netinfer::Rng& rng, int n) {
  netinfer::CovariateSet cov;
  cov.n = n;
  cov.nodal["xa"] = random_nodal(rng, n);
  cov.nodal["xb"] = random_nodal(rng, n);
  cov.dyadic["w"] = random_dyadic(rng, n);
  cov.dyadic_missing_defaults["w"] = 0;
  return cov;
}

// Three nodes n1, n2, n3 with edges n1->n2, n1->n3, n3->n2: one transitive
// two-path configuration. Used by several frozen-value tests.
inline netinfer::DirectedNetwork triangle_path_network() {
  return netinfer::network_from_edges(
      {{"n1", "n2"}, {"n1", "n3"}, {"n3", "n2"}},
      std::vector<std::string>{"n1", "n2", "n3"});
}

}  // namespace nitest
