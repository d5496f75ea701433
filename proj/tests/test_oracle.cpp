#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "netinfer/mathutil.hpp"
#include "netinfer/oracle.hpp"
#include "netinfer/rng.hpp"
#include "test_util.hpp"

using namespace netinfer;

TEST_CASE("brute statistics on a reciprocal pair") {
  auto y = network_from_edges({{"a", "b"}, {"b", "a"}});
  CovariateSet cov;
  cov.n = 2;
  ModelSpec spec{{StatTerm::edges(), StatTerm::mutual()}};
  auto s = oracle::brute_stats(spec, y, cov);
  REQUIRE(s[0] == 2.0);
  REQUIRE(s[1] == 1.0);
}

TEST_CASE("brute shared-partner weighting on the two-path fixture") {
  // Edges n1->n2, n1->n3, n3->n2 with decay log 2: the edge n1->n2 has one
  // outgoing two-path partner (via n3), the other two have none, so the
  // weighted count is 2 * (1 - (1/2)^1) * 1 = 1.
  auto y = nitest::triangle_path_network();
  CovariateSet cov;
  cov.n = 3;
  ModelSpec spec{{StatTerm::edges(), StatTerm::gw_esp(EspVariant::OTP, std::log(2.0))}};
  auto s = oracle::brute_stats(spec, y, cov);
  REQUIRE(s[0] == 3.0);
  REQUIRE(s[1] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("brute shared-partner histograms by variant on the two-path fixture") {
  auto y = nitest::triangle_path_network();
  // OTP: edge n1->n2 has partner n3; the others have none.
  REQUIRE(oracle::brute_esp_distribution(y, EspVariant::OTP) == std::vector<long>{2, 1});
  // ISP: edge n3->n2 has partner n1 (n1->n3 and n1->n2 both present).
  REQUIRE(oracle::brute_esp_distribution(y, EspVariant::ISP) == std::vector<long>{2, 1});
  // OSP: edge n1->n3 has partner n2 (n1->n2 and n3->n2 both present).
  REQUIRE(oracle::brute_esp_distribution(y, EspVariant::OSP) == std::vector<long>{2, 1});
  // ITP: no edge sits on an incoming two-path.
  REQUIRE(oracle::brute_esp_distribution(y, EspVariant::ITP) == std::vector<long>{3, 0});
}

TEST_CASE("brute stats refuses large networks") {
  Rng rng(3);
  auto y = nitest::random_network(rng, 13, 0.2);
  CovariateSet cov;
  cov.n = 13;
  ModelSpec spec{{StatTerm::edges()}};
  REQUIRE_THROWS_AS(oracle::brute_stats(spec, y, cov), validation_error);
}

TEST_CASE("pair concordance AUC on the frozen four-point fixture") {
  const std::vector<int> labels{1, 0, 1, 0};
  const std::vector<double> scores{0.9, 0.8, 0.4, 0.1};
  REQUIRE(oracle::pair_auc(labels, scores) == 0.75);
}

TEST_CASE("pair concordance AUC boundary cases") {
  REQUIRE(oracle::pair_auc({1, 1, 0, 0}, {0.9, 0.8, 0.2, 0.1}) == 1.0);
  REQUIRE(oracle::pair_auc({1, 1, 0, 0}, {0.1, 0.2, 0.8, 0.9}) == 0.0);
  REQUIRE(oracle::pair_auc({1, 0, 1, 0}, {0.5, 0.5, 0.5, 0.5}) == 0.5);
  REQUIRE_THROWS_AS(oracle::pair_auc({1, 1}, {0.5, 0.2}), validation_error);
  REQUIRE_THROWS_AS(oracle::pair_auc({1, 0}, {0.5}), validation_error);
  REQUIRE_THROWS_AS(oracle::pair_auc({1, 2}, {0.5, 0.2}), validation_error);
}

TEST_CASE("IRLS oracle recovers closed-form intercept-only fits") {
  // Balanced response: the logit and probit intercepts are both exactly 0.
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(8, 1);
  Eigen::VectorXd y(8);
  y << 1, 0, 1, 0, 1, 0, 1, 0;
  auto logit_beta = oracle::glm_irls(X, y, "logit");
  REQUIRE(logit_beta[0] == Catch::Approx(0.0).margin(1e-10));
  auto probit_beta = oracle::glm_irls(X, y, "probit");
  REQUIRE(probit_beta[0] == Catch::Approx(0.0).margin(1e-10));

  // Unbalanced: logit intercept is log(p/(1-p)); probit satisfies Phi(b) = p.
  Eigen::VectorXd y2(8);
  y2 << 1, 1, 1, 1, 1, 1, 0, 0;
  auto b2 = oracle::glm_irls(X, y2, "logit");
  REQUIRE(b2[0] == Catch::Approx(std::log(0.75 / 0.25)).epsilon(1e-9));
  auto b3 = oracle::glm_irls(X, y2, "probit");
  REQUIRE(normal_cdf(b3[0]) == Catch::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("IRLS oracle throws on separated data") {
  Eigen::MatrixXd X(6, 2);
  X << 1, -2, 1, -1, 1, -0.5, 1, 0.5, 1, 1, 1, 2;
  Eigen::VectorXd y(6);
  y << 0, 0, 0, 1, 1, 1;  // perfectly separated on column 2
  REQUIRE_THROWS(oracle::glm_irls(X, y, "logit"));
}

TEST_CASE("IRLS oracle validates its inputs") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd y(4);
  y << 1, 0, 1, 0;
  REQUIRE_THROWS_AS(oracle::glm_irls(X, y, "cloglog"), validation_error);
  Eigen::VectorXd bad(3);
  bad << 1, 0, 1;
  REQUIRE_THROWS_AS(oracle::glm_irls(X, bad, "logit"), validation_error);
}
