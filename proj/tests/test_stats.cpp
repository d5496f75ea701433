#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "netinfer/oracle.hpp"
#include "netinfer/rng.hpp"
#include "netinfer/stats.hpp"
#include "test_util.hpp"

using namespace netinfer;

namespace {

ModelSpec all_term_spec() {
  return ModelSpec{{
      StatTerm::edges(),
      StatTerm::mutual(),
      StatTerm::node_out_cov("xa"),
      StatTerm::node_in_cov("xa"),
      StatTerm::edge_cov("w"),
      StatTerm::abs_diff_cov("xb"),
      StatTerm::gw_idegree(std::log(2.0)),
      StatTerm::gw_odegree(0.4),
      StatTerm::gw_esp(EspVariant::OTP, std::log(2.0)),
      StatTerm::gw_esp(EspVariant::ISP, 0.7),
      StatTerm::gw_esp(EspVariant::OSP, std::log(2.0)),
      StatTerm::gw_esp(EspVariant::ITP, 1.1),
      StatTerm::idegree_count(1),
      StatTerm::odegree_count(0),
  }};
}

// Network with in-degree sequence (1, 1, 2, 0) and out-degrees (2, 2, 0, 0).
DirectedNetwork degree_fixture() {
  return network_from_edges(
      {{"n2", "n1"}, {"n1", "n2"}, {"n1", "n3"}, {"n2", "n3"}},
      std::vector<std::string>{"n1", "n2", "n3", "n4"});
}

}  // namespace

TEST_CASE("geometrically weighted in-degree on the frozen degree sequence") {
  // In-degrees (1, 1, 2, 0) at decay log 2: 2 * (0.5 * 2 + 0.75 * 1) = 3.5.
  auto y = degree_fixture();
  CovariateSet cov;
  cov.n = 4;
  ModelSpec spec{{StatTerm::edges(), StatTerm::gw_idegree(std::log(2.0)),
                  StatTerm::gw_odegree(std::log(2.0))}};
  auto s = eval_stats(spec, y, cov);
  REQUIRE(s[0] == 4.0);
  REQUIRE(s[1] == Catch::Approx(3.5).margin(1e-12));
  // out-degrees (2, 2, 0, 0): 2 * (0.75 * 2) = 3.0
  REQUIRE(s[2] == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("shared-partner statistics and histograms on the two-path fixture") {
  auto y = nitest::triangle_path_network();
  CovariateSet cov;
  cov.n = 3;
  ModelSpec spec{{StatTerm::edges(), StatTerm::gw_esp(EspVariant::OTP, std::log(2.0))}};
  auto s = eval_stats(spec, y, cov);
  REQUIRE(s[1] == Catch::Approx(1.0).margin(1e-12));

  REQUIRE(esp_distribution(y, EspVariant::OTP) == std::vector<long>{2, 1});
  REQUIRE(esp_distribution(y, EspVariant::ISP) == std::vector<long>{2, 1});
  REQUIRE(esp_distribution(y, EspVariant::OSP) == std::vector<long>{2, 1});
  REQUIRE(esp_distribution(y, EspVariant::ITP) == std::vector<long>{3, 0});
}

TEST_CASE("covariate statistics on a hand-checked pair") {
  auto y = network_from_edges({{"a", "b"}}, std::vector<std::string>{"a", "b"});
  CovariateSet cov;
  cov.n = 2;
  cov.nodal["x"] = {2.0, 3.0};
  cov.dyadic["w"] = {0.0, 5.0, -1.0, 0.0};
  ModelSpec spec{{StatTerm::edges(), StatTerm::node_out_cov("x"), StatTerm::node_in_cov("x"),
                  StatTerm::abs_diff_cov("x"), StatTerm::edge_cov("w")}};
  auto s = eval_stats(spec, y, cov);
  REQUIRE(s[0] == 1.0);
  REQUIRE(s[1] == 2.0);
  REQUIRE(s[2] == 3.0);
  REQUIRE(s[3] == 1.0);
  REQUIRE(s[4] == 5.0);
}

TEST_CASE("degree-count statistics on the two-path fixture") {
  auto y = nitest::triangle_path_network();
  CovariateSet cov;
  cov.n = 3;
  // in-degrees: n1: 0, n2: 2, n3: 1; out-degrees: n1: 2, n2: 0, n3: 1
  ModelSpec spec{{StatTerm::edges(), StatTerm::idegree_count(0), StatTerm::idegree_count(1),
                  StatTerm::idegree_count(2), StatTerm::odegree_count(0),
                  StatTerm::odegree_count(2)}};
  auto s = eval_stats(spec, y, cov);
  REQUIRE(s[1] == 1.0);
  REQUIRE(s[2] == 1.0);
  REQUIRE(s[3] == 1.0);
  REQUIRE(s[4] == 1.0);
  REQUIRE(s[5] == 1.0);
}

TEST_CASE("degree histograms sum to n and shared-partner histograms to the edge count") {
  Rng rng(509);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 3 + static_cast<int>(rng.rint(0, 5));
    auto y = nitest::random_network(rng, n, rng.runif(0.1, 0.9));
    auto d = degree_distributions(y);
    long in_sum = 0, out_sum = 0;
    for (int k = 0; k < n; ++k) {
      in_sum += d.in_counts[k];
      out_sum += d.out_counts[k];
    }
    REQUIRE(in_sum == n);
    REQUIRE(out_sum == n);
    for (auto v : {EspVariant::OTP, EspVariant::ISP, EspVariant::OSP, EspVariant::ITP}) {
      long esp_sum = 0;
      for (long c : esp_distribution(y, v)) esp_sum += c;
      REQUIRE(esp_sum == y.edge_count());
    }
  }
}

TEST_CASE("fast statistics agree with the brute-force oracle") {
  Rng rng(2027);
  auto spec = all_term_spec();
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 4 + static_cast<int>(rng.rint(0, 4));
    auto y = nitest::random_network(rng, n, rng.runif(0.1, 0.9));
    auto cov = nitest::random_covariates(rng, n);
    auto fast = eval_stats(spec, y, cov);
    auto slow = oracle::brute_stats(spec, y, cov);
    for (long k = 0; k < fast.size(); ++k)
      REQUIRE(fast[k] == Catch::Approx(slow[k]).margin(1e-12));
  }
}

TEST_CASE("change statistics equal the brute-force toggle difference") {
  Rng rng(404);
  auto spec = all_term_spec();
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 4 + static_cast<int>(rng.rint(0, 4));
    auto y = nitest::random_network(rng, n, rng.runif(0.15, 0.85));
    auto cov = nitest::random_covariates(rng, n);
    for_each_dyad(n, [&](int i, int j) {
      auto delta = change_stats(spec, y, cov, {i, j});
      DirectedNetwork on = y, off = y;
      on.set_edge(i, j, true);
      off.set_edge(i, j, false);
      const Eigen::VectorXd diff =
          oracle::brute_stats(spec, on, cov) - oracle::brute_stats(spec, off, cov);
      for (long k = 0; k < delta.size(); ++k)
        REQUIRE(delta[k] == Catch::Approx(diff[k]).margin(1e-12));
    });
  }
}

TEST_CASE("incremental context stays consistent across committed toggles") {
  Rng rng(88);
  auto spec = all_term_spec();
  const int n = 7;
  auto y = nitest::random_network(rng, n, 0.4);
  auto cov = nitest::random_covariates(rng, n);
  ChangeStatContext ctx(spec, y, cov);
  for (int step = 0; step < 400; ++step) {
    int i = static_cast<int>(rng.rint(0, n - 1));
    int j = static_cast<int>(rng.rint(0, n - 2));
    if (j >= i) ++j;
    ctx.commit_toggle(y, i, j);
    if (step % 40 == 0) {
      // a freshly built context must agree with the maintained one
      ChangeStatContext fresh(spec, y, cov);
      for_each_dyad(n, [&](int a, int b) {
        auto d1 = ctx.change(y, a, b);
        auto d2 = fresh.change(y, a, b);
        for (long k = 0; k < d1.size(); ++k)
          REQUIRE(d1[k] == Catch::Approx(d2[k]).margin(1e-12));
      });
    }
  }
}

TEST_CASE("endogenous statistics are invariant under node relabeling") {
  Rng rng(17);
  ModelSpec spec{{StatTerm::edges(), StatTerm::mutual(), StatTerm::gw_idegree(std::log(2.0)),
                  StatTerm::gw_odegree(0.9), StatTerm::gw_esp(EspVariant::OTP, std::log(2.0)),
                  StatTerm::gw_esp(EspVariant::ISP, 0.5), StatTerm::gw_esp(EspVariant::OSP, 0.5),
                  StatTerm::gw_esp(EspVariant::ITP, 0.5), StatTerm::idegree_count(2),
                  StatTerm::odegree_count(1)}};
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 6;
    auto y = nitest::random_network(rng, n, 0.45);
    CovariateSet cov;
    cov.n = n;
    // rebuild under a shuffled node order
    std::vector<std::string> perm = y.node_labels();
    for (int k = n - 1; k > 0; --k)
      std::swap(perm[k], perm[rng.rint(0, k)]);
    std::vector<std::pair<std::string, std::string>> edges;
    const auto& labels = y.node_labels();
    for_each_dyad(n, [&](int i, int j) {
      if (y.edge(i, j)) edges.emplace_back(labels[i], labels[j]);
    });
    auto z = network_from_edges(edges, perm);
    auto sy = eval_stats(spec, y, cov);
    auto sz = eval_stats(spec, z, cov);
    for (long k = 0; k < sy.size(); ++k) REQUIRE(sy[k] == sz[k]);  // bit-exact
  }
}

TEST_CASE("geometrically weighted statistics approach linear counts at large decay") {
  Rng rng(31);
  auto y = nitest::random_network(rng, 7, 0.4);
  CovariateSet cov;
  cov.n = 7;
  const double huge = 25.0;
  ModelSpec spec{{StatTerm::edges(), StatTerm::gw_idegree(huge), StatTerm::gw_odegree(huge),
                  StatTerm::gw_esp(EspVariant::OTP, huge)}};
  auto s = eval_stats(spec, y, cov);
  REQUIRE(s[1] == Catch::Approx(static_cast<double>(y.edge_count())).margin(1e-6));
  REQUIRE(s[2] == Catch::Approx(static_cast<double>(y.edge_count())).margin(1e-6));
  long total_partners = 0;
  auto hist = esp_distribution(y, EspVariant::OTP);
  for (std::size_t k = 0; k < hist.size(); ++k) total_partners += static_cast<long>(k) * hist[k];
  REQUIRE(s[3] == Catch::Approx(static_cast<double>(total_partners)).margin(1e-6));
}

TEST_CASE("all-degrees-at-most-one networks make the weighted degree decay-free") {
  // Out-star: in-degrees are 1 for each leaf, so the statistic collapses to
  // e^a * (1 - (1 - e^-a)) * leaves = leaves for every decay.
  auto y = network_from_edges({{"hub", "l1"}, {"hub", "l2"}, {"hub", "l3"}},
                              std::vector<std::string>{"hub", "l1", "l2", "l3"});
  CovariateSet cov;
  cov.n = 4;
  for (double a : {0.2, std::log(2.0), 1.7, 5.0}) {
    ModelSpec spec{{StatTerm::edges(), StatTerm::gw_idegree(a)}};
    auto s = eval_stats(spec, y, cov);
    REQUIRE(s[1] == Catch::Approx(3.0).margin(1e-12));
  }
}

TEST_CASE("weighted in-degree depends on the degree histogram only") {
  // Two different networks with the same in-degree histogram give the same value.
  auto y1 = network_from_edges({{"a", "b"}, {"c", "d"}},
                               std::vector<std::string>{"a", "b", "c", "d"});
  auto y2 = network_from_edges({{"d", "c"}, {"b", "a"}},
                               std::vector<std::string>{"a", "b", "c", "d"});
  CovariateSet cov;
  cov.n = 4;
  ModelSpec spec{{StatTerm::edges(), StatTerm::gw_idegree(0.83)}};
  REQUIRE(eval_stats(spec, y1, cov)[1] == eval_stats(spec, y2, cov)[1]);
}

TEST_CASE("term grammar parses, prints, and validates") {
  auto spec = parse_model_terms(
      "edges, mutual, gwidegree(0.6931), gwesp(otp,0.6931), gwesp(isp), nodeocov(gdp), "
      "nodeicov(gdp), edgecov(dist), absdiff(polity), idegree(0), odegree(3)");
  REQUIRE(spec.size() == 11);
  REQUIRE(spec.terms[0].kind == TermKind::Edges);
  REQUIRE(spec.terms[3].variant == EspVariant::OTP);
  REQUIRE(spec.terms[4].decay == Catch::Approx(std::log(2.0)));  // default decay
  // round trip through the printed form
  auto again = parse_model_terms(format_model_terms(spec));
  REQUIRE(format_model_terms(again) == format_model_terms(spec));

  REQUIRE_THROWS_AS(parse_model_terms("edges, triangles"), validation_error);
  REQUIRE_THROWS_AS(parse_model_terms("edges, gwesp(otp"), validation_error);
  REQUIRE_THROWS_AS(parse_model_terms("edges, gwesp(both,0.5)"), validation_error);
  REQUIRE_THROWS_AS(parse_model_terms(""), validation_error);
}

TEST_CASE("model validation enforces structure") {
  auto y = nitest::triangle_path_network();
  CovariateSet cov;
  cov.n = 3;
  cov.nodal["gdp"] = {1, 2, 3};

  ModelSpec no_edges{{StatTerm::mutual()}};
  REQUIRE_THROWS_AS(no_edges.validate(y, cov), validation_error);

  ModelSpec two_edges{{StatTerm::edges(), StatTerm::edges()}};
  REQUIRE_THROWS_AS(two_edges.validate(y, cov), validation_error);

  ModelSpec missing_cov{{StatTerm::edges(), StatTerm::node_out_cov("height")}};
  REQUIRE_THROWS_AS(missing_cov.validate(y, cov), validation_error);

  ModelSpec bad_decay{{StatTerm::edges(), StatTerm::gw_idegree(-0.5)}};
  REQUIRE_THROWS_AS(bad_decay.validate(y, cov), validation_error);

  ModelSpec bad_degree{{StatTerm::edges(), StatTerm::idegree_count(5)}};
  REQUIRE_THROWS_AS(bad_degree.validate(y, cov), validation_error);

  ModelSpec ok{{StatTerm::edges(), StatTerm::mutual(), StatTerm::node_out_cov("gdp")}};
  REQUIRE_NOTHROW(ok.validate(y, cov));
  REQUIRE(!ok.dyad_independent());
  ModelSpec indep{{StatTerm::edges(), StatTerm::node_out_cov("gdp")}};
  REQUIRE(indep.dyad_independent());
}

TEST_CASE("change statistic sign conventions on a simple case") {
  // Adding a->b where b->a exists gains one mutual dyad; the change statistic
  // reports the same vector whether the edge is currently on or off.
  auto y = network_from_edges({{"b", "a"}}, std::vector<std::string>{"a", "b"});
  CovariateSet cov;
  cov.n = 2;
  ModelSpec spec{{StatTerm::edges(), StatTerm::mutual()}};
  auto d_off = change_stats(spec, y, cov, {0, 1});
  REQUIRE(d_off[0] == 1.0);
  REQUIRE(d_off[1] == 1.0);
  auto y2 = y;
  y2.set_edge(0, 1, true);
  auto d_on = change_stats(spec, y2, cov, {0, 1});
  REQUIRE(d_on[0] == d_off[0]);
  REQUIRE(d_on[1] == d_off[1]);
}
