#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "netinfer/network.hpp"
#include "netinfer/rng.hpp"
#include "test_util.hpp"

using namespace netinfer;

namespace {
std::string write_temp(const std::string& name, const std::string& content) {
  auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}
}  // namespace

TEST_CASE("reciprocal pair builds a 2-edge network") {
  auto y = network_from_edges({{"a", "b"}, {"b", "a"}});
  REQUIRE(y.n() == 2);
  REQUIRE(y.edge_count() == 2);
  REQUIRE(y.edge(0, 1));
  REQUIRE(y.edge(1, 0));
}

TEST_CASE("node list fixes order and keeps isolates") {
  auto y = network_from_edges({{"b", "c"}},
                              std::vector<std::string>{"a", "b", "c", "d"});
  REQUIRE(y.n() == 4);
  REQUIRE(y.node_labels()[0] == "a");
  REQUIRE(y.edge(y.index_of("b"), y.index_of("c")));
  REQUIRE(y.in_degree(y.index_of("a")) == 0);
  REQUIRE(y.out_degree(y.index_of("d")) == 0);
}

TEST_CASE("self loops are rejected") {
  REQUIRE_THROWS_AS(network_from_edges({{"a", "a"}}, std::vector<std::string>{"a", "b"}),
                    validation_error);
}

TEST_CASE("edges naming unknown labels are rejected when a node list is given") {
  REQUIRE_THROWS_AS(network_from_edges({{"a", "z"}}, std::vector<std::string>{"a", "b"}),
                    validation_error);
}

TEST_CASE("duplicate edge rows warn and stay idempotent") {
  LoadWarnings w;
  auto y = network_from_edges({{"a", "b"}, {"a", "b"}, {"a", "b"}}, std::nullopt, &w);
  REQUIRE(y.edge_count() == 1);
  REQUIRE(w.duplicate_edges == 2);
}

TEST_CASE("diagonal dyad access throws") {
  auto y = network_from_edges({{"a", "b"}});
  REQUIRE_THROWS_AS(y.edge(0, 0), validation_error);
  REQUIRE_THROWS_AS(y.set_edge(1, 1, true), validation_error);
}

TEST_CASE("density on fixed cases") {
  DirectedNetwork empty(nitest::letter_labels(5));
  REQUIRE(density(empty) == 0.0);

  DirectedNetwork full(nitest::letter_labels(4));
  for_each_dyad(4, [&](int i, int j) { full.set_edge(i, j, true); });
  REQUIRE(density(full) == 1.0);

  auto y = nitest::triangle_path_network();  // 3 of 6 dyads... 3 edges, 6 dyads
  REQUIRE(density(y) == Catch::Approx(0.5));
}

TEST_CASE("toggle changes edge count by exactly one") {
  Rng rng(11);
  auto y = nitest::random_network(rng, 6, 0.4);
  const long before = y.edge_count();
  y.toggle(2, 5);
  REQUIRE(std::abs(y.edge_count() - before) == 1);
  y.toggle(2, 5);
  REQUIRE(y.edge_count() == before);
}

TEST_CASE("edge list round trips through CSV text") {
  Rng rng(7);
  auto y = nitest::random_network(rng, 8, 0.3);
  const std::string path = write_temp("netinfer_roundtrip.csv", edge_list_csv(y));
  LoadWarnings w;
  auto back = load_network(path, std::nullopt, &w);
  // node order may differ (first mention), so compare as labeled edge sets
  REQUIRE(back.edge_count() == y.edge_count());
  for_each_dyad(y.n(), [&](int i, int j) {
    if (!y.edge(i, j)) return;
    const auto& la = y.node_labels();
    REQUIRE(back.edge(back.index_of(la[i]), back.index_of(la[j])));
  });
  std::remove(path.c_str());
}

TEST_CASE("edge list loader enforces the src,dst header") {
  const std::string path = write_temp("netinfer_badheader.csv", "from,to\na,b\n");
  REQUIRE_THROWS_AS(load_network(path), validation_error);
  std::remove(path.c_str());
}

TEST_CASE("nodal covariate table is aligned and validated") {
  auto y = network_from_edges({{"a", "b"}}, std::vector<std::string>{"a", "b", "c"});
  CovariateSet cov;
  cov.n = 3;
  CsvTable t;
  t.header = {"node", "gdp", "polity"};
  t.rows = {{"b", "2.0", "-1"}, {"a", "1.5", "3"}, {"c", "0.25", "0"}};
  add_nodal_table(cov, y, t, "test");
  REQUIRE(cov.nodal_values("gdp")[y.index_of("a")] == 1.5);
  REQUIRE(cov.nodal_values("gdp")[y.index_of("c")] == 0.25);
  REQUIRE(cov.nodal_values("polity")[y.index_of("b")] == -1.0);

  CsvTable missing;
  missing.header = {"node", "gdp"};
  missing.rows = {{"a", "1"}, {"b", "2"}};
  CovariateSet cov2;
  cov2.n = 3;
  REQUIRE_THROWS_AS(add_nodal_table(cov2, y, missing, "test"), validation_error);
}

TEST_CASE("non-finite covariate tokens are rejected") {
  auto y = network_from_edges({{"a", "b"}}, std::vector<std::string>{"a", "b"});
  CsvTable t;
  t.header = {"node", "x"};
  t.rows = {{"a", "nan"}, {"b", "1"}};
  CovariateSet cov;
  cov.n = 2;
  REQUIRE_THROWS_AS(add_nodal_table(cov, y, t, "test"), validation_error);
  t.rows = {{"a", "inf"}, {"b", "1"}};
  CovariateSet cov2;
  cov2.n = 2;
  REQUIRE_THROWS_AS(add_nodal_table(cov2, y, t, "test"), validation_error);
}

TEST_CASE("dyadic long form defaults missing pairs to zero and counts them") {
  auto y = network_from_edges({{"a", "b"}}, std::vector<std::string>{"a", "b", "c"});
  CovariateSet cov;
  cov.n = 3;
  CsvTable t;
  t.header = {"src", "dst", "value"};
  t.rows = {{"a", "b", "2.5"}, {"b", "a", "-1"}};
  add_dyadic_long(cov, y, "dist", t, "test");
  REQUIRE(cov.dyadic_value("dist", y.index_of("a"), y.index_of("b")) == 2.5);
  REQUIRE(cov.dyadic_value("dist", y.index_of("a"), y.index_of("c")) == 0.0);
  REQUIRE(cov.dyadic_missing_defaults.at("dist") == 4);  // 6 dyads, 2 given
}

TEST_CASE("dyadic square matrix form is label-addressed") {
  auto y = network_from_edges({{"a", "b"}}, std::vector<std::string>{"a", "b", "c"});
  CovariateSet cov;
  cov.n = 3;
  CsvTable t;
  t.header = {"node", "b", "a", "c"};  // deliberately permuted columns
  t.rows = {{"a", "1", "0", "2"}, {"b", "0", "3", "4"}, {"c", "5", "6", "0"}};
  add_dyadic_matrix(cov, y, "w", t, "test");
  REQUIRE(cov.dyadic_value("w", y.index_of("a"), y.index_of("b")) == 1.0);
  REQUIRE(cov.dyadic_value("w", y.index_of("a"), y.index_of("c")) == 2.0);
  REQUIRE(cov.dyadic_value("w", y.index_of("b"), y.index_of("a")) == 3.0);
  REQUIRE(cov.dyadic_value("w", y.index_of("c"), y.index_of("a")) == 6.0);
  REQUIRE(cov.dyadic_missing_defaults.at("w") == 0);
}

TEST_CASE("density is invariant under node permutation") {
  Rng rng(23);
  auto y = nitest::random_network(rng, 7, 0.35);
  // permute labels by rebuilding with a rotated node list
  std::vector<std::string> rotated = y.node_labels();
  std::rotate(rotated.begin(), rotated.begin() + 3, rotated.end());
  std::vector<std::pair<std::string, std::string>> edges;
  const auto& labels = y.node_labels();
  for_each_dyad(y.n(), [&](int i, int j) {
    if (y.edge(i, j)) edges.emplace_back(labels[i], labels[j]);
  });
  auto z = network_from_edges(edges, rotated);
  REQUIRE(density(z) == density(y));
}
