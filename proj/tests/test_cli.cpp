#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "netinfer/cli.hpp"
#include "test_util.hpp"

using namespace netinfer;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

// scratch directory that cleans up after itself
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("netinfer_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

// a reproducible 12-node data set with one nodal and one dyadic covariate
void write_fixture_data(const TempDir& dir) {
  Rng rng(2024);
  const int n = 12;
  DirectedNetwork y = nitest::random_network(rng, n, 0.25);
  write_text_file(dir.file("edges.csv"), edge_list_csv(y));

  std::string nodal = "node,wealth\n";
  for (int k = 0; k < n; ++k)
    nodal += y.node_labels()[static_cast<std::size_t>(k)] + "," + format_real(rng.rnorm()) + "\n";
  write_text_file(dir.file("nodal.csv"), nodal);

  std::string dyadic = "src,dst,value\n";
  for_each_dyad(n, [&](int i, int j) {
    dyadic += y.node_labels()[static_cast<std::size_t>(i)] + "," +
              y.node_labels()[static_cast<std::size_t>(j)] + "," +
              format_real(std::fabs(i - j) / 4.0) + "\n";
  });
  write_text_file(dir.file("dist.csv"), dyadic);
}

std::vector<double> estimates_from_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  std::vector<double> out;
  for (const auto& row : table.rows) out.push_back(parse_real(row[1], path));
  return out;
}

}  // namespace

TEST_CASE("config files parse, serialize, and reach a fixed point") {
  const std::string text =
      "# comment\n"
      "seed = 42\n"
      "out=somewhere\n"
      "\n"
      "[data]\n"
      "edges = e.csv\n"
      "dyadic.dist = d.csv\n"
      "; another comment\n"
      "[ergm]\n"
      "terms = edges, mutual\n";
  const cli::RunConfig cfg = cli::parse_config_text(text, "inline");
  CHECK(cfg.get("", "seed", "") == "42");
  CHECK(cfg.get("", "out", "") == "somewhere");
  CHECK(cfg.get("data", "dyadic.dist", "") == "d.csv");
  CHECK(cfg.require("ergm", "terms") == "edges, mutual");
  CHECK_THROWS_AS(cfg.require("ergm", "missing"), validation_error);

  // serialize -> parse -> serialize is byte-stable
  const std::string once = cli::serialize_config(cfg);
  const std::string twice = cli::serialize_config(cli::parse_config_text(once, "echo"));
  CHECK(once == twice);

  CHECK_THROWS_AS(cli::parse_config_text("key without equals\n", "bad"), validation_error);
  CHECK_THROWS_AS(cli::parse_config_text("[unclosed\n", "bad"), validation_error);
  CHECK_THROWS_AS(cli::parse_config_text("= value\n", "bad"), validation_error);
}

TEST_CASE("command line errors and bad configs exit with code 1") {
  std::string err;
  CHECK(run({"no-such-command"}, nullptr, &err) == 1);
  CHECK(run({"fit-glm"}, nullptr, &err) == 1);  // --config is required
  CHECK(err.find("--config") != std::string::npos);

  TempDir dir("cli_badcfg");
  write_text_file(dir.file("broken.cfg"), "seed = 1\nout = " + dir.file("o") + "\n[glm]\n");
  CHECK(run({"fit-glm", "--config", dir.file("broken.cfg")}, nullptr, &err) == 1);
  CHECK(err.find("[data]") != std::string::npos);

  // missing input file
  write_text_file(dir.file("missing.cfg"),
                  "seed = 1\nout = " + dir.file("o") + "\n[data]\nedges = nowhere.csv\n"
                  "[glm]\nterms = edges\n");
  CHECK(run({"fit-glm", "--config", dir.file("missing.cfg")}, nullptr, &err) == 1);

  CHECK(run({"fit-glm", "--config", dir.file("does_not_exist.cfg")}, nullptr, &err) == 1);
}

TEST_CASE("help text lists every command and exits cleanly") {
  std::string out;
  CHECK(run({"--help"}, &out) == 0);
  for (const std::string name :
       {"fit-ergm", "fit-glm", "fit-ame", "simulate", "gof", "verify"})
    CHECK(out.find(name) != std::string::npos);
}

TEST_CASE("dyad-independent model fits agree between the two fitting commands") {
  TempDir dir("cli_glm_ergm");
  write_fixture_data(dir);
  const std::string data =
      "[data]\nedges = " + dir.file("edges.csv") + "\nnodal = " + dir.file("nodal.csv") +
      "\ndyadic.dist = " + dir.file("dist.csv") + "\n";

  write_text_file(dir.file("glm.cfg"),
                  "seed = 5\nout = " + dir.file("out_glm") + "\n" + data +
                  "[glm]\nterms = edges, nodeocov(wealth), edgecov(dist)\nlink = logit\n");
  REQUIRE(run({"fit-glm", "--config", dir.file("glm.cfg")}) == 0);

  write_text_file(dir.file("ergm.cfg"),
                  "seed = 5\nout = " + dir.file("out_ergm") + "\n" + data +
                  "[ergm]\nterms = edges, nodeocov(wealth), edgecov(dist)\n"
                  "samples = 800\nloglik = false\n");
  REQUIRE(run({"fit-ergm", "--config", dir.file("ergm.cfg")}) == 0);

  const std::vector<double> glm_est = estimates_from_csv(dir.file("out_glm/coefficients.csv"));
  const std::vector<double> ergm_est = estimates_from_csv(dir.file("out_ergm/coefficients.csv"));
  REQUIRE(glm_est.size() == 3);
  REQUIRE(ergm_est.size() == 3);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(ergm_est[k] == Approx(glm_est[k]).margin(0.15));

  // both runs echo a reparsable resolved config carrying the seed
  for (const std::string out : {"out_glm", "out_ergm"}) {
    const cli::RunConfig echoed =
        cli::load_config(dir.file(out + "/resolved.cfg"));
    CHECK(echoed.get("", "seed", "") == "5");
  }
}

TEST_CASE("identical configs reproduce artifacts byte for byte") {
  TempDir dir("cli_determinism");
  write_fixture_data(dir);
  const std::string data =
      "[data]\nedges = " + dir.file("edges.csv") + "\nnodal = " + dir.file("nodal.csv") +
      "\ndyadic.dist = " + dir.file("dist.csv") + "\n";

  for (const std::string out : {"run_a", "run_b"}) {
    write_text_file(dir.file(out + ".cfg"),
                    "seed = 99\nout = " + dir.file(out) + "\n" + data +
                    "[ergm]\nterms = edges, mutual, edgecov(dist)\n"
                    "samples = 400\nloglik_points = 6\nloglik_draws = 200\n");
    REQUIRE(run({"fit-ergm", "--config", dir.file(out + ".cfg")}) == 0);
  }
  CHECK(slurp(dir.file("run_a/coefficients.csv")) == slurp(dir.file("run_b/coefficients.csv")));
  CHECK(slurp(dir.file("run_a/fit.json")) == slurp(dir.file("run_b/fit.json")));
  CHECK(slurp(dir.file("run_a/degeneracy.json")) == slurp(dir.file("run_b/degeneracy.json")));

  // a --seed flag overrides the config and lands in the echo
  write_text_file(dir.file("run_c.cfg"),
                  "seed = 99\nout = " + dir.file("run_c") + "\n" + data +
                  "[glm]\nterms = edges\n");
  REQUIRE(run({"fit-glm", "--config", dir.file("run_c.cfg"), "--seed", "123"}) == 0);
  const cli::RunConfig echoed = cli::load_config(dir.file("run_c/resolved.cfg"));
  CHECK(echoed.get("", "seed", "") == "123");

  // no seed anywhere: one is generated and echoed so the run can be replayed
  write_text_file(dir.file("run_d.cfg"),
                  "out = " + dir.file("run_d") + "\n" + data + "[glm]\nterms = edges\n");
  REQUIRE(run({"fit-glm", "--config", dir.file("run_d.cfg")}) == 0);
  CHECK(!cli::load_config(dir.file("run_d/resolved.cfg")).get("", "seed", "").empty());
}

TEST_CASE("statistical failures exit with code 2") {
  TempDir dir("cli_exit2");
  const int n = 6;
  // complete network: the logistic response is constant, a separated fit
  DirectedNetwork y(nitest::letter_labels(n));
  for_each_dyad(n, [&](int i, int j) { y.set_edge(i, j, true); });
  write_text_file(dir.file("edges.csv"), edge_list_csv(y));

  std::string err;
  write_text_file(dir.file("glm.cfg"),
                  "seed = 1\nout = " + dir.file("out_glm") + "\n[data]\nedges = " +
                  dir.file("edges.csv") + "\n[glm]\nterms = edges\n");
  CHECK(run({"fit-glm", "--config", dir.file("glm.cfg")}, nullptr, &err) == 2);
  // the failure is still recorded as an artifact
  CHECK(slurp(dir.file("out_glm/fit.json")).find("\"converged\": false") != std::string::npos);

  // the same degenerate data sinks the sampling-based fit too
  write_text_file(dir.file("ergm.cfg"),
                  "seed = 1\nout = " + dir.file("out_ergm") + "\n[data]\nedges = " +
                  dir.file("edges.csv") + "\n[ergm]\nterms = edges\nsamples = 200\n");
  CHECK(run({"fit-ergm", "--config", dir.file("ergm.cfg")}, nullptr, &err) == 2);
}

TEST_CASE("simulation without observed data matches the trivial model") {
  TempDir dir("cli_simulate");
  write_text_file(dir.file("sim.cfg"),
                  "seed = 777\nout = " + dir.file("out") + "\n[simulate]\n"
                  "terms = edges\ntheta = 0\nn = 3\ndraws = 400\ninit = empty\n");
  REQUIRE(run({"simulate", "--config", dir.file("sim.cfg")}) == 0);

  // theta = 0 makes each of the 6 possible edges a fair coin
  const CsvTable stats = read_csv(dir.file("out/sim_stats.csv"));
  REQUIRE(stats.header == std::vector<std::string>{"draw", "edges"});
  REQUIRE(stats.rows.size() == 400);
  double total = 0.0;
  for (const auto& row : stats.rows) total += parse_real(row[1], "sim_stats");
  CHECK(total / 400.0 == Approx(3.0).margin(0.35));

  // each simulated network is a loadable edge list; the shipped node list
  // restores isolated nodes that an edge list alone cannot carry
  REQUIRE(fs::exists(dir.file("out/sim_0001.csv")));
  REQUIRE(fs::exists(dir.file("out/sim_0400.csv")));
  const DirectedNetwork first =
      load_network(dir.file("out/sim_0001.csv"), dir.file("out/sim_nodes.txt"));
  CHECK(first.n() == 3);

  // write_networks = false suppresses the per-draw files
  write_text_file(dir.file("lean.cfg"),
                  "seed = 777\nout = " + dir.file("lean") + "\n[simulate]\n"
                  "terms = edges\ntheta = 0\nn = 3\ndraws = 50\ninit = empty\n"
                  "write_networks = false\n");
  REQUIRE(run({"simulate", "--config", dir.file("lean.cfg")}) == 0);
  CHECK(!fs::exists(dir.file("lean/sim_0001.csv")));
  CHECK(fs::exists(dir.file("lean/sim_stats.csv")));

  // mismatched theta length is an input error
  write_text_file(dir.file("bad.cfg"),
                  "seed = 1\nout = " + dir.file("bad") + "\n[simulate]\n"
                  "terms = edges\ntheta = 0, 1\nn = 3\n");
  CHECK(run({"simulate", "--config", dir.file("bad.cfg")}) == 1);
}

TEST_CASE("goodness of fit consumes fitted artifacts and reports curves") {
  TempDir dir("cli_gof");
  write_fixture_data(dir);
  const std::string data =
      "[data]\nedges = " + dir.file("edges.csv") + "\nnodal = " + dir.file("nodal.csv") +
      "\ndyadic.dist = " + dir.file("dist.csv") + "\n";

  write_text_file(dir.file("ergm.cfg"),
                  "seed = 15\nout = " + dir.file("fit") + "\n" + data +
                  "[ergm]\nterms = edges, edgecov(dist)\nsamples = 400\nloglik = false\n");
  REQUIRE(run({"fit-ergm", "--config", dir.file("ergm.cfg")}) == 0);

  write_text_file(dir.file("gof.cfg"),
                  "seed = 16\nout = " + dir.file("gof") + "\n" + data +
                  "[gof]\nmodel = ergm\nfit_dir = " + dir.file("fit") + "\nn_sim = 120\n");
  REQUIRE(run({"gof", "--config", dir.file("gof.cfg")}) == 0);

  const CsvTable gof = read_csv(dir.file("gof/gof.csv"));
  REQUIRE(gof.header ==
          std::vector<std::string>{"family", "bin", "observed", "q01", "q25", "q50", "q75",
                                   "q99", "min", "max"});
  bool saw_in_degree = false, saw_esp = false, saw_terms = false;
  for (const auto& row : gof.rows) {
    saw_in_degree = saw_in_degree || row[0] == "in_degree";
    saw_esp = saw_esp || row[0].rfind("esp_", 0) == 0;
    saw_terms = saw_terms || row[0] == "model_terms";
  }
  CHECK(saw_in_degree);
  CHECK(saw_esp);
  CHECK(saw_terms);

  const std::string gj = slurp(dir.file("gof/gof.json"));
  CHECK(gj.find("auc_roc") != std::string::npos);
  CHECK(gj.find("auc_pr") != std::string::npos);
  const CsvTable roc = read_csv(dir.file("gof/roc.csv"));
  REQUIRE(roc.header == std::vector<std::string>{"fpr", "tpr"});
  const CsvTable pr = read_csv(dir.file("gof/pr.csv"));
  REQUIRE(pr.header == std::vector<std::string>{"recall", "precision"});

  // reruns with the same seed are byte-identical
  write_text_file(dir.file("gof2.cfg"),
                  "seed = 16\nout = " + dir.file("gof2") + "\n" + data +
                  "[gof]\nmodel = ergm\nfit_dir = " + dir.file("fit") + "\nn_sim = 120\n");
  REQUIRE(run({"gof", "--config", dir.file("gof2.cfg")}) == 0);
  CHECK(slurp(dir.file("gof/gof.csv")) == slurp(dir.file("gof2/gof.csv")));

  // pointing at a directory without a fit is an input error
  write_text_file(dir.file("gof3.cfg"),
                  "seed = 16\nout = " + dir.file("gof3") + "\n" + data +
                  "[gof]\nmodel = ergm\nfit_dir = " + dir.file("nowhere") + "\nn_sim = 120\n");
  CHECK(run({"gof", "--config", dir.file("gof3.cfg")}) == 1);

  // unknown model name is an input error
  write_text_file(dir.file("gof4.cfg"),
                  "seed = 16\nout = " + dir.file("gof4") + "\n" + data +
                  "[gof]\nmodel = tea_leaves\nfit_dir = " + dir.file("fit") + "\nn_sim = 120\n");
  CHECK(run({"gof", "--config", dir.file("gof4.cfg")}) == 1);
}

TEST_CASE("latent-effect fits round-trip through their artifact directory") {
  TempDir dir("cli_ame");
  write_fixture_data(dir);
  const std::string data =
      "[data]\nedges = " + dir.file("edges.csv") + "\nnodal = " + dir.file("nodal.csv") +
      "\ndyadic.dist = " + dir.file("dist.csv") + "\n";

  write_text_file(dir.file("ame.cfg"),
                  "seed = 33\nout = " + dir.file("fit") + "\n" + data +
                  "[ame]\nsender = wealth\ndyadic = dist\nlatent_dim = 2\n"
                  "n_iter = 260\nburn_in = 60\nthin = 2\n");
  REQUIRE(run({"fit-ame", "--config", dir.file("ame.cfg")}) == 0);
  for (const std::string f : {"draws.csv", "summary.csv", "effects.csv", "effect_draws.csv",
                              "multiplicative.csv", "trace.json", "fit.json"})
    CHECK(fs::exists(dir.file("fit/" + f)));

  // reconstruct the posterior from disk and compare with a fresh in-process fit
  AmeSpec spec;
  spec.sender_covariates = {"wealth"};
  spec.dyadic_covariates = {"dist"};
  spec.latent_dim = 2;
  LoadWarnings warnings;
  const DirectedNetwork y = load_network(dir.file("edges.csv"), std::nullopt, &warnings);
  const CovariateSet cov = load_covariates(y, dir.file("nodal.csv"),
                                           {{"dist", dir.file("dist.csv")}});
  AmeMcmcConfig mcmc;
  mcmc.n_iter = 260;
  mcmc.burn_in = 60;
  mcmc.thin = 2;
  mcmc.seed = 33;
  const AmePosterior direct = fit_ame(spec, y, cov, mcmc);
  const AmePosterior loaded = cli::load_ame_posterior(dir.file("fit"), y);

  REQUIRE(loaded.draws.size() == direct.draws.size());
  REQUIRE(loaded.term_labels == direct.term_labels);
  auto exact = [](const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
    return p.rows() == q.rows() && p.cols() == q.cols() &&
           (p - q).cwiseAbs().maxCoeff() == 0.0;
  };
  for (std::size_t t = 0; t < direct.draws.size(); ++t) {
    // the decimal serialization round-trips every double exactly
    CHECK(exact(loaded.draws[t].theta, direct.draws[t].theta));
    CHECK(loaded.draws[t].rho == direct.draws[t].rho);
    CHECK(loaded.draws[t].sigma2_a == direct.draws[t].sigma2_a);
    CHECK(exact(loaded.draws[t].a, direct.draws[t].a));
    CHECK(exact(loaded.draws[t].U, direct.draws[t].U));
    CHECK(exact(loaded.draws[t].V, direct.draws[t].V));
  }
  CHECK((loaded.mean_uv - direct.mean_uv).lpNorm<Eigen::Infinity>() < 1e-12);

  // the reconstructed posterior powers the goodness-of-fit command
  write_text_file(dir.file("gof.cfg"),
                  "seed = 34\nout = " + dir.file("gof") + "\n" + data +
                  "[gof]\nmodel = ame\nfit_dir = " + dir.file("fit") + "\nn_sim = 110\n");
  REQUIRE(run({"gof", "--config", dir.file("gof.cfg")}) == 0);
  const CsvTable gof = read_csv(dir.file("gof/gof.csv"));
  REQUIRE(gof.rows.size() == 4);
  for (const auto& row : gof.rows) CHECK(row[0] == "network_diagnostics");

  // a different network is rejected: the artifacts belong to one data set
  DirectedNetwork other(nitest::letter_labels(5));
  CHECK_THROWS_AS(cli::load_ame_posterior(dir.file("fit"), other), validation_error);
}

TEST_CASE("the self-check command reports oracle agreement") {
  std::string out;
  REQUIRE(run({"verify"}, &out) == 0);
  CHECK(out.find("all checks passed") != std::string::npos);
  CHECK(out.find("FAIL") == std::string::npos);
  // six independent checks, each reported on its own line
  CHECK(std::count(out.begin(), out.end(), '\n') == 7);

  // the corruption hook proves the checks can actually fail
  ::setenv("NETINFER_VERIFY_CORRUPT", "1", 1);
  std::string corrupted;
  const int code = run({"verify"}, &corrupted);
  ::unsetenv("NETINFER_VERIFY_CORRUPT");
  CHECK(code == 1);
  CHECK(corrupted.find("FAIL") != std::string::npos);

  // with an output directory the table is also written to disk
  TempDir dir("cli_verify");
  std::string again;
  REQUIRE(run({"verify", "--out", dir.file("out")}, &again) == 0);
  CHECK(slurp(dir.file("out/verify.txt")) == again);
}
