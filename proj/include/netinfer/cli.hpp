#pragma once

// Command-line front end: config-driven fitting, simulation, goodness of fit,
// and a self-check command, each writing reproducible artifact directories.
//
// Conventions shared by all subcommands:
//   - one INI-style config file; --seed/--out/--threads flags override it
//   - the resolved configuration (seed made explicit) is echoed to
//     <out>/resolved.cfg before any heavy work
//   - exit 0: success; exit 1: input or validation problem; exit 2:
//     statistical non-convergence, with artifacts still written
//   - artifacts carry no timestamps, so a rerun with the same resolved
//     config reproduces every output byte for byte

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "netinfer/ame.hpp"
#include "netinfer/csv.hpp"
#include "netinfer/ergm.hpp"
#include "netinfer/glm.hpp"
#include "netinfer/gof.hpp"
#include "netinfer/network.hpp"
#include "netinfer/oracle.hpp"
#include "netinfer/stats.hpp"
#include "netinfer/terms.hpp"

namespace netinfer::cli {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config file handling: flat key = value lines grouped into [sections]; keys
// before any section header are global.

struct RunConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) > 0;
  }
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    const auto s = sections.find(section);
    if (s == sections.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }
  std::string require(const std::string& section, const std::string& key) const {
    if (!has(section, key))
      throw validation_error("config is missing required key '" + key + "' in section [" +
                             section + "]");
    return sections.at(section).at(key);
  }
  void set(const std::string& section, const std::string& key, const std::string& value) {
    sections[section][key] = value;
  }
};

inline RunConfig parse_config_text(const std::string& text, const std::string& context) {
  RunConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw validation_error(context + ":" + std::to_string(lineno) + ": malformed section");
      section = trim(t.substr(1, t.size() - 2));
      cfg.sections[section];  // a section may legitimately stay empty
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw validation_error(context + ":" + std::to_string(lineno) +
                             ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw validation_error(context + ":" + std::to_string(lineno) + ": empty key");
    cfg.sections[section][key] = value;
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

// Deterministic echo: global keys first, then sections and keys sorted.
inline std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  const auto global = cfg.sections.find("");
  if (global != cfg.sections.end())
    for (const auto& [k, v] : global->second) out += k + " = " + v + "\n";
  for (const auto& [name, keys] : cfg.sections) {
    if (name.empty()) continue;
    out += "\n[" + name + "]\n";
    for (const auto& [k, v] : keys) out += k + " = " + v + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small parsing helpers.

inline bool parse_bool(const std::string& v, const std::string& context) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw validation_error(context + ": expected a boolean, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline Eigen::VectorXd parse_real_list(const std::string& v, const std::string& context) {
  const std::vector<std::string> parts = split_list(v);
  Eigen::VectorXd out(static_cast<long>(parts.size()));
  for (std::size_t k = 0; k < parts.size(); ++k)
    out[static_cast<long>(k)] = parse_real(parts[k], context);
  return out;
}

// ---------------------------------------------------------------------------
// Shared run plumbing.

struct RunContext {
  RunConfig cfg;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int threads = 1;

  std::string path(const std::string& file) const { return (out_dir / file).string(); }
};

struct FlagOverrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

// Resolve config + flags into a run context, create the output directory,
// and echo the resolved configuration (with the seed always explicit).
inline RunContext prepare_run(const FlagOverrides& flags) {
  RunContext ctx;
  ctx.cfg = load_config(flags.config_path);
  if (flags.seed) ctx.cfg.set("", "seed", std::to_string(*flags.seed));
  if (flags.out) ctx.cfg.set("", "out", *flags.out);
  if (flags.threads) ctx.cfg.set("", "threads", std::to_string(*flags.threads));

  if (!ctx.cfg.has("", "seed")) {
    std::random_device rd;
    const std::uint64_t generated =
        (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
    ctx.cfg.set("", "seed", std::to_string(generated));
  }
  ctx.seed = static_cast<std::uint64_t>(
      std::stoull(ctx.cfg.get("", "seed", "0")));
  ctx.threads = static_cast<int>(parse_long(ctx.cfg.get("", "threads", "1"), "threads"));
  if (ctx.threads < 1) throw validation_error("threads must be >= 1");
  ctx.cfg.set("", "threads", std::to_string(ctx.threads));

  if (!ctx.cfg.has("", "out"))
    throw validation_error("no output directory: set 'out' in the config or pass --out");
  ctx.out_dir = ctx.cfg.get("", "out", "");
  std::filesystem::create_directories(ctx.out_dir);
  write_text_file(ctx.path("resolved.cfg"), serialize_config(ctx.cfg));
  return ctx;
}

struct LoadedData {
  DirectedNetwork y;
  CovariateSet cov;
  LoadWarnings warnings;
};

inline LoadedData load_data(const RunConfig& cfg) {
  if (!cfg.has("data", "edges"))
    throw validation_error("config needs [data] edges = <edge list csv>");
  LoadedData data;
  std::optional<std::string> nodes;
  if (cfg.has("data", "nodes")) nodes = cfg.get("data", "nodes", "");
  data.y = load_network(cfg.get("data", "edges", ""), nodes, &data.warnings);

  std::optional<std::string> nodal;
  if (cfg.has("data", "nodal")) nodal = cfg.get("data", "nodal", "");
  std::map<std::string, std::string> dyadic;
  const auto section = cfg.sections.find("data");
  if (section != cfg.sections.end()) {
    for (const auto& [key, value] : section->second) {
      if (key.rfind("dyadic.", 0) == 0) {
        const std::string name = key.substr(7);
        if (name.empty()) throw validation_error("dyadic covariate key needs a name: " + key);
        dyadic[name] = value;
      }
    }
  }
  data.cov = load_covariates(data.y, nodal, dyadic);
  return data;
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (long k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

inline json gof_report_json(const GofReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"family", r.family},
                    {"bin", r.bin},
                    {"observed", r.observed},
                    {"min", r.sim_min},
                    {"q01", r.q01},
                    {"q25", r.q25},
                    {"q50", r.q50},
                    {"q75", r.q75},
                    {"q99", r.q99},
                    {"max", r.sim_max},
                    {"outside_band", r.outside_band}});
  }
  return {{"n_simulations", report.n_simulations},
          {"flagged", report.flagged()},
          {"rows", rows}};
}

inline json degeneracy_json(const DegeneracyReport& report) {
  json terms = json::array();
  for (const auto& t : report.terms)
    terms.push_back({{"term", t.term},
                     {"observed", t.observed},
                     {"lower", t.lo},
                     {"upper", t.hi},
                     {"flagged", t.flagged}});
  return {{"n_sim", report.n_sim},
          {"mean_density", report.mean_density},
          {"absorbed_empty", report.absorbed_empty},
          {"absorbed_full", report.absorbed_full},
          {"any_flag", report.any_flag()},
          {"terms", terms}};
}

// ---------------------------------------------------------------------------
// fit-ergm

inline SamplerConfig sampler_from_config(const RunConfig& cfg, const std::string& section,
                                         std::uint64_t seed, bool have_observed) {
  SamplerConfig sampler;
  sampler.seed = seed;
  sampler.burn_in = parse_long(cfg.get(section, "burn_in", "-1"), section + ".burn_in");
  sampler.interval = parse_long(cfg.get(section, "interval", "-1"), section + ".interval");
  sampler.n_samples =
      static_cast<int>(parse_long(cfg.get(section, "samples", "1024"), section + ".samples"));
  const std::string init =
      cfg.get(section, "init", have_observed ? "observed" : "empty");
  if (init == "observed") {
    if (!have_observed)
      throw validation_error(section + ".init = observed needs [data] edges");
    sampler.init.kind = SamplerInit::Kind::Observed;
  } else if (init == "empty") {
    sampler.init.kind = SamplerInit::Kind::Empty;
  } else if (init == "random") {
    sampler.init.kind = SamplerInit::Kind::Random;
    sampler.init.density =
        parse_real(cfg.get(section, "density", "0.5"), section + ".density");
  } else {
    throw validation_error(section + ".init must be observed, empty, or random");
  }
  return sampler;
}

inline json ergm_fit_json(const ErgmFit& fit, const std::vector<std::string>& node_labels) {
  return {{"command", "fit-ergm"},
          {"converged", fit.converged},
          {"terms", fit.term_labels},
          {"theta", vector_json(fit.theta)},
          {"std_errors", vector_json(fit.std_errors)},
          {"mc_std_errors", vector_json(fit.mc_std_errors)},
          {"z", vector_json(fit.z)},
          {"p", vector_json(fit.p_values)},
          {"vcov", matrix_json(fit.vcov)},
          {"mple_start", vector_json(fit.mple_start)},
          {"log_lik", fit.log_lik},
          {"log_lik_mc_se", fit.log_lik_mc_se},
          {"aic", fit.aic},
          {"bic", fit.bic},
          {"iterations", fit.mcmle_iterations},
          {"inner_grad_norm", fit.inner_grad_norm},
          {"acceptance", fit.acceptance},
          {"seed", fit.seed},
          {"n_nodes", fit.n_nodes},
          {"nodes", node_labels}};
}

inline int cmd_fit_ergm(const RunContext& ctx, std::ostream& err) {
  const LoadedData data = load_data(ctx.cfg);
  const ModelSpec spec = parse_model_terms(ctx.cfg.require("ergm", "terms"));

  McmleOptions options;
  options.sampler = sampler_from_config(ctx.cfg, "ergm", ctx.seed, true);
  options.max_outer =
      static_cast<int>(parse_long(ctx.cfg.get("ergm", "max_iter", "20"), "ergm.max_iter"));
  options.tol = parse_real(ctx.cfg.get("ergm", "tol", "0.001"), "ergm.tol");
  options.step_cap = parse_real(ctx.cfg.get("ergm", "step_cap", "0.5"), "ergm.step_cap");
  options.n_chains =
      static_cast<int>(parse_long(ctx.cfg.get("ergm", "chains", "1"), "ergm.chains"));
  options.threads = ctx.threads;
  options.compute_loglik = parse_bool(ctx.cfg.get("ergm", "loglik", "true"), "ergm.loglik");
  options.loglik_points = static_cast<int>(
      parse_long(ctx.cfg.get("ergm", "loglik_points", "20"), "ergm.loglik_points"));
  options.loglik_draws = static_cast<int>(
      parse_long(ctx.cfg.get("ergm", "loglik_draws", "1000"), "ergm.loglik_draws"));
  if (ctx.cfg.has("ergm", "theta_start")) {
    Eigen::VectorXd start =
        parse_real_list(ctx.cfg.get("ergm", "theta_start", ""), "ergm.theta_start");
    if (start.size() != static_cast<long>(spec.size()))
      throw validation_error("ergm.theta_start length does not match the term list");
    options.theta_start = std::move(start);
  }

  try {
    const ErgmFit fit = fit_mcmle(spec, data.y, data.cov, options);
    write_text_file(ctx.path("coefficients.csv"), ergm_coefficients_csv(fit));
    write_json_file(ctx.path("fit.json"), ergm_fit_json(fit, data.y.node_labels()));
    write_json_file(ctx.path("degeneracy.json"), degeneracy_json(fit.degeneracy));
    if (!fit.converged) {
      err << "fit-ergm: estimation did not converge in " << fit.mcmle_iterations
          << " outer iterations; artifacts written with converged=false\n";
      return 2;
    }
    return 0;
  } catch (const hull_violation_error& e) {
    err << "fit-ergm: " << e.what() << "\n";
    json diag = {{"command", "fit-ergm"},
                 {"converged", false},
                 {"error", e.what()},
                 {"violating_terms", e.violating_terms},
                 {"at_iteration", e.at_iteration}};
    write_json_file(ctx.path("fit.json"), diag);
    return 2;
  }
}

// ---------------------------------------------------------------------------
// fit-glm

inline int cmd_fit_glm(const RunContext& ctx, std::ostream& err) {
  const LoadedData data = load_data(ctx.cfg);
  const ModelSpec spec = parse_model_terms(ctx.cfg.require("glm", "terms"));
  const std::string link_name = ctx.cfg.get("glm", "link", "logit");
  GlmLink link;
  if (link_name == "logit")
    link = GlmLink::Logit;
  else if (link_name == "probit")
    link = GlmLink::Probit;
  else
    throw validation_error("glm.link must be logit or probit");

  spec.validate(data.y, data.cov);
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  mple_design(spec, data.y, data.cov, design, response);
  std::vector<std::string> labels;
  for (const auto& t : spec.terms) labels.push_back(t.label());

  try {
    const GlmFit fit = fit_glm(design, response, link);
    write_text_file(ctx.path("coefficients.csv"), glm_coefficients_csv(fit, labels));
    write_json_file(ctx.path("fit.json"),
                    json{{"command", "fit-glm"},
                         {"link", link_name},
                         {"converged", true},
                         {"terms", labels},
                         {"coef", vector_json(fit.coef)},
                         {"std_errors", vector_json(fit.std_errors)},
                         {"z", vector_json(fit.z)},
                         {"p", vector_json(fit.p)},
                         {"log_lik", fit.log_lik},
                         {"aic", fit.aic},
                         {"bic", fit.bic},
                         {"iterations", fit.iterations},
                         {"n_dyads", design.rows()},
                         {"nodes", data.y.node_labels()}});
    return 0;
  } catch (const separation_error& e) {
    err << "fit-glm: " << e.what() << "\n";
    write_json_file(ctx.path("fit.json"), json{{"command", "fit-glm"},
                                               {"link", link_name},
                                               {"converged", false},
                                               {"error", e.what()}});
    return 2;
  }
}

// ---------------------------------------------------------------------------
// fit-ame

inline AmeSpec ame_spec_from_config(const RunConfig& cfg) {
  AmeSpec spec;
  spec.sender_covariates = split_list(cfg.get("ame", "sender", ""));
  spec.receiver_covariates = split_list(cfg.get("ame", "receiver", ""));
  spec.dyadic_covariates = split_list(cfg.get("ame", "dyadic", ""));
  spec.latent_dim =
      static_cast<int>(parse_long(cfg.get("ame", "latent_dim", "0"), "ame.latent_dim"));
  spec.include_additive = parse_bool(cfg.get("ame", "additive", "true"), "ame.additive");
  spec.include_dyadic_correlation =
      parse_bool(cfg.get("ame", "correlation", "true"), "ame.correlation");
  spec.intercept = parse_bool(cfg.get("ame", "intercept", "true"), "ame.intercept");
  return spec;
}

inline json ame_spec_json(const AmeSpec& spec) {
  return {{"sender", spec.sender_covariates},
          {"receiver", spec.receiver_covariates},
          {"dyadic", spec.dyadic_covariates},
          {"latent_dim", spec.latent_dim},
          {"additive", spec.include_additive},
          {"correlation", spec.include_dyadic_correlation},
          {"intercept", spec.intercept}};
}

inline int cmd_fit_ame(const RunContext& ctx, std::ostream&) {
  const LoadedData data = load_data(ctx.cfg);
  const AmeSpec spec = ame_spec_from_config(ctx.cfg);

  AmeMcmcConfig mcmc;
  mcmc.n_iter =
      static_cast<int>(parse_long(ctx.cfg.get("ame", "n_iter", "10000"), "ame.n_iter"));
  mcmc.burn_in =
      static_cast<int>(parse_long(ctx.cfg.get("ame", "burn_in", "5000"), "ame.burn_in"));
  mcmc.thin = static_cast<int>(parse_long(ctx.cfg.get("ame", "thin", "5"), "ame.thin"));
  mcmc.seed = ctx.seed;

  const AmePosterior post = fit_ame(spec, data.y, data.cov, mcmc);

  write_text_file(ctx.path("draws.csv"), ame_draws_csv(post));
  write_text_file(ctx.path("summary.csv"), ame_summary_csv(post));
  write_text_file(ctx.path("effects.csv"), ame_effects_csv(post));
  write_text_file(ctx.path("effect_draws.csv"), ame_effect_draws_csv(post));
  write_text_file(ctx.path("multiplicative.csv"), ame_multiplicative_csv(post));

  json trace;
  if (post.draws.size() >= 100) {
    trace = json::array();
    for (const auto& d : trace_diagnostics(post))
      trace.push_back({{"name", d.name},
                       {"ess", d.ess},
                       {"split_rhat", d.split_rhat},
                       {"trend_flag", d.trend_flag}});
  } else {
    trace = {{"error", "trace diagnostics need at least 100 retained draws, got " +
                           std::to_string(post.draws.size())}};
  }
  write_json_file(ctx.path("trace.json"), trace);

  json summaries = json::array();
  for (const auto& s : post.summaries())
    summaries.push_back({{"name", s.name},
                         {"mean", s.mean},
                         {"sd", s.sd},
                         {"q2.5", s.q025},
                         {"q97.5", s.q975},
                         {"ess", s.ess}});
  write_json_file(ctx.path("fit.json"),
                  json{{"command", "fit-ame"},
                       {"spec", ame_spec_json(spec)},
                       {"terms", post.term_labels},
                       {"nodes", post.node_labels},
                       {"n_iter", post.n_iter},
                       {"burn_in", post.burn_in},
                       {"thin", post.thin},
                       {"seed", post.seed},
                       {"n_draws", post.draws.size()},
                       {"rho_acceptance", post.rho_acceptance},
                       {"summaries", summaries}});
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const RunContext& ctx, std::ostream&) {
  const ModelSpec spec = parse_model_terms(ctx.cfg.require("simulate", "terms"));
  const Eigen::VectorXd theta =
      parse_real_list(ctx.cfg.require("simulate", "theta"), "simulate.theta");
  if (theta.size() != static_cast<long>(spec.size()))
    throw validation_error("simulate.theta length does not match the term list");

  // canvas: observed data when given, otherwise an empty n-node network
  DirectedNetwork canvas;
  CovariateSet cov;
  const bool have_data = ctx.cfg.has("data", "edges");
  if (have_data) {
    LoadedData data = load_data(ctx.cfg);
    canvas = std::move(data.y);
    cov = std::move(data.cov);
  } else {
    const int n =
        static_cast<int>(parse_long(ctx.cfg.require("simulate", "n"), "simulate.n"));
    if (n < 2) throw validation_error("simulate.n must be >= 2");
    std::vector<std::string> labels(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
      labels[static_cast<std::size_t>(k)] = "n" + std::to_string(k + 1);
    canvas = DirectedNetwork(labels);
    cov.n = n;
  }

  SamplerConfig sampler = sampler_from_config(ctx.cfg, "simulate", ctx.seed, have_data);
  sampler.n_samples =
      static_cast<int>(parse_long(ctx.cfg.get("simulate", "draws", "100"), "simulate.draws"));
  sampler.keep_networks = true;

  const SampleBatch batch =
      sample_networks(spec, cov, theta, canvas, sampler, 1, ctx.threads).front();

  std::string stats_csv = "draw";
  for (const auto& t : spec.terms) stats_csv += "," + t.label();
  stats_csv += "\n";
  for (long r = 0; r < batch.stats.rows(); ++r) {
    stats_csv += std::to_string(r + 1);
    for (long c = 0; c < batch.stats.cols(); ++c)
      stats_csv += "," + format_real(batch.stats(r, c));
    stats_csv += "\n";
  }
  write_text_file(ctx.path("sim_stats.csv"), stats_csv);

  if (parse_bool(ctx.cfg.get("simulate", "write_networks", "true"),
                 "simulate.write_networks")) {
    // edge lists drop isolated nodes, so ship the node list alongside them
    std::string node_lines;
    for (const auto& label : canvas.node_labels()) node_lines += label + "\n";
    write_text_file(ctx.path("sim_nodes.txt"), node_lines);
    for (std::size_t k = 0; k < batch.networks.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "sim_%04zu.csv", k + 1);
      write_text_file(ctx.path(name), edge_list_csv(batch.networks[k]));
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gof

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

// Rebuild the posterior of a previous fit-ame run from its artifacts.
inline AmePosterior load_ame_posterior(const std::string& fit_dir,
                                       const DirectedNetwork& y) {
  namespace fs = std::filesystem;
  const json fit = read_json_file((fs::path(fit_dir) / "fit.json").string());
  if (fit.value("command", "") != "fit-ame")
    throw validation_error("gof.fit_dir does not contain a fit-ame run: " + fit_dir);

  AmePosterior post;
  const json& spec = fit.at("spec");
  post.spec.sender_covariates = spec.at("sender").get<std::vector<std::string>>();
  post.spec.receiver_covariates = spec.at("receiver").get<std::vector<std::string>>();
  post.spec.dyadic_covariates = spec.at("dyadic").get<std::vector<std::string>>();
  post.spec.latent_dim = spec.at("latent_dim").get<int>();
  post.spec.include_additive = spec.at("additive").get<bool>();
  post.spec.include_dyadic_correlation = spec.at("correlation").get<bool>();
  post.spec.intercept = spec.at("intercept").get<bool>();
  post.term_labels = fit.at("terms").get<std::vector<std::string>>();
  post.node_labels = fit.at("nodes").get<std::vector<std::string>>();
  post.n_iter = fit.at("n_iter").get<int>();
  post.burn_in = fit.at("burn_in").get<int>();
  post.thin = fit.at("thin").get<int>();
  post.seed = fit.at("seed").get<std::uint64_t>();

  if (post.node_labels != y.node_labels())
    throw validation_error(
        "the [data] network's node list does not match the fitted run in " + fit_dir);

  const int n = post.n();
  const int d = post.spec.latent_dim;
  const long p = static_cast<long>(post.term_labels.size());

  const CsvTable draws = read_csv((fs::path(fit_dir) / "draws.csv").string());
  if (draws.header.size() != static_cast<std::size_t>(p) + 5)
    throw validation_error("draws.csv does not match the fitted term list");
  const CsvTable effects = read_csv((fs::path(fit_dir) / "effect_draws.csv").string());
  if (effects.rows.size() != draws.rows.size() * static_cast<std::size_t>(n))
    throw validation_error("effect_draws.csv row count does not match draws.csv");
  if (effects.header.size() != static_cast<std::size_t>(4 + 2 * d))
    throw validation_error("effect_draws.csv does not match the fitted latent dimension");

  post.mean_a = Eigen::VectorXd::Zero(n);
  post.mean_b = Eigen::VectorXd::Zero(n);
  post.mean_uv = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t t = 0; t < draws.rows.size(); ++t) {
    const auto& row = draws.rows[t];
    AmeDraw draw;
    draw.theta.resize(p);
    for (long k = 0; k < p; ++k)
      draw.theta[k] = parse_real(row[static_cast<std::size_t>(k) + 1], "draws.csv");
    draw.sigma2_a = parse_real(row[static_cast<std::size_t>(p) + 1], "draws.csv");
    draw.sigma2_b = parse_real(row[static_cast<std::size_t>(p) + 2], "draws.csv");
    draw.sigma_ab = parse_real(row[static_cast<std::size_t>(p) + 3], "draws.csv");
    draw.rho = parse_real(row[static_cast<std::size_t>(p) + 4], "draws.csv");
    draw.a.resize(n);
    draw.b.resize(n);
    draw.U.resize(n, d);
    draw.V.resize(n, d);
    for (int i = 0; i < n; ++i) {
      const auto& e = effects.rows[t * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
      if (e[0] != row[0] || e[1] != post.node_labels[static_cast<std::size_t>(i)])
        throw validation_error("effect_draws.csv is out of step with draws.csv");
      draw.a[i] = parse_real(e[2], "effect_draws.csv");
      draw.b[i] = parse_real(e[3], "effect_draws.csv");
      for (int k = 0; k < d; ++k) {
        draw.U(i, k) = parse_real(e[static_cast<std::size_t>(4 + k)], "effect_draws.csv");
        draw.V(i, k) = parse_real(e[static_cast<std::size_t>(4 + d + k)], "effect_draws.csv");
      }
    }
    post.mean_a += draw.a;
    post.mean_b += draw.b;
    post.mean_uv.noalias() += draw.U * draw.V.transpose();
    post.draws.push_back(std::move(draw));
  }
  if (post.draws.empty()) throw validation_error("draws.csv holds no draws");
  const double m = static_cast<double>(post.draws.size());
  post.mean_a /= m;
  post.mean_b /= m;
  post.mean_uv /= m;
  return post;
}

inline int cmd_gof(const RunContext& ctx, std::ostream&) {
  const std::string model = ctx.cfg.require("gof", "model");
  const int n_sim =
      static_cast<int>(parse_long(ctx.cfg.get("gof", "n_sim", "200"), "gof.n_sim"));
  const std::string fit_dir = ctx.cfg.require("gof", "fit_dir");
  const LoadedData data = load_data(ctx.cfg);

  GofReport report;
  std::vector<double> scores;
  if (model == "ergm") {
    const json fit = read_json_file((std::filesystem::path(fit_dir) / "fit.json").string());
    if (fit.value("command", "") != "fit-ergm")
      throw validation_error("gof.fit_dir does not contain a fit-ergm run: " + fit_dir);
    if (!fit.value("converged", false))
      throw validation_error("gof needs a converged fit, but " + fit_dir +
                             " records converged=false");
    std::string grammar;
    for (const auto& t : fit.at("terms")) {
      if (!grammar.empty()) grammar += ",";
      grammar += t.get<std::string>();
    }
    const ModelSpec spec = parse_model_terms(grammar);
    Eigen::VectorXd theta(static_cast<long>(spec.size()));
    const json& tj = fit.at("theta");
    if (tj.size() != spec.size())
      throw validation_error("fit.json theta length does not match its term list");
    for (std::size_t k = 0; k < spec.size(); ++k)
      theta[static_cast<long>(k)] = tj[k].get<double>();

    report = gof_ergm(spec, theta, data.y, data.cov, n_sim, ctx.seed, ctx.threads);
    scores = ergm_conditional_scores(spec, theta, data.y, data.cov);
  } else if (model == "ame") {
    const AmePosterior post = load_ame_posterior(fit_dir, data.y);
    report = gof_ame(post, data.y, data.cov, n_sim, ctx.seed);
    const Eigen::MatrixXd prob = predict_ame(post, data.cov);
    scores.resize(static_cast<std::size_t>(dyad_count(data.y.n())));
    for_each_dyad(data.y.n(), [&](int i, int j) {
      scores[static_cast<std::size_t>(dyad_rank(data.y.n(), i, j))] = prob(i, j);
    });
  } else {
    throw validation_error("gof.model must be ergm or ame");
  }

  const CurveReport curve = curves(edge_labels(data.y), scores);
  write_text_file(ctx.path("gof.csv"), gof_csv(report));
  json gj = gof_report_json(report);
  gj["model"] = model;
  gj["auc_roc"] = curve.auc_roc;
  gj["auc_pr"] = curve.auc_pr;
  write_json_file(ctx.path("gof.json"), gj);
  write_text_file(ctx.path("roc.csv"), roc_csv(curve));
  write_text_file(ctx.path("pr.csv"), pr_csv(curve));
  return 0;
}

// ---------------------------------------------------------------------------
// verify: oracle agreement suite on built-in fixtures.

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

inline std::vector<VerifyCheck> run_verify_checks() {
  std::vector<VerifyCheck> checks;
  const bool corrupt = []() {
    const char* v = std::getenv("NETINFER_VERIFY_CORRUPT");
    return v != nullptr && *v != '\0';
  }();

  auto report = [&](const std::string& name, double worst, double tol) {
    VerifyCheck c;
    c.name = name;
    c.pass = std::isfinite(worst) && worst <= tol;
    char buf[64];
    std::snprintf(buf, sizeof buf, "max deviation %.3e (tolerance %.1e)", worst, tol);
    c.detail = buf;
    checks.push_back(std::move(c));
  };

  // fixture: a deterministic 8-node network with one nodal and one dyadic
  // covariate, exercising every statistic kind
  Rng rng(20260821);
  const int n = 8;
  std::vector<std::string> labels;
  for (int k = 0; k < n; ++k) labels.push_back("v" + std::to_string(k + 1));
  DirectedNetwork y(labels);
  for_each_dyad(n, [&](int i, int j) {
    if (rng.runif() < 0.35) y.set_edge(i, j, true);
  });
  CovariateSet cov;
  cov.n = n;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = rng.rnorm();
  cov.nodal["x"] = x;
  std::vector<double> w(static_cast<std::size_t>(n) * n, 0.0);
  for_each_dyad(n, [&](int i, int j) {
    w[static_cast<std::size_t>(i) * n + j] = rng.rnorm();
  });
  cov.dyadic["w"] = w;
  const ModelSpec spec = parse_model_terms(
      "edges,mutual,nodeocov(x),nodeicov(x),edgecov(w),absdiff(x),gwidegree,gwodegree,"
      "gwesp(otp),gwesp(isp),gwesp(osp),gwesp(itp),idegree(2),odegree(0)");

  {
    StatVector computed = eval_stats(spec, y, cov);
    if (corrupt) computed[0] += 1e-3;  // test hook: prove the checks can fail
    const StatVector reference = oracle::brute_stats(spec, y, cov);
    report("statistic evaluation vs brute-force recount",
           (computed - reference).lpNorm<Eigen::Infinity>(), 1e-9);
  }
  {
    ChangeStatContext ctx(spec, y, cov);
    double worst = 0.0;
    for_each_dyad(n, [&](int i, int j) {
      const StatVector fast = ctx.change(y, i, j);
      DirectedNetwork on = y, off = y;
      on.set_edge(i, j, true);
      off.set_edge(i, j, false);
      const StatVector slow = oracle::brute_stats(spec, on, cov) -
                              StatVector(oracle::brute_stats(spec, off, cov));
      worst = std::max(worst, (fast - slow).lpNorm<Eigen::Infinity>());
    });
    report("change statistics vs toggle-difference recount", worst, 1e-9);
  }
  {
    // exact enumeration against direct expectation over all 3-node networks
    ModelSpec small;
    small.terms = {StatTerm::edges(), StatTerm::mutual()};
    Eigen::VectorXd theta(2);
    theta << -0.4, 0.8;
    const std::vector<std::string> labels3 = {"a", "b", "c"};
    CovariateSet cov3;
    cov3.n = 3;
    const ExactModel model = enumerate_exact(small, cov3, theta, labels3, true);
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(2);
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < 64; ++mask) {
      DirectedNetwork net(labels3);
      for_each_dyad(3, [&](int i, int j) {
        if (mask & (1u << dyad_rank(3, i, j))) net.set_edge(i, j, true);
      });
      const double pr = exact_probability(model, mask);
      total += pr;
      expect += pr * oracle::brute_stats(small, net, cov3);
    }
    const double worst = std::max((expect - model.expected_stats).lpNorm<Eigen::Infinity>(),
                                  std::fabs(total - 1.0));
    report("exact enumeration vs direct expectation", worst, 1e-9);
  }
  {
    // maximum likelihood vs an independent reweighted least squares solver
    Rng grng(7);
    const long rows = 300, p = 3;
    Eigen::MatrixXd design(rows, p);
    Eigen::VectorXd resp(rows);
    for (long r = 0; r < rows; ++r) {
      design(r, 0) = 1.0;
      design(r, 1) = grng.rnorm();
      design(r, 2) = grng.rnorm();
      const double eta = 0.3 * design(r, 1) - 0.6 * design(r, 2);
      resp[r] = grng.runif() < logistic(eta) ? 1.0 : 0.0;
    }
    double worst = 0.0;
    worst = std::max(worst, (fit_glm(design, resp, GlmLink::Logit).coef -
                             oracle::glm_irls(design, resp, "logit"))
                                .lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (fit_glm(design, resp, GlmLink::Probit).coef -
                             oracle::glm_irls(design, resp, "probit"))
                                .lpNorm<Eigen::Infinity>());
    report("likelihood maximization vs reweighted least squares", worst, 1e-6);
  }
  {
    // threshold-sweep curve area vs exhaustive pair counting, ties included
    Rng crng(11);
    std::vector<int> lab(200);
    std::vector<double> sc(200);
    for (std::size_t k = 0; k < lab.size(); ++k) {
      lab[k] = crng.runif() < 0.4 ? 1 : 0;
      sc[k] = std::floor(crng.runif() * 9.0) / 9.0;
    }
    lab[0] = 1;
    lab[1] = 0;
    const double del = std::fabs(curves(lab, sc).auc_roc - oracle::pair_auc(lab, sc));
    report("curve area vs pair-counting area", del, 0.0);
  }
  {
    // sampler long-run mean vs the enumerated expectation
    ModelSpec small;
    small.terms = {StatTerm::edges()};
    Eigen::VectorXd theta(1);
    theta << 0.3;
    const std::vector<std::string> labels3 = {"a", "b", "c"};
    CovariateSet cov3;
    cov3.n = 3;
    const ExactModel model = enumerate_exact(small, cov3, theta, labels3);
    SamplerConfig config;
    config.seed = 99;
    config.n_samples = 4000;
    config.init.kind = SamplerInit::Kind::Empty;
    const SampleBatch batch =
        sample_networks(small, cov3, theta, DirectedNetwork(labels3), config).front();
    const double mean_edges = batch.stats.col(0).mean();
    // crude bound: 4 sigma of the per-draw spread, draws are near-independent
    const double sd = std::sqrt((batch.stats.col(0).array() - mean_edges).square().mean());
    const double bound = 4.0 * sd / std::sqrt(static_cast<double>(config.n_samples));
    report("sampler mean vs enumerated expectation",
           std::fabs(mean_edges - model.expected_stats[0]), std::max(bound, 1e-12));
  }
  return checks;
}

inline int cmd_verify(const std::optional<RunContext>& ctx, std::ostream& out,
                      std::ostream&) {
  const std::vector<VerifyCheck> checks = run_verify_checks();
  std::string table;
  bool all_pass = true;
  for (const auto& c : checks) {
    table += (c.pass ? "pass  " : "FAIL  ") + c.name + " — " + c.detail + "\n";
    all_pass = all_pass && c.pass;
  }
  table += all_pass ? "verify: all checks passed\n" : "verify: at least one check FAILED\n";
  out << table;
  if (ctx) write_text_file(ctx->path("verify.txt"), table);
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Entry point shared by the binary and the test suite.

inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"network inference: exponential random graph and additive/"
               "multiplicative effects models"};
  app.require_subcommand(1);

  struct SubFlags {
    CLI::App* sub = nullptr;
    FlagOverrides flags;
  };
  const std::vector<std::string> names = {"fit-ergm", "fit-glm", "fit-ame",
                                          "simulate", "gof",     "verify"};
  std::map<std::string, SubFlags> subs;
  for (const auto& name : names) {
    SubFlags& sf = subs[name];  // map nodes are stable, safe to bind into
    sf.sub = app.add_subcommand(name, "");
    auto* copt = sf.sub->add_option("--config", sf.flags.config_path,
                                    "path to the run configuration file");
    if (name != "verify") copt->required();
    FlagOverrides* fl = &sf.flags;
    sf.sub->add_option("--seed", [fl](const CLI::results_t& res) {
      fl->seed = static_cast<std::uint64_t>(std::stoull(res[0]));
      return true;
    }, "override the config seed");
    sf.sub->add_option("--out", [fl](const CLI::results_t& res) {
      fl->out = res[0];
      return true;
    }, "override the output directory");
    sf.sub->add_option("--threads", [fl](const CLI::results_t& res) {
      fl->threads = std::stoi(res[0]);
      return true;
    }, "worker threads for parallel chains");
  }

  try {
    // CLI11's vector overload consumes the arguments back to front
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "netinfer: " << e.what() << "\n";
    return 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const FlagOverrides& flags = subs.at(name).flags;
  try {
    if (name == "verify") {
      std::optional<RunContext> ctx;
      if (!flags.config_path.empty() || flags.out) {
        FlagOverrides vf = flags;
        if (vf.config_path.empty()) {
          // verify can run configless; fabricate an empty config
          RunContext c;
          if (!vf.out) throw validation_error("verify with no config needs --out or neither");
          c.cfg.set("", "seed", "0");
          c.cfg.set("", "out", *vf.out);
          c.out_dir = *vf.out;
          c.threads = 1;
          std::filesystem::create_directories(c.out_dir);
          write_text_file(c.path("resolved.cfg"), serialize_config(c.cfg));
          ctx = std::move(c);
        } else {
          ctx = prepare_run(vf);
        }
      }
      return cmd_verify(ctx, out, err);
    }

    const RunContext ctx = prepare_run(flags);
    if (name == "fit-ergm") return cmd_fit_ergm(ctx, err);
    if (name == "fit-glm") return cmd_fit_glm(ctx, err);
    if (name == "fit-ame") return cmd_fit_ame(ctx, err);
    if (name == "simulate") return cmd_simulate(ctx, err);
    if (name == "gof") return cmd_gof(ctx, err);
    err << "netinfer: unknown command " << name << "\n";
    return 1;
  } catch (const hull_violation_error& e) {
    err << "netinfer " << name << ": " << e.what() << "\n";
    return 2;
  } catch (const separation_error& e) {
    err << "netinfer " << name << ": " << e.what() << "\n";
    return 2;
  } catch (const validation_error& e) {
    err << "netinfer " << name << ": " << e.what() << "\n";
    return 1;
  } catch (const io_error& e) {
    err << "netinfer " << name << ": " << e.what() << "\n";
    return 1;
  } catch (const json::exception& e) {
    err << "netinfer " << name << ": artifact parse error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "netinfer " << name << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace netinfer::cli
