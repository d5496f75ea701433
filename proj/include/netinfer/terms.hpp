#pragma once

// Sufficient-statistic term catalog and the model specification type.
// Deliberately free of any evaluation code so that both the production
// statistics engine and the independent brute-force oracle can consume the
// same term descriptions without sharing implementation.

#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "netinfer/csv.hpp"
#include "netinfer/network.hpp"

namespace netinfer {

enum class TermKind {
  Edges,
  Mutual,
  NodeOutCov,
  NodeInCov,
  EdgeCov,
  AbsDiffCov,
  GwIdegree,
  GwOdegree,
  GwEsp,
  IdegreeCount,
  OdegreeCount,
};

// Shared-partner flavors for edgewise shared partner statistics. For an edge
// i->j a partner h (distinct from i and j) counts when:
//   OTP: i->h and h->j   (outgoing two-path)
//   ISP: h->i and h->j   (incoming shared partner)
//   OSP: i->h and j->h   (outgoing shared partner)
//   ITP: h->i and j->h   (incoming two-path)
enum class EspVariant { OTP, ISP, OSP, ITP };

inline const char* esp_variant_name(EspVariant v) {
  switch (v) {
    case EspVariant::OTP: return "otp";
    case EspVariant::ISP: return "isp";
    case EspVariant::OSP: return "osp";
    case EspVariant::ITP: return "itp";
  }
  return "?";
}

inline EspVariant esp_variant_from_name(const std::string& s) {
  if (s == "otp") return EspVariant::OTP;
  if (s == "isp") return EspVariant::ISP;
  if (s == "osp") return EspVariant::OSP;
  if (s == "itp") return EspVariant::ITP;
  throw validation_error("unknown shared-partner variant: " + s +
                         " (expected otp, isp, osp or itp)");
}

// Default decay for geometrically weighted terms: log 2, so each additional
// unit of degree / shared partners adds half the weight of the previous one.
inline double default_gw_decay() { return std::log(2.0); }

struct StatTerm {
  TermKind kind = TermKind::Edges;
  std::string covariate;               // *Cov terms
  double decay = 0.0;                  // Gw* terms, > 0
  EspVariant variant = EspVariant::OTP;  // GwEsp
  int degree = 0;                      // IdegreeCount / OdegreeCount

  std::string label() const {
    std::ostringstream s;
    switch (kind) {
      case TermKind::Edges: return "edges";
      case TermKind::Mutual: return "mutual";
      case TermKind::NodeOutCov: s << "nodeocov(" << covariate << ")"; break;
      case TermKind::NodeInCov: s << "nodeicov(" << covariate << ")"; break;
      case TermKind::EdgeCov: s << "edgecov(" << covariate << ")"; break;
      case TermKind::AbsDiffCov: s << "absdiff(" << covariate << ")"; break;
      case TermKind::GwIdegree: s << "gwidegree(" << format_real(decay) << ")"; break;
      case TermKind::GwOdegree: s << "gwodegree(" << format_real(decay) << ")"; break;
      case TermKind::GwEsp:
        s << "gwesp(" << esp_variant_name(variant) << "," << format_real(decay) << ")";
        break;
      case TermKind::IdegreeCount: s << "idegree(" << degree << ")"; break;
      case TermKind::OdegreeCount: s << "odegree(" << degree << ")"; break;
    }
    return s.str();
  }

  // A term is dyad independent when its toggle gain does not depend on the
  // rest of the adjacency matrix.
  bool dyad_independent() const {
    switch (kind) {
      case TermKind::Edges:
      case TermKind::NodeOutCov:
      case TermKind::NodeInCov:
      case TermKind::EdgeCov:
      case TermKind::AbsDiffCov:
        return true;
      default:
        return false;
    }
  }

  static StatTerm edges() { return {TermKind::Edges, "", 0.0, EspVariant::OTP, 0}; }
  static StatTerm mutual() { return {TermKind::Mutual, "", 0.0, EspVariant::OTP, 0}; }
  static StatTerm node_out_cov(std::string name) {
    return {TermKind::NodeOutCov, std::move(name), 0.0, EspVariant::OTP, 0};
  }
  static StatTerm node_in_cov(std::string name) {
    return {TermKind::NodeInCov, std::move(name), 0.0, EspVariant::OTP, 0};
  }
  static StatTerm edge_cov(std::string name) {
    return {TermKind::EdgeCov, std::move(name), 0.0, EspVariant::OTP, 0};
  }
  static StatTerm abs_diff_cov(std::string name) {
    return {TermKind::AbsDiffCov, std::move(name), 0.0, EspVariant::OTP, 0};
  }
  static StatTerm gw_idegree(double decay = default_gw_decay()) {
    return {TermKind::GwIdegree, "", decay, EspVariant::OTP, 0};
  }
  static StatTerm gw_odegree(double decay = default_gw_decay()) {
    return {TermKind::GwOdegree, "", decay, EspVariant::OTP, 0};
  }
  static StatTerm gw_esp(EspVariant v, double decay = default_gw_decay()) {
    return {TermKind::GwEsp, "", decay, v, 0};
  }
  static StatTerm idegree_count(int k) { return {TermKind::IdegreeCount, "", 0.0, EspVariant::OTP, k}; }
  static StatTerm odegree_count(int k) { return {TermKind::OdegreeCount, "", 0.0, EspVariant::OTP, k}; }
};

struct ModelSpec {
  std::vector<StatTerm> terms;

  std::size_t size() const { return terms.size(); }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(terms.size());
    for (const auto& t : terms) out.push_back(t.label());
    return out;
  }

  bool dyad_independent() const {
    for (const auto& t : terms)
      if (!t.dyad_independent()) return false;
    return true;
  }

  std::vector<EspVariant> esp_variants() const {
    std::vector<EspVariant> out;
    for (const auto& t : terms)
      if (t.kind == TermKind::GwEsp) {
        bool dup = false;
        for (auto v : out) dup = dup || v == t.variant;
        if (!dup) out.push_back(t.variant);
      }
    return out;
  }

  void validate(const DirectedNetwork& y, const CovariateSet& cov) const {
    validate(cov, y.n());
  }

  // Structural checks: at least one term, exactly one edges term (the
  // intercept analog), unique labels, positive decays, covariates present
  // with the right arity, degree bounds within range.
  void validate(const CovariateSet& cov, int n) const {
    if (terms.empty()) throw validation_error("model specification has no terms");
    int n_edges_terms = 0;
    std::set<std::string> seen;
    for (const auto& t : terms) {
      if (!seen.insert(t.label()).second)
        throw validation_error("duplicate model term: " + t.label());
      switch (t.kind) {
        case TermKind::Edges:
          ++n_edges_terms;
          break;
        case TermKind::NodeOutCov:
        case TermKind::NodeInCov:
        case TermKind::AbsDiffCov:
          if (!cov.has_nodal(t.covariate))
            throw validation_error("model term " + t.label() +
                                   " references a missing nodal covariate");
          break;
        case TermKind::EdgeCov:
          if (!cov.has_dyadic(t.covariate))
            throw validation_error("model term " + t.label() +
                                   " references a missing dyadic covariate");
          break;
        case TermKind::GwIdegree:
        case TermKind::GwOdegree:
        case TermKind::GwEsp:
          if (!(t.decay > 0.0))
            throw validation_error("decay must be positive in " + t.label());
          break;
        case TermKind::IdegreeCount:
        case TermKind::OdegreeCount:
          if (t.degree < 0 || t.degree > n - 1)
            throw validation_error("degree bound outside 0..n-1 in " + t.label());
          break;
        default:
          break;
      }
    }
    if (n_edges_terms != 1)
      throw validation_error("model must contain exactly one edges term");
  }
};

namespace detail {
// Split on top-level commas only; "gwesp(otp,0.693)" stays together.
inline std::vector<std::string> split_terms(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  if (depth != 0) throw validation_error("unbalanced parentheses in term list: " + s);
  return out;
}

inline std::pair<std::string, std::vector<std::string>> split_call(const std::string& s) {
  const auto open = s.find('(');
  if (open == std::string::npos) return {s, {}};
  if (s.back() != ')') throw validation_error("malformed term: " + s);
  const std::string name = trim(s.substr(0, open));
  const std::string inner = s.substr(open + 1, s.size() - open - 2);
  std::vector<std::string> args;
  for (const auto& a : split_csv_line(inner))
    if (!a.empty()) args.push_back(a);
  return {name, args};
}
}  // namespace detail

// Parse a comma separated term list, e.g.
//   "edges, mutual, gwidegree(0.693), gwesp(otp,0.693), nodeocov(gdp)"
inline ModelSpec parse_model_terms(const std::string& grammar) {
  ModelSpec spec;
  for (const auto& piece : detail::split_terms(grammar)) {
    auto [name, args] = detail::split_call(piece);
    auto need = [&](std::size_t k) {
      if (args.size() != k)
        throw validation_error("term " + name + " expects " + std::to_string(k) +
                               " argument(s): " + piece);
    };
    if (name == "edges") {
      need(0);
      spec.terms.push_back(StatTerm::edges());
    } else if (name == "mutual") {
      need(0);
      spec.terms.push_back(StatTerm::mutual());
    } else if (name == "nodeocov") {
      need(1);
      spec.terms.push_back(StatTerm::node_out_cov(args[0]));
    } else if (name == "nodeicov") {
      need(1);
      spec.terms.push_back(StatTerm::node_in_cov(args[0]));
    } else if (name == "edgecov") {
      need(1);
      spec.terms.push_back(StatTerm::edge_cov(args[0]));
    } else if (name == "absdiff") {
      need(1);
      spec.terms.push_back(StatTerm::abs_diff_cov(args[0]));
    } else if (name == "gwidegree") {
      if (args.empty())
        spec.terms.push_back(StatTerm::gw_idegree());
      else {
        need(1);
        spec.terms.push_back(StatTerm::gw_idegree(parse_real(args[0], piece)));
      }
    } else if (name == "gwodegree") {
      if (args.empty())
        spec.terms.push_back(StatTerm::gw_odegree());
      else {
        need(1);
        spec.terms.push_back(StatTerm::gw_odegree(parse_real(args[0], piece)));
      }
    } else if (name == "gwesp") {
      if (args.size() == 1)
        spec.terms.push_back(StatTerm::gw_esp(esp_variant_from_name(args[0])));
      else {
        need(2);
        spec.terms.push_back(
            StatTerm::gw_esp(esp_variant_from_name(args[0]), parse_real(args[1], piece)));
      }
    } else if (name == "idegree") {
      need(1);
      spec.terms.push_back(StatTerm::idegree_count(static_cast<int>(parse_long(args[0], piece))));
    } else if (name == "odegree") {
      need(1);
      spec.terms.push_back(StatTerm::odegree_count(static_cast<int>(parse_long(args[0], piece))));
    } else {
      throw validation_error("unknown model term: " + name);
    }
  }
  if (spec.terms.empty()) throw validation_error("empty term list");
  return spec;
}

inline std::string format_model_terms(const ModelSpec& spec) {
  std::string out;
  for (std::size_t k = 0; k < spec.terms.size(); ++k) {
    if (k) out += ", ";
    out += spec.terms[k].label();
  }
  return out;
}

}  // namespace netinfer
