#pragma once

// Sufficient statistics and their toggle gains ("change statistics").
//
// eval_stats computes s(y) from scratch. change_stats computes
// delta(y, i, j) = s(y with ij set) - s(y with ij unset) for a single dyad.
// For geometrically weighted degree terms the gain needs only the relevant
// degree; for shared-partner terms it needs two-path / shared-partner counts,
// which ChangeStatContext maintains incrementally so a Metropolis sweep pays
// O(n) per proposal instead of O(n^2).

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "netinfer/network.hpp"
#include "netinfer/terms.hpp"

namespace netinfer {

using StatVector = Eigen::VectorXd;

namespace stats_detail {

// Weight of one entity (node or edge) with count k under decay alpha:
// e^alpha * (1 - (1 - e^-alpha)^k). The leading e^alpha is kept separate;
// this is the parenthesized part, which is 0 at k = 0.
inline double gw_w(double one_minus_em, long k) {
  return 1.0 - std::pow(one_minus_em, static_cast<double>(k));
}

}  // namespace stats_detail

// In/out degree histograms over k = 0..n-1; each sums to n.
struct DegreeDistributions {
  std::vector<long> in_counts;
  std::vector<long> out_counts;
};

inline DegreeDistributions degree_distributions(const DirectedNetwork& y) {
  const int n = y.n();
  DegreeDistributions d;
  d.in_counts.assign(n, 0);
  d.out_counts.assign(n, 0);
  for (int v = 0; v < n; ++v) {
    ++d.in_counts[y.in_degree(v)];
    ++d.out_counts[y.out_degree(v)];
  }
  return d;
}

// Number of partners of dyad (i, j) under the given shared-partner variant,
// regardless of whether the edge i->j is present.
inline long shared_partner_count(const DirectedNetwork& y, int i, int j, EspVariant v) {
  long k = 0;
  for (int h = 0; h < y.n(); ++h) {
    if (h == i || h == j) continue;
    switch (v) {
      case EspVariant::OTP: k += y.edge(i, h) && y.edge(h, j); break;
      case EspVariant::ISP: k += y.edge(h, i) && y.edge(h, j); break;
      case EspVariant::OSP: k += y.edge(i, h) && y.edge(j, h); break;
      case EspVariant::ITP: k += y.edge(h, i) && y.edge(j, h); break;
    }
  }
  return k;
}

// Histogram over k = 0..n-2 of edges with exactly k shared partners.
inline std::vector<long> esp_distribution(const DirectedNetwork& y, EspVariant v) {
  std::vector<long> hist(std::max(1, y.n() - 1), 0);
  for_each_dyad(y.n(), [&](int i, int j) {
    if (y.edge(i, j)) ++hist[shared_partner_count(y, i, j, v)];
  });
  return hist;
}

inline double eval_one_stat(const StatTerm& t, const DirectedNetwork& y, const CovariateSet& cov) {
  const int n = y.n();
  switch (t.kind) {
    case TermKind::Edges:
      return static_cast<double>(y.edge_count());
    case TermKind::Mutual: {
      long m = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          m += y.edge(i, j) && y.edge(j, i);
      return static_cast<double>(m);
    }
    case TermKind::NodeOutCov: {
      const auto& x = cov.nodal_values(t.covariate);
      double s = 0.0;
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j)) s += x[i];
      });
      return s;
    }
    case TermKind::NodeInCov: {
      const auto& x = cov.nodal_values(t.covariate);
      double s = 0.0;
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j)) s += x[j];
      });
      return s;
    }
    case TermKind::EdgeCov: {
      double s = 0.0;
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j)) s += cov.dyadic_value(t.covariate, i, j);
      });
      return s;
    }
    case TermKind::AbsDiffCov: {
      const auto& x = cov.nodal_values(t.covariate);
      double s = 0.0;
      for_each_dyad(n, [&](int i, int j) {
        if (y.edge(i, j)) s += std::fabs(x[i] - x[j]);
      });
      return s;
    }
    case TermKind::GwIdegree:
    case TermKind::GwOdegree: {
      // Depends on the degree histogram only: sum_k w(k) * count(k).
      const auto hist = degree_distributions(y);
      const auto& counts = t.kind == TermKind::GwIdegree ? hist.in_counts : hist.out_counts;
      const double one_minus_em = 1.0 - std::exp(-t.decay);
      double s = 0.0;
      for (int k = 1; k < n; ++k)
        if (counts[k] > 0)
          s += stats_detail::gw_w(one_minus_em, k) * static_cast<double>(counts[k]);
      return std::exp(t.decay) * s;
    }
    case TermKind::GwEsp: {
      const auto hist = esp_distribution(y, t.variant);
      const double one_minus_em = 1.0 - std::exp(-t.decay);
      double s = 0.0;
      for (std::size_t k = 1; k < hist.size(); ++k)
        if (hist[k] > 0)
          s += stats_detail::gw_w(one_minus_em, static_cast<long>(k)) *
               static_cast<double>(hist[k]);
      return std::exp(t.decay) * s;
    }
    case TermKind::IdegreeCount: {
      long c = 0;
      for (int v = 0; v < n; ++v) c += y.in_degree(v) == t.degree;
      return static_cast<double>(c);
    }
    case TermKind::OdegreeCount: {
      long c = 0;
      for (int v = 0; v < n; ++v) c += y.out_degree(v) == t.degree;
      return static_cast<double>(c);
    }
  }
  throw validation_error("unhandled term kind");
}

inline StatVector eval_stats(const ModelSpec& spec, const DirectedNetwork& y,
                             const CovariateSet& cov) {
  StatVector s(static_cast<long>(spec.size()));
  for (std::size_t k = 0; k < spec.size(); ++k)
    s[static_cast<long>(k)] = eval_one_stat(spec.terms[k], y, cov);
  if (!s.allFinite()) throw validation_error("non-finite statistic value");
  return s;
}

// Incremental bookkeeping for change statistics: degree vectors always, and
// one n*n partner-count table per shared-partner pattern the model needs.
//   two_path(a,b) = #{h : a->h, h->b}   (OTP reads (a,b), ITP reads (b,a))
//   in_shared(a,b) = #{h : h->a, h->b}  (symmetric; ISP)
//   out_shared(a,b) = #{h : a->h, b->h} (symmetric; OSP)
// None of the entries involve y_ab itself, which is what makes the toggle
// algebra below exact.
class ChangeStatContext {
public:
  ChangeStatContext(const ModelSpec& spec, const DirectedNetwork& y, const CovariateSet& cov)
      : spec_(&spec), cov_(&cov), n_(y.n()) {
    for (const auto& t : spec.terms) {
      if (t.kind == TermKind::GwEsp) {
        if (t.variant == EspVariant::OTP || t.variant == EspVariant::ITP) need_two_path_ = true;
        if (t.variant == EspVariant::ISP) need_in_shared_ = true;
        if (t.variant == EspVariant::OSP) need_out_shared_ = true;
      }
    }
    rebuild(y);
  }

  // Recompute all tables from the given network (also used as a test oracle
  // against the incremental updates).
  void rebuild(const DirectedNetwork& y) {
    in_deg_.assign(n_, 0);
    out_deg_.assign(n_, 0);
    for_each_dyad(n_, [&](int i, int j) {
      if (y.edge(i, j)) {
        ++out_deg_[i];
        ++in_deg_[j];
      }
    });
    auto fill = [&](std::vector<std::int32_t>& table, EspVariant v) {
      table.assign(static_cast<std::size_t>(n_) * n_, 0);
      for_each_dyad(n_, [&](int a, int b) {
        table[static_cast<std::size_t>(a) * n_ + b] =
            static_cast<std::int32_t>(shared_partner_count(y, a, b, v));
      });
    };
    if (need_two_path_) fill(two_path_, EspVariant::OTP);
    if (need_in_shared_) fill(in_shared_, EspVariant::ISP);
    if (need_out_shared_) fill(out_shared_, EspVariant::OSP);
  }

  // delta(y, i, j) = s(y+ij) - s(y-ij), evaluated without mutating anything.
  StatVector change(const DirectedNetwork& y, int i, int j) const {
    StatVector d(static_cast<long>(spec_->size()));
    change_into(y, i, j, d);
    return d;
  }

  // Allocation-free variant for sampler hot loops; `out` must have spec size.
  void change_into(const DirectedNetwork& y, int i, int j, StatVector& out) const {
    if (i == j) throw validation_error("change statistic requested for a diagonal dyad");
    const bool present = y.edge(i, j);  // adjustment when tables include (i,j)
    for (std::size_t k = 0; k < spec_->size(); ++k)
      out[static_cast<long>(k)] = change_one(spec_->terms[k], y, i, j, present);
  }

  // Flip dyad (i, j) in `y` and keep the tables in sync. O(n).
  void commit_toggle(DirectedNetwork& y, int i, int j) {
    const int delta = y.edge(i, j) ? -1 : 1;
    y.set_edge(i, j, delta > 0);
    out_deg_[i] += delta;
    in_deg_[j] += delta;
    if (need_two_path_) {
      // i->j extends to two-paths i->j->b and a->i->j.
      for (int b = 0; b < n_; ++b)
        if (b != i && b != j && y.edge(j, b)) two_path_[idx(i, b)] += delta;
      for (int a = 0; a < n_; ++a)
        if (a != i && a != j && y.edge(a, i)) two_path_[idx(a, j)] += delta;
    }
    if (need_in_shared_) {
      // i becomes/stops being a shared in-neighbor of {j, b} for each i->b.
      for (int b = 0; b < n_; ++b)
        if (b != i && b != j && y.edge(i, b)) {
          in_shared_[idx(j, b)] += delta;
          in_shared_[idx(b, j)] += delta;
        }
    }
    if (need_out_shared_) {
      // j becomes/stops being a shared out-neighbor of {i, a} for each a->j.
      for (int a = 0; a < n_; ++a)
        if (a != i && a != j && y.edge(a, j)) {
          out_shared_[idx(i, a)] += delta;
          out_shared_[idx(a, i)] += delta;
        }
    }
  }

  int in_degree(int v) const { return in_deg_[v]; }
  int out_degree(int v) const { return out_deg_[v]; }

private:
  std::size_t idx(int a, int b) const { return static_cast<std::size_t>(a) * n_ + b; }

  long partner_count(EspVariant v, int a, int b) const {
    switch (v) {
      case EspVariant::OTP: return two_path_[idx(a, b)];
      case EspVariant::ITP: return two_path_[idx(b, a)];
      case EspVariant::ISP: return in_shared_[idx(a, b)];
      case EspVariant::OSP: return out_shared_[idx(a, b)];
    }
    return 0;
  }

  double change_one(const StatTerm& t, const DirectedNetwork& y, int i, int j,
                    bool present) const {
    switch (t.kind) {
      case TermKind::Edges:
        return 1.0;
      case TermKind::Mutual:
        return y.edge(j, i) ? 1.0 : 0.0;
      case TermKind::NodeOutCov:
        return cov_->nodal_values(t.covariate)[i];
      case TermKind::NodeInCov:
        return cov_->nodal_values(t.covariate)[j];
      case TermKind::EdgeCov:
        return cov_->dyadic_value(t.covariate, i, j);
      case TermKind::AbsDiffCov: {
        const auto& x = cov_->nodal_values(t.covariate);
        return std::fabs(x[i] - x[j]);
      }
      case TermKind::GwIdegree: {
        // Receiver's in-degree moves d -> d+1; the gain telescopes to
        // e^a (w(d+1) - w(d)) = (1 - e^-a)^d.
        const long d = in_deg_[j] - (present ? 1 : 0);
        return std::pow(1.0 - std::exp(-t.decay), static_cast<double>(d));
      }
      case TermKind::GwOdegree: {
        const long d = out_deg_[i] - (present ? 1 : 0);
        return std::pow(1.0 - std::exp(-t.decay), static_cast<double>(d));
      }
      case TermKind::GwEsp:
        return gwesp_change(t, y, i, j, present);
      case TermKind::IdegreeCount: {
        const long d = in_deg_[j] - (present ? 1 : 0);
        return (d + 1 == t.degree ? 1.0 : 0.0) - (d == t.degree ? 1.0 : 0.0);
      }
      case TermKind::OdegreeCount: {
        const long d = out_deg_[i] - (present ? 1 : 0);
        return (d + 1 == t.degree ? 1.0 : 0.0) - (d == t.degree ? 1.0 : 0.0);
      }
    }
    throw validation_error("unhandled term kind");
  }

  // Shared-partner gain of adding i->j to the base network y \ {i->j}:
  // the new edge lands in bin q, and each existing edge whose partner set
  // gains (i, j) as a strut steps from bin c to c+1. When the edge is
  // currently present the stored counts include its strut contribution to
  // exactly those affected edges, so subtract one before use.
  double gwesp_change(const StatTerm& t, const DirectedNetwork& y, int i, int j,
                      bool present) const {
    const double one_minus_em = 1.0 - std::exp(-t.decay);
    const double ea = std::exp(t.decay);
    const int adj = present ? 1 : 0;
    auto step_gain = [&](long c) {
      // e^a (w(c+1) - w(c)) = e^a * e^-a * (1-e^-a)^c
      return std::pow(one_minus_em, static_cast<double>(c));
    };
    double gain = ea * stats_detail::gw_w(one_minus_em, partner_count(t.variant, i, j));
    switch (t.variant) {
      case EspVariant::OTP:
        for (int b = 0; b < n_; ++b) {
          if (b == i || b == j) continue;
          // i->j->b completes a partner for existing edge i->b
          if (y.edge(i, b) && y.edge(j, b)) gain += step_gain(two_path_[idx(i, b)] - adj);
          // a->i->j completes a partner for existing edge a->j
          if (y.edge(b, j) && y.edge(b, i)) gain += step_gain(two_path_[idx(b, j)] - adj);
        }
        break;
      case EspVariant::ITP:
        // A partner of edge (a,b) is a two-path b->h->a. The new edge i->j
        // serves as first strut (h->a with h=i, a=j) for edges (j,b) that
        // close with b->i, and as second strut (b->h with b=i, h=j) for
        // edges (b,i) that close with j->b. Both require y_jb and y_bi, so
        // a single condition guards both affected edges.
        for (int b = 0; b < n_; ++b) {
          if (b == i || b == j) continue;
          if (y.edge(j, b) && y.edge(b, i)) {
            gain += step_gain(two_path_[idx(b, j)] - adj);  // edge (j,b)
            gain += step_gain(two_path_[idx(i, b)] - adj);  // edge (b,i)
          }
        }
        break;
      case EspVariant::ISP:
        for (int b = 0; b < n_; ++b) {
          if (b == i || b == j) continue;
          // i is now a shared in-neighbor of {j, b} whenever i->b: affects
          // existing edges j->b and b->j.
          if (!y.edge(i, b)) continue;
          const long c = in_shared_[idx(j, b)] - adj;
          if (y.edge(j, b)) gain += step_gain(c);
          if (y.edge(b, j)) gain += step_gain(c);
        }
        break;
      case EspVariant::OSP:
        for (int a = 0; a < n_; ++a) {
          if (a == i || a == j) continue;
          // j is now a shared out-neighbor of {i, a} whenever a->j: affects
          // existing edges i->a and a->i.
          if (!y.edge(a, j)) continue;
          const long c = out_shared_[idx(i, a)] - adj;
          if (y.edge(i, a)) gain += step_gain(c);
          if (y.edge(a, i)) gain += step_gain(c);
        }
        break;
    }
    return gain;
  }

  const ModelSpec* spec_;
  const CovariateSet* cov_;
  int n_;
  bool need_two_path_ = false, need_in_shared_ = false, need_out_shared_ = false;
  std::vector<int> in_deg_, out_deg_;
  std::vector<std::int32_t> two_path_, in_shared_, out_shared_;
};

// Stateless convenience wrapper; builds the context afresh. Prefer holding a
// ChangeStatContext when evaluating many dyads on the same network.
inline StatVector change_stats(const ModelSpec& spec, const DirectedNetwork& y,
                               const CovariateSet& cov, DyadIndex dyad) {
  ChangeStatContext ctx(spec, y, cov);
  return ctx.change(y, dyad.i, dyad.j);
}

}  // namespace netinfer
