#pragma once

#include "sep/dual.hpp"

#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace sep {

// ---------------------------------------------------------------------------
// Contact sets and the lower extension
// ---------------------------------------------------------------------------

struct ContactSet {
  enum class Source { Support, Certificate };
  Source source = Source::Support;
  std::vector<char> in;       // node mask
  std::vector<int> members;   // sorted node ids

  bool contains(int v) const { return in[v] != 0; }
  int size() const { return static_cast<int>(members.size()); }
};

template <class S>
ContactSet support_contact_set(const StoppingFlow<S>& flow, double eps_in) {
  S eps = scalar_traits<S>::exact ? S(0) : S(eps_in);
  ContactSet c;
  c.source = ContactSet::Source::Support;
  c.in.assign(flow.tree->num_nodes(), 0);
  for (int v = 0; v < flow.tree->num_nodes(); ++v)
    if (flow.stop[v] > eps) {
      c.in[v] = 1;
      c.members.push_back(v);
    }
  return c;
}

template <class S>
ContactSet certificate_contact_set(const DualCertificate<S>& cert,
                                   const PayoffEvaluator<S>& xi,
                                   double eps_in) {
  S eps = scalar_traits<S>::exact ? S(0) : S(eps_in);
  ContactSet c;
  c.source = ContactSet::Source::Certificate;
  c.in.assign(cert.tree->num_nodes(), 0);
  for (int v = 0; v < cert.tree->num_nodes(); ++v) {
    S e = cert.eta(v, xi);
    if (e < S(0)) e = -e;
    if (e <= eps) {
      c.in[v] = 1;
      c.members.push_back(v);
    }
  }
  return c;
}

/// Strict-ancestor closure: prefixes that agree with some member up to their
/// own (strictly smaller) stop time. Full trees only.
ContactSet lower_extension(const ContactSet& gamma, const PathTree& tree);

// ---------------------------------------------------------------------------
// Conditional families Q1 / Q2 / Q*
// ---------------------------------------------------------------------------

/// Conditional law of a flow at a node v = (omega, theta):
///   q1: law of the stopped prefix given the path history up to theta
///       (ancestor atoms s(u) 2^t(u); subtree atoms s(w) 2^theta);
///   q2: q1 conditioned on {T > theta} when that event has positive mass,
///       otherwise the immediate-stop branch (stop at v, reference tails);
///   Q*: q2 re-rooted at v, i.e. atom w carries continuation length
///       t(w) - t(v).
template <class S>
struct ConditionalFamily {
  int node = -1;
  bool degenerate = false;
  S q1_future_mass{};  // Q1[T > theta]
  std::vector<std::pair<int, S>> q1;
  std::vector<std::pair<int, S>> q2;

  S q1_total() const {
    S t(0);
    for (const auto& [w, m] : q1) t += m;
    return t;
  }
  S q2_total() const {
    S t(0);
    for (const auto& [w, m] : q2) t += m;
    return t;
  }
  /// Q*[T > 0]: zero exactly on the degenerate branch.
  S qstar_positive_time() const { return degenerate ? S(0) : q2_total(); }
};

/// Continue mass at or below this is treated as zero when conditioning
/// (floating solves leave dust that would otherwise blow up Q2 ratios).
inline double default_degenerate_tol(bool exact) { return exact ? 0.0 : 1e-12; }

template <class S>
ConditionalFamily<S> conditional_family(const StoppingFlow<S>& flow, int v,
                                        double degenerate_tol_in = -1.0) {
  const PathTree& tree = *flow.tree;
  if (tree.mode() != TreeMode::Full)
    throw config_error("conditional families require a full tree");
  S dg = degenerate_tol_in < 0
             ? S(from_rational<S>(Rational(0)))
             : S(degenerate_tol_in);
  if (degenerate_tol_in < 0 && !scalar_traits<S>::exact) dg = S(1e-12);

  ConditionalFamily<S> fam;
  fam.node = v;
  const int theta = tree.node(v).t;
  const S scale = S(static_cast<long>(1) << theta);

  // ancestor atoms
  int u = tree.node(v).parent;
  std::vector<std::pair<int, S>> anc;
  while (u >= 0) {
    if (flow.stop[u] != S(0))
      anc.push_back({u, flow.stop[u] * S(static_cast<long>(1) << tree.node(u).t)});
    u = tree.node(u).parent;
  }
  for (auto it = anc.rbegin(); it != anc.rend(); ++it) fam.q1.push_back(*it);

  // subtree atoms (depth-first, includes v itself)
  std::vector<int> stack{v};
  while (!stack.empty()) {
    int w = stack.back();
    stack.pop_back();
    if (flow.stop[w] != S(0)) fam.q1.push_back({w, flow.stop[w] * scale});
    if (!tree.is_leaf(w)) {
      stack.push_back(tree.node(w).child[1]);
      stack.push_back(tree.node(w).child[0]);
    }
  }

  fam.q1_future_mass = flow.cont[v] * scale;
  if (flow.cont[v] <= dg) {
    fam.degenerate = true;
    fam.q2.push_back({v, S(1)});
    return fam;
  }
  const S denom = flow.cont[v];
  stack.assign(1, v);
  while (!stack.empty()) {
    int w = stack.back();
    stack.pop_back();
    if (w != v && flow.stop[w] != S(0))
      fam.q2.push_back({w, flow.stop[w] / denom});
    if (!tree.is_leaf(w)) {
      stack.push_back(tree.node(w).child[1]);
      stack.push_back(tree.node(w).child[0]);
    }
  }
  return fam;
}

/// Largest atom-wise deviation of Q1(v) from the half-half mixture of the
/// children's Q1 (the reference step law is the optimizer's path kernel).
template <class S>
S q1_tower_residual(const StoppingFlow<S>& flow, int v,
                    double degenerate_tol = -1.0) {
  const PathTree& tree = *flow.tree;
  if (tree.is_leaf(v)) return S(0);
  ConditionalFamily<S> parent = conditional_family(flow, v, degenerate_tol);
  ConditionalFamily<S> left =
      conditional_family(flow, tree.node(v).child[0], degenerate_tol);
  ConditionalFamily<S> right =
      conditional_family(flow, tree.node(v).child[1], degenerate_tol);
  std::map<int, S> mix;
  const S half = S(1) / S(2);
  for (const auto& [w, m] : left.q1) mix[w] += half * m;
  for (const auto& [w, m] : right.q1) mix[w] += half * m;
  for (const auto& [w, m] : parent.q1) mix[w] -= m;
  S worst(0);
  for (const auto& [w, r] : mix) {
    S a = r < S(0) ? S(-r) : r;
    if (a > worst) worst = a;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Stop-go pairs
// ---------------------------------------------------------------------------

enum class SGFlavor { SG, SGStar };

template <class S>
struct SGPairRecord {
  int first = -1, second = -1;
  /// SG: minimum gap over representable continuations. SG*: expected gap.
  S margin{};
  std::string witness;  // excluded pairs: a continuation with gap <= eps
  int witness_theta = 0;
  S swap_expectation{}, stay_expectation{};  // SG* conditional expectations
};

template <class S>
struct SGPairSet {
  SGFlavor flavor = SGFlavor::SG;
  /// Hard members: the defining inequality certified over every representable
  /// continuation (SG) or the untruncated conditional expectation (SG*).
  std::vector<SGPairRecord<S>> members;
  /// Candidates with an equality/violation witness (SG) or nonpositive
  /// expected gap (SG*).
  std::vector<SGPairRecord<S>> excluded;
  /// Horizon-censored: no representable continuation (SG) or conditional
  /// support truncated at the horizon (SG*). Never asserted on.
  std::vector<SGPairRecord<S>> censored;
  long candidates = 0;
  std::string cost_warning;  // set when the tree is large (quadratic cost)
};

struct SGOptions {
  double eps_sg = 1e-9;        // strictness margin (0 in exact mode)
  double support_eps = 1e-7;   // stop-mass threshold for contact sets
  double degenerate_tol = -1;  // continue-mass zero threshold (-1: default)
  int threads = 1;
  int warn_above_nodes = 4096;  // pair enumeration is quadratic in nodes
};

template <class S>
SGPairSet<S> enumerate_sg(const PayoffEvaluator<S>& xi, const PathTree& tree,
                          const SGOptions& opt = {});

template <class S>
SGPairSet<S> enumerate_sg_star(const PayoffEvaluator<S>& xi,
                               const StoppingFlow<S>& flow,
                               const SGOptions& opt = {});

/// First components of pairs whose second component lies in gamma.
template <class S>
std::vector<char> project_sg(const SGPairSet<S>& pairs,
                             const ContactSet& gamma) {
  std::vector<char> mask(gamma.in.size(), 0);
  for (const auto& rec : pairs.members)
    if (gamma.in[rec.second]) mask[rec.first] = 1;
  return mask;
}

// ---------------------------------------------------------------------------
// Monotonicity-principle verifier
// ---------------------------------------------------------------------------

template <class S>
struct MPReport {
  SGFlavor flavor = SGFlavor::SG;
  bool pass = false;
  /// Members landing in gamma_lower x gamma (the forbidden rectangle).
  std::vector<SGPairRecord<S>> violations;
  /// Would-be violations whose exchange is not representable inside the
  /// horizon: the flow's continuation at the going prefix outlives the room
  /// left after the stopped prefix. Reported, never asserted.
  std::vector<SGPairRecord<S>> censored_violations;
  /// Continue-mass nodes inside the projection of members against gamma.
  std::vector<int> projection_violations;
  long members = 0, excluded = 0, censored = 0, candidates = 0;
  int gamma_size = 0, gamma_lower_size = 0;
};

/// Checks SG (or SG*) against gamma* = support of the flow: the optimal flow
/// must admit no stop-go pair with a going prefix in gamma*< and a stopped
/// prefix in gamma*. Requires a full tree. Pass precomputed pairs to avoid
/// re-enumeration.
template <class S>
MPReport<S> verify_mp(const StoppingFlow<S>& flow, const PayoffEvaluator<S>& xi,
                      SGFlavor flavor, const SGOptions& opt = {},
                      const SGPairSet<S>* precomputed = nullptr) {
  const PathTree& tree = *flow.tree;
  if (tree.mode() != TreeMode::Full)
    throw config_error("verify_mp requires a full tree");
  ContactSet gamma = support_contact_set(flow, opt.support_eps);
  ContactSet gamma_lower = lower_extension(gamma, tree);
  SGPairSet<S> computed;
  if (!precomputed) {
    computed = flavor == SGFlavor::SG ? enumerate_sg(xi, tree, opt)
                                      : enumerate_sg_star(xi, flow, opt);
    precomputed = &computed;
  }
  const SGPairSet<S>& pairs = *precomputed;
  MPReport<S> rep;
  rep.flavor = flavor;
  rep.members = static_cast<long>(pairs.members.size());
  rep.excluded = static_cast<long>(pairs.excluded.size());
  rep.censored = static_cast<long>(pairs.censored.size());
  rep.candidates = pairs.candidates;
  rep.gamma_size = gamma.size();
  rep.gamma_lower_size = gamma_lower.size();

  // The universal flavor certifies pairs over representable continuations
  // only; the exclusion theorem additionally needs the exchange itself to be
  // representable, i.e. the flow's continuation at the going prefix must fit
  // behind the stopped prefix. Pairs failing that are horizon-censored here
  // (the conditional flavor already buckets them during enumeration).
  const S dust = opt.degenerate_tol < 0
                     ? S(default_degenerate_tol(scalar_traits<S>::exact))
                     : S(opt.degenerate_tol);
  auto exchange_truncated = [&](int first, int second) -> bool {
    if (flavor == SGFlavor::SGStar) return false;
    int d = tree.horizon() -
            std::max(tree.node(first).t, tree.node(second).t);
    int cut = tree.node(first).t + d;
    std::vector<int> todo{first};
    while (!todo.empty()) {
      int u = todo.back();
      todo.pop_back();
      if (tree.node(u).t == cut) {
        if (flow.cont[u] > dust) return true;
        continue;
      }
      if (tree.is_leaf(u)) continue;
      if (flow.cont[u] > dust) {
        todo.push_back(tree.node(u).child[0]);
        todo.push_back(tree.node(u).child[1]);
      }
    }
    return false;
  };

  std::vector<char> hard_proj(tree.num_nodes(), 0);
  for (const auto& rec : pairs.members) {
    if (!gamma.in[rec.second]) continue;
    bool truncated = exchange_truncated(rec.first, rec.second);
    if (!truncated) hard_proj[rec.first] = 1;
    if (gamma_lower.in[rec.first]) {
      if (truncated)
        rep.censored_violations.push_back(rec);
      else
        rep.violations.push_back(rec);
    }
  }
  S eps = scalar_traits<S>::exact ? S(0) : S(opt.support_eps);
  for (int v = 0; v < tree.num_nodes(); ++v)
    if (flow.cont[v] > eps && hard_proj[v]) rep.projection_violations.push_back(v);
  rep.pass = rep.violations.empty() && rep.projection_violations.empty();
  return rep;
}

extern template SGPairSet<double> enumerate_sg(const PayoffEvaluator<double>&,
                                               const PathTree&,
                                               const SGOptions&);
extern template SGPairSet<Rational> enumerate_sg(
    const PayoffEvaluator<Rational>&, const PathTree&, const SGOptions&);
extern template SGPairSet<double> enumerate_sg_star(
    const PayoffEvaluator<double>&, const StoppingFlow<double>&,
    const SGOptions&);
extern template SGPairSet<Rational> enumerate_sg_star(
    const PayoffEvaluator<Rational>&, const StoppingFlow<Rational>&,
    const SGOptions&);

}  // namespace sep
