#pragma once

#include "sep/primal.hpp"

#include <string>
#include <vector>

namespace sep {

// ---------------------------------------------------------------------------
// Dual certificates
// ---------------------------------------------------------------------------

/// Dual pair (lambda, S): a terminal function on the value grid plus a
/// node-indexed supermartingale with S(root) = 0 dominating the payoff.
template <class S>
struct DualCertificate {
  const PathTree* tree = nullptr;
  std::vector<S> lambda;  // index x + N over the grid [-N, N]
  VectorX<S> smg;         // node-indexed supermartingale

  S lambda_at(int x) const { return lambda[x + tree->horizon()]; }

  /// Domination slack at a node; nonnegative for a feasible certificate.
  S eta(int v, const PayoffEvaluator<S>& xi) const {
    return lambda_at(tree->node(v).value) + smg[v] - xi.at_node(v);
  }

  /// Supermartingale slack at an internal node; nonnegative when feasible.
  S smg_slack(int v) const {
    const TreeNode& n = tree->node(v);
    return smg[v] - (smg[n.child[0]] + smg[n.child[1]]) / S(2);
  }

  /// mu(lambda), the dual objective.
  S objective(const TargetMeasure& mu) const {
    S acc(0);
    for (const auto& [x, w] : mu.atoms)
      acc += from_rational<S>(w) * lambda_at(x);
    return acc;
  }

  /// Growth diagnostic: max |S(v)| / (1 + |value(v)|). The linear-growth
  /// bound is vacuous on a finite tree; reported, never constrained.
  S growth_constant() const {
    S best(0);
    for (int v = 0; v < tree->num_nodes(); ++v) {
      S num = smg[v] < S(0) ? S(-smg[v]) : smg[v];
      S val = num / S(1 + std::abs(tree->node(v).value));
      if (val > best) best = val;
    }
    return best;
  }

  struct Residuals {
    S root_offset{};        // |S(root)|
    S max_domination{};     // max(0, max_v -eta(v))
    S max_supermartingale{};  // max(0, max_v -smg_slack(v))
  };

  Residuals residuals(const PayoffEvaluator<S>& xi) const {
    Residuals r{S(0), S(0), S(0)};
    r.root_offset = smg[tree->root()] < S(0) ? S(-smg[tree->root()])
                                             : smg[tree->root()];
    for (int v = 0; v < tree->num_nodes(); ++v) {
      S e = eta(v, xi);
      if (-e > r.max_domination) r.max_domination = -e;
      if (!tree->is_leaf(v)) {
        S s = smg_slack(v);
        if (-s > r.max_supermartingale) r.max_supermartingale = -s;
      }
    }
    return r;
  }
};

// ---------------------------------------------------------------------------
// Dual LP
// ---------------------------------------------------------------------------

/// Variables: lambda_x = x + N, then S_v = (2N+1) + v, all free.
/// Rows: domination per node, supermartingale per internal node, S(root) = 0.
template <class S>
struct DualLp {
  LinearProgram<S> lp;
  const PathTree* tree = nullptr;
  int lambda_var(int x) const { return x + tree->horizon(); }
  int smg_var(int v) const { return 2 * tree->horizon() + 1 + v; }
};

template <class S>
DualLp<S> assemble_dual(const PathTree& tree, const TargetMeasure& mu,
                        const PayoffEvaluator<S>& xi) {
  DualLp<S> out;
  out.tree = &tree;
  LinearProgram<S>& lp = out.lp;
  lp.maximize = false;
  int N = tree.horizon();
  for (int x = -N; x <= N; ++x)
    lp.add_variable(from_rational<S>(mu.weight(x)), /*is_free=*/true);
  for (int v = 0; v < tree.num_nodes(); ++v)
    lp.add_variable(S(0), /*is_free=*/true);

  const S half = S(1) / S(2);
  for (int v = 0; v < tree.num_nodes(); ++v) {
    lp.add_row({{out.lambda_var(tree.node(v).value), S(1)},
                {out.smg_var(v), S(1)}},
               Relation::GE, xi.at_node(v));
  }
  for (int v = 0; v < tree.num_nodes(); ++v) {
    if (tree.is_leaf(v)) continue;
    lp.add_row({{out.smg_var(v), S(1)},
                {out.smg_var(tree.node(v).child[0]), -half},
                {out.smg_var(tree.node(v).child[1]), -half}},
               Relation::GE, S(0));
  }
  lp.add_row({{out.smg_var(tree.root()), S(1)}}, Relation::EQ, S(0));
  return out;
}

enum class DualStatus { Optimal, EmbeddingInfeasible, Error };

template <class S>
struct DualSolveResult {
  DualStatus status = DualStatus::Error;
  LpStatus lp_status = LpStatus::IterationLimit;
  S value{};
  DualCertificate<S> certificate;
  long iterations = 0;
};

/// Solves the dual problem. An unbounded dual is reported as embedding
/// infeasibility of the target measure. Mass outside the reachable grid
/// leaves its lambda values unconstrained, so the dual is unbounded without
/// solving.
template <class S>
DualSolveResult<S> solve_dual(const PathTree& tree, const TargetMeasure& mu,
                              const PayoffEvaluator<S>& xi,
                              const LpOptions& opt = {}) {
  if (mu.min_point() < -tree.horizon() || mu.max_point() > tree.horizon()) {
    DualSolveResult<S> out;
    out.status = DualStatus::EmbeddingInfeasible;
    out.lp_status = LpStatus::Unbounded;
    return out;
  }
  DualLp<S> dlp = assemble_dual(tree, mu, xi);
  LpSolution<S> sol = solve_lp(dlp.lp, opt);
  DualSolveResult<S> out;
  out.lp_status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status == LpStatus::Unbounded) {
    out.status = DualStatus::EmbeddingInfeasible;
    return out;
  }
  if (sol.status != LpStatus::Optimal) return out;
  out.status = DualStatus::Optimal;
  out.value = sol.value;
  out.certificate.tree = &tree;
  int N = tree.horizon();
  out.certificate.lambda.resize(2 * N + 1);
  for (int x = -N; x <= N; ++x)
    out.certificate.lambda[x + N] = sol.x[dlp.lambda_var(x)];
  out.certificate.smg.resize(tree.num_nodes());
  for (int v = 0; v < tree.num_nodes(); ++v)
    out.certificate.smg[v] = sol.x[dlp.smg_var(v)];
  return out;
}

/// Certificate recovered from the primal LP row multipliers: with y the
/// balance duals and m the marginal duals, lambda(x) = m(x) + y(root) and
/// S(v) = y(v) - y(root).
template <class S>
DualCertificate<S> certificate_from_primal_duals(
    const PrimalLp<S>& plp, const std::vector<S>& row_duals) {
  const PathTree& tree = *plp.tree;
  DualCertificate<S> cert;
  cert.tree = &tree;
  int N = tree.horizon();
  const S y_root = row_duals[plp.balance_row(tree.root())];
  cert.lambda.resize(2 * N + 1);
  for (int x = -N; x <= N; ++x)
    cert.lambda[x + N] = row_duals[plp.marginal_row(x)] + y_root;
  cert.smg.resize(tree.num_nodes());
  for (int v = 0; v < tree.num_nodes(); ++v)
    cert.smg[v] = row_duals[plp.balance_row(v)] - y_root;
  return cert;
}

// ---------------------------------------------------------------------------
// Duality gap and complementary slackness
// ---------------------------------------------------------------------------

template <class S>
struct GapReport {
  S primal{}, dual{}, gap{};
  double relative_gap = 0.0;
  bool pass = false;
};

/// |P - D| <= tol * (1 + |P|); exact mode demands P == D identically.
template <class S>
GapReport<S> verify_duality(const S& primal, const S& dual, double tol) {
  GapReport<S> r;
  r.primal = primal;
  r.dual = dual;
  r.gap = primal - dual;
  if (r.gap < S(0)) r.gap = -r.gap;
  double denom = 1.0 + std::abs(to_double(primal));
  r.relative_gap = to_double(r.gap) / denom;
  if constexpr (scalar_traits<S>::exact)
    r.pass = r.gap == S(0);
  else
    r.pass = to_double(r.gap) <= tol * denom;
  return r;
}

struct SlacknessViolation {
  int node = -1;
  enum class Kind { StopDomination, ContinueMartingale } kind;
  std::string detail;
};

template <class S>
struct SlacknessReport {
  std::vector<SlacknessViolation> violations;
  S max_stop_eta{};        // max eta over stop-support nodes
  S max_cont_smg_slack{};  // max supermartingale slack over continue nodes
  bool ok() const { return violations.empty(); }
};

/// Complementary slackness of a primal/dual pair: stop mass forces tight
/// domination, continue mass forces the supermartingale to be a martingale.
template <class S>
SlacknessReport<S> check_slackness(const StoppingFlow<S>& flow,
                                   const DualCertificate<S>& cert,
                                   const PayoffEvaluator<S>& xi, double eps_in) {
  S eps = scalar_traits<S>::exact ? S(0) : S(eps_in);
  SlacknessReport<S> rep;
  rep.max_stop_eta = S(0);
  rep.max_cont_smg_slack = S(0);
  const PathTree& tree = *flow.tree;
  for (int v = 0; v < tree.num_nodes(); ++v) {
    if (flow.stop[v] > eps) {
      S e = cert.eta(v, xi);
      if (e > rep.max_stop_eta) rep.max_stop_eta = e;
      if (e > eps)
        rep.violations.push_back(
            {v, SlacknessViolation::Kind::StopDomination,
             "eta=" + format_scalar(e)});
    }
    if (!tree.is_leaf(v) && flow.cont[v] > eps) {
      S s = cert.smg_slack(v);
      if (s > rep.max_cont_smg_slack) rep.max_cont_smg_slack = s;
      if (s > eps)
        rep.violations.push_back(
            {v, SlacknessViolation::Kind::ContinueMartingale,
             "slack=" + format_scalar(s)});
    }
  }
  return rep;
}

}  // namespace sep
