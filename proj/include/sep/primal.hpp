#pragma once

#include "sep/lp.hpp"
#include "sep/walkspace.hpp"

#include <vector>

namespace sep {

// ---------------------------------------------------------------------------
// Stopping flows
// ---------------------------------------------------------------------------

/// Randomized stopping rule as node masses: stop(v) + cont(v) = inflow(v),
/// inflow(root) = 1, each child of v receives cont(v)/2.
template <class S>
struct StoppingFlow {
  const PathTree* tree = nullptr;
  VectorX<S> stop, cont;

  VectorX<S> inflow() const {
    VectorX<S> in = VectorX<S>::Zero(tree->num_nodes());
    in[tree->root()] = S(1);
    for (int v = 0; v < tree->num_nodes(); ++v) {
      if (tree->is_leaf(v)) continue;
      const S half = cont[v] / S(2);
      if (half != S(0)) {
        in[tree->node(v).child[0]] += half;
        in[tree->node(v).child[1]] += half;
      }
    }
    return in;
  }

  /// Stopped-value distribution on the grid [-N, N] (index x + N).
  VectorX<S> stopped_law() const {
    int N = tree->horizon();
    VectorX<S> law = VectorX<S>::Zero(2 * N + 1);
    for (int v = 0; v < tree->num_nodes(); ++v)
      law[tree->node(v).value + N] += stop[v];
    return law;
  }

  S expected_payoff(const PayoffEvaluator<S>& xi) const {
    S acc(0);
    for (int v = 0; v < tree->num_nodes(); ++v)
      if (stop[v] != S(0)) acc += stop[v] * xi.at_node(v);
    return acc;
  }

  S expected_stop_time() const {
    S acc(0);
    for (int v = 0; v < tree->num_nodes(); ++v)
      acc += stop[v] * S(tree->node(v).t);
    return acc;
  }

  S expected_stop_value() const {
    S acc(0);
    for (int v = 0; v < tree->num_nodes(); ++v)
      acc += stop[v] * S(tree->node(v).value);
    return acc;
  }
};

/// Conservation and marginal residuals of a flow against a target measure.
template <class S>
struct FlowResiduals {
  S max_balance{};    // max |stop + cont - inflow|
  S max_marginal{};   // max_x |law(x) - mu(x)|
  S total_stop{};     // sum of stop masses
  S min_mass{};       // most negative stop/cont entry (0 if none)
};

template <class S>
FlowResiduals<S> flow_residuals(const StoppingFlow<S>& f, const TargetMeasure& mu) {
  FlowResiduals<S> r{S(0), S(0), S(0), S(0)};
  VectorX<S> in = f.inflow();
  for (int v = 0; v < f.tree->num_nodes(); ++v) {
    S res = f.stop[v] + f.cont[v] - in[v];
    if (res < S(0)) res = -res;
    if (res > r.max_balance) r.max_balance = res;
    r.total_stop += f.stop[v];
    if (f.stop[v] < r.min_mass) r.min_mass = f.stop[v];
    if (f.cont[v] < r.min_mass) r.min_mass = f.cont[v];
  }
  int N = f.tree->horizon();
  VectorX<S> law = f.stopped_law();
  for (int x = -N; x <= N; ++x) {
    S res = law[x + N] - from_rational<S>(mu.weight(x));
    if (res < S(0)) res = -res;
    if (res > r.max_marginal) r.max_marginal = res;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Primal LP
// ---------------------------------------------------------------------------

/// Flow LP with its row/column bookkeeping. Variables: stop(v) = v,
/// cont(v) = num_nodes + v. Rows: one balance row per node (root row has
/// rhs 1), then one marginal row per grid point x = -N..N, then the
/// forced-stop row pinning the total continue mass at the horizon to zero.
template <class S>
struct PrimalLp {
  LinearProgram<S> lp;
  const PathTree* tree = nullptr;
  int marginal_row_begin = 0;

  int stop_col(int v) const { return v; }
  int cont_col(int v) const { return tree->num_nodes() + v; }
  int balance_row(int v) const { return v; }
  int marginal_row(int x) const {
    return marginal_row_begin + x + tree->horizon();
  }
  int horizon_row() const {
    return marginal_row_begin + 2 * tree->horizon() + 1;
  }
};

template <class S>
PrimalLp<S> assemble_primal(const PathTree& tree, const TargetMeasure& mu,
                            const PayoffEvaluator<S>& xi) {
  PrimalLp<S> out;
  out.tree = &tree;
  int n = tree.num_nodes();
  int N = tree.horizon();
  LinearProgram<S>& lp = out.lp;
  lp.maximize = true;
  lp.objective.resize(2 * n);
  lp.free_var.assign(2 * n, 0);
  for (int v = 0; v < n; ++v) {
    lp.objective[v] = xi.at_node(v);
    lp.objective[n + v] = S(0);
  }

  std::vector<std::vector<std::pair<int, S>>> balance(n);
  for (int v = 0; v < n; ++v) {
    balance[v].push_back({out.stop_col(v), S(1)});
    balance[v].push_back({out.cont_col(v), S(1)});
  }
  const S minus_half = S(-1) / S(2);
  for (int v = 0; v < n; ++v) {
    if (tree.is_leaf(v)) continue;
    balance[tree.node(v).child[0]].push_back({out.cont_col(v), minus_half});
    balance[tree.node(v).child[1]].push_back({out.cont_col(v), minus_half});
  }
  for (int v = 0; v < n; ++v)
    lp.add_row(std::move(balance[v]), Relation::EQ,
               v == tree.root() ? S(1) : S(0));

  out.marginal_row_begin = static_cast<int>(lp.rows.size());
  std::vector<std::vector<std::pair<int, S>>> marg(2 * N + 1);
  for (int v = 0; v < n; ++v)
    marg[tree.node(v).value + N].push_back({out.stop_col(v), S(1)});
  for (int x = -N; x <= N; ++x)
    lp.add_row(std::move(marg[x + N]), Relation::EQ,
               from_rational<S>(mu.weight(x)));

  // forced stop at the horizon: the continue masses there sum to zero
  std::vector<std::pair<int, S>> horizon;
  for (int v = tree.level_begin(N); v < tree.level_end(N); ++v)
    horizon.push_back({out.cont_col(v), S(1)});
  lp.add_row(std::move(horizon), Relation::EQ, S(0));
  return out;
}

template <class S>
struct PrimalSolveResult {
  LpStatus status = LpStatus::IterationLimit;
  S value{};
  StoppingFlow<S> flow;
  std::vector<S> row_duals;  // primal LP row order (balance, then marginals)
  std::vector<S> farkas;     // infeasibility certificate, same row order
  long iterations = 0;
};

template <class S>
PrimalSolveResult<S> solve_primal_lp(const PrimalLp<S>& plp,
                                     const LpOptions& opt = {}) {
  PrimalSolveResult<S> out;
  LpSolution<S> sol = solve_lp(plp.lp, opt);
  out.status = sol.status;
  out.iterations = sol.iterations;
  if (sol.status == LpStatus::Infeasible) {
    out.farkas = std::move(sol.farkas);
    return out;
  }
  if (sol.status != LpStatus::Optimal) return out;
  int n = plp.tree->num_nodes();
  out.value = sol.value;
  out.flow.tree = plp.tree;
  out.flow.stop.resize(n);
  out.flow.cont.resize(n);
  for (int v = 0; v < n; ++v) {
    out.flow.stop[v] = sol.x[plp.stop_col(v)];
    out.flow.cont[v] = sol.x[plp.cont_col(v)];
  }
  out.row_duals = std::move(sol.duals);
  return out;
}

template <class S>
PrimalSolveResult<S> solve_primal(const PathTree& tree, const TargetMeasure& mu,
                                  const PayoffEvaluator<S>& xi,
                                  const LpOptions& opt = {}) {
  return solve_primal_lp(assemble_primal(tree, mu, xi), opt);
}

// ---------------------------------------------------------------------------
// Feasibility probe
// ---------------------------------------------------------------------------

template <class S>
struct FeasibilityReport {
  bool feasible = false;
  std::vector<S> farkas;        // valid when infeasible
  bool certificate_valid = false;
};

/// Validates a Farkas certificate: y.b > 0 while y.A_j <= 0 on every
/// nonnegative column (within tol in floating mode).
template <class S>
bool farkas_certifies(const LinearProgram<S>& lp, const std::vector<S>& y,
                      double tol_in) {
  if (static_cast<int>(y.size()) != static_cast<int>(lp.rows.size()))
    return false;
  S tol = scalar_traits<S>::exact ? S(0) : S(tol_in);
  S yb(0);
  std::vector<S> yA(lp.num_vars(), S(0));
  for (std::size_t i = 0; i < lp.rows.size(); ++i) {
    yb += y[i] * lp.rows[i].rhs;
    for (const auto& [j, a] : lp.rows[i].coeffs) yA[j] += y[i] * a;
    if (lp.rows[i].rel == Relation::LE && y[i] > tol) return false;
    if (lp.rows[i].rel == Relation::GE && y[i] < -tol) return false;
  }
  if (yb <= tol) return false;
  for (int j = 0; j < lp.num_vars(); ++j) {
    if (lp.free_var[j]) {
      if (yA[j] > tol || yA[j] < -tol) return false;
    } else if (yA[j] > tol) {
      return false;
    }
  }
  return true;
}

/// Checks the balance+marginal system for solvability; on failure returns the
/// dual (Farkas) certificate and validates it against the assembled system.
template <class S>
FeasibilityReport<S> feasibility(const PathTree& tree, const TargetMeasure& mu,
                                 const LpOptions& opt = {}) {
  PayoffEvaluator<S> zero(PayoffSpec::neg_tau(), tree);
  PrimalLp<S> plp = assemble_primal(tree, mu, zero);
  for (auto& c : plp.lp.objective) c = S(0);
  LpSolution<S> sol = solve_lp(plp.lp, opt);
  FeasibilityReport<S> rep;
  rep.feasible = sol.status == LpStatus::Optimal;
  if (!rep.feasible) {
    rep.farkas = std::move(sol.farkas);
    rep.certificate_valid = farkas_certifies(plp.lp, rep.farkas, opt.tol);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Vertex sampling and lattice-to-tree lifting
// ---------------------------------------------------------------------------

/// A vertex of the feasibility polytope chosen by a seeded random objective.
template <class S>
StoppingFlow<S> random_feasible_vertex(const PathTree& tree,
                                       const TargetMeasure& mu,
                                       std::uint64_t seed,
                                       const LpOptions& base_opt = {}) {
  PayoffEvaluator<S> any(PayoffSpec::neg_tau(), tree);
  PrimalLp<S> plp = assemble_primal(tree, mu, any);
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 1);
  std::uniform_int_distribution<int> coef(-9, 9);
  // payoff-shaped objective: random on stop masses, zero on continue masses
  for (int v = 0; v < tree.num_nodes(); ++v) {
    plp.lp.objective[plp.stop_col(v)] = S(coef(rng));
    plp.lp.objective[plp.cont_col(v)] = S(0);
  }
  LpOptions opt = base_opt;
  PrimalSolveResult<S> res = solve_primal_lp(plp, opt);
  if (res.status != LpStatus::Optimal)
    throw config_error("random_feasible_vertex: system infeasible");
  return std::move(res.flow);
}

/// Builds a flow from per-node stop fractions (fraction of inflow stopped).
template <class S>
StoppingFlow<S> flow_from_stop_fractions(const PathTree& tree,
                                         const std::vector<S>& frac) {
  StoppingFlow<S> f;
  f.tree = &tree;
  int n = tree.num_nodes();
  f.stop = VectorX<S>::Zero(n);
  f.cont = VectorX<S>::Zero(n);
  VectorX<S> in = VectorX<S>::Zero(n);
  in[tree.root()] = S(1);
  for (int v = 0; v < n; ++v) {
    S s = tree.is_leaf(v) ? in[v] : in[v] * frac[v];
    f.stop[v] = s;
    f.cont[v] = in[v] - s;
    if (!tree.is_leaf(v) && f.cont[v] != S(0)) {
      const S half = f.cont[v] / S(2);
      in[tree.node(v).child[0]] += half;
      in[tree.node(v).child[1]] += half;
    }
  }
  return f;
}

/// Transfers a lattice flow to the full tree carrying the same stop rule:
/// every full-tree prefix inherits the stop fraction of its statistic state.
template <class S>
StoppingFlow<S> lift_to_full(const StoppingFlow<S>& flow,
                             const PathTree& full_tree) {
  const PathTree& src = *flow.tree;
  if (full_tree.mode() != TreeMode::Full)
    throw config_error("lift target must be a full tree");
  if (src.horizon() != full_tree.horizon())
    throw config_error("lift horizon mismatch");
  if (src.mode() == TreeMode::Full) {
    StoppingFlow<S> same;  // rebind to the caller's tree object
    same.tree = &full_tree;
    same.stop = flow.stop;
    same.cont = flow.cont;
    return same;
  }

  VectorX<S> in_src = flow.inflow();
  std::vector<S> frac(full_tree.num_nodes(), S(0));
  for (int v = 0; v < full_tree.num_nodes(); ++v) {
    const TreeNode& n = full_tree.node(v);
    int s = src.state_node(n.t, n.value, n.max_value);
    if (s < 0) continue;
    if (in_src[s] != S(0)) frac[v] = flow.stop[s] / in_src[s];
  }
  return flow_from_stop_fractions(full_tree, frac);
}

}  // namespace sep
