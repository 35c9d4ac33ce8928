#pragma once

#include "sep/primal.hpp"

#include <map>
#include <string>
#include <vector>

namespace sep {

// ---------------------------------------------------------------------------
// Structural cross-checks against the classical embeddings
// ---------------------------------------------------------------------------

struct BarrierViolation {
  int node = -1;
  std::string reason;
};

/// Space-time barrier check for time-convex costs: per stopped value x there
/// is a threshold r(x) with stopping only at t >= r(x), and everything that
/// reaches (t, x) with t >= r(x) stops.
struct RootBarrierReport {
  std::map<int, int> threshold;  // value -> r(value)
  std::vector<BarrierViolation> violations;
  bool ok() const { return violations.empty(); }
};

template <class S>
RootBarrierReport root_structure(const StoppingFlow<S>& flow, double eps_in) {
  S eps = scalar_traits<S>::exact ? S(0) : S(eps_in);
  const PathTree& tree = *flow.tree;
  RootBarrierReport rep;
  for (int v = 0; v < tree.num_nodes(); ++v) {
    if (flow.stop[v] > eps) {
      auto [it, fresh] = rep.threshold.insert({tree.node(v).value, tree.node(v).t});
      if (!fresh) it->second = std::min(it->second, tree.node(v).t);
    }
  }
  VectorX<S> in = flow.inflow();
  for (int v = 0; v < tree.num_nodes(); ++v) {
    if (in[v] <= eps) continue;
    auto it = rep.threshold.find(tree.node(v).value);
    if (it == rep.threshold.end()) continue;
    if (tree.node(v).t >= it->second && flow.cont[v] > eps)
      rep.violations.push_back(
          {v, "mass continues at (t=" + std::to_string(tree.node(v).t) +
                  ", x=" + std::to_string(tree.node(v).value) +
                  ") inside the barrier (r=" + std::to_string(it->second) +
                  ")"});
  }
  return rep;
}

/// Running-max boundary check for the expected-maximum criterion: stopping
/// only where the running max reaches psi(value), continuation strictly
/// below. Diagnostic: atomic targets and finite horizons may break it.
struct MaxBoundaryReport {
  std::map<int, int> psi;  // value -> minimal stopping running-max
  std::vector<BarrierViolation> violations;
  bool ok() const { return violations.empty(); }
};

template <class S>
MaxBoundaryReport azema_yor_structure(const StoppingFlow<S>& flow,
                                      double eps_in) {
  const PathTree& tree = *flow.tree;
  if (!tree.tracks_max())
    throw config_error(
        "running-max boundary check needs a full tree or a (t,value,max) "
        "statistic");
  S eps = scalar_traits<S>::exact ? S(0) : S(eps_in);
  MaxBoundaryReport rep;
  for (int v = 0; v < tree.num_nodes(); ++v) {
    if (flow.stop[v] > eps) {
      auto [it, fresh] =
          rep.psi.insert({tree.node(v).value, tree.node(v).max_value});
      if (!fresh) it->second = std::min(it->second, tree.node(v).max_value);
    }
  }
  for (int v = 0; v < tree.num_nodes(); ++v) {
    if (flow.cont[v] <= eps) continue;
    auto it = rep.psi.find(tree.node(v).value);
    if (it == rep.psi.end()) continue;
    if (tree.node(v).max_value >= it->second)
      rep.violations.push_back(
          {v, "continuation at (t=" + std::to_string(tree.node(v).t) +
                  ", x=" + std::to_string(tree.node(v).value) +
                  ", m=" + std::to_string(tree.node(v).max_value) +
                  ") at or above psi=" + std::to_string(it->second)});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Exact oracle of record
// ---------------------------------------------------------------------------

/// Exact optimum of the flow LP on a full tree, computed by a self-contained
/// rational simplex that shares nothing with the main solver. Referee for
/// the acceptance numbers. Full mode, horizon <= 8.
Rational brute_force_value(const PathTree& tree, const TargetMeasure& mu,
                           const PayoffSpec& payoff);

}  // namespace sep
