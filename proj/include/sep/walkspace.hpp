#pragma once

#include "sep/rational.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sep {

// ---------------------------------------------------------------------------
// Stopped paths
// ---------------------------------------------------------------------------

/// A stopped prefix of the unit random walk: a sequence of +-1 steps together
/// with a stop index theta. Queries depend only on steps[0..theta).
struct PathPrefix {
  std::vector<int8_t> steps;
  int theta = 0;

  int length() const { return static_cast<int>(steps.size()); }

  /// Walk value after t steps (value_at(0) == 0).
  int value_at(int t) const;
  int endpoint() const { return value_at(theta); }

  /// max_{t <= theta} value_t; at least 0 since the walk starts at 0.
  int running_max() const;
  int running_min() const;

  void validate() const;  // throws config_error on malformed data

  static PathPrefix empty() { return PathPrefix{}; }
  /// Builds from a string of 'U'/'D' characters; theta defaults to length.
  static PathPrefix from_string(const std::string& ud, int theta = -1);
  std::string to_string() const;  // steps[0..theta) as U/D
};

/// Concatenation of stopped paths: b is translated to start at a's endpoint,
/// a's steps beyond theta are discarded. Result has theta = a.theta + b.theta.
PathPrefix concat(const PathPrefix& a, const PathPrefix& b);

// ---------------------------------------------------------------------------
// The finite-horizon walk model
// ---------------------------------------------------------------------------

enum class TreeMode { Full, Augmented };

/// Node statistic for Augmented mode. Full mode always carries the complete
/// path, including the running maximum.
enum class Statistic { TimeValue, TimeValueMax };

struct TreeNode {
  int t = 0;
  int value = 0;
  int max_value = 0;       // running max over [0..t]; meaningful iff tracked
  std::uint64_t path = 0;  // Full mode: step bits, bit i set = step i is +1
  std::array<std::int32_t, 2> child{-1, -1};  // [0] = down, [1] = up
  std::int32_t parent = -1;                   // Full mode only (unique there)
};

/// Immutable after construction; safe to share across threads.
class PathTree {
 public:
  static constexpr int kDefaultFullCap = 16;

  /// Builds the horizon-N model. Full mode enumerates all step sequences
  /// (capped; 2^(N+1)-1 nodes), Augmented mode recombines on the statistic.
  static PathTree build(int horizon, TreeMode mode,
                        Statistic statistic = Statistic::TimeValue,
                        int full_cap = kDefaultFullCap);

  TreeMode mode() const { return mode_; }
  Statistic statistic() const { return statistic_; }
  int horizon() const { return horizon_; }
  bool tracks_max() const {
    return mode_ == TreeMode::Full || statistic_ == Statistic::TimeValueMax;
  }

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const TreeNode& node(int v) const { return nodes_[v]; }
  int root() const { return 0; }
  bool is_leaf(int v) const { return nodes_[v].t == horizon_; }
  int level_begin(int t) const { return level_start_[t]; }
  int level_end(int t) const { return level_start_[t + 1]; }

  /// Full mode: node holding steps[0..theta) of the prefix.
  int full_node(const PathPrefix& p) const;
  /// Full mode: node for explicit path bits at depth t.
  int full_node_at(int t, std::uint64_t path_bits) const;
  /// Full mode: the ancestor prefix of v at depth t <= t(v).
  int ancestor(int v, int t) const;
  /// Augmented mode: state lookup; maxv ignored under TimeValue.
  int state_node(int t, int value, int maxv = 0) const;
  /// Node a prefix maps to (mode dispatch).
  int node_of_prefix(const PathPrefix& p) const;
  /// Full mode: reconstructs the stopped prefix of node v.
  PathPrefix prefix_of(int v) const;

  std::string node_key(int v) const;
  /// Inverse of node_key; throws io_error on unknown keys.
  int node_from_key(const std::string& key) const;

 private:
  TreeMode mode_ = TreeMode::Full;
  Statistic statistic_ = Statistic::TimeValue;
  int horizon_ = 0;
  std::vector<TreeNode> nodes_;
  std::vector<int> level_start_;
  // Augmented lookup: per level, (value, max) -> node id.
  std::vector<std::map<std::pair<int, int>, int>> state_index_;
};

// ---------------------------------------------------------------------------
// Target measures
// ---------------------------------------------------------------------------

/// Centered probability measure on the integer grid, weights kept exact.
struct TargetMeasure {
  std::vector<std::pair<int, Rational>> atoms;  // sorted by point, weight > 0

  /// Validates total mass 1 and mean 0 (within 1e-12; exact weights stay
  /// exact). Throws config_error otherwise.
  static TargetMeasure from_atoms(std::vector<std::pair<int, Rational>> atoms);

  Rational weight(int x) const;
  Rational second_moment() const;  // sum x^2 w(x)
  int min_point() const { return atoms.front().first; }
  int max_point() const { return atoms.back().first; }

  template <class S>
  S expectation(const std::vector<S>& grid_fn, int grid_offset) const {
    S acc(0);
    for (const auto& [x, w] : atoms)
      acc += from_rational<S>(w) * grid_fn[x + grid_offset];
    return acc;
  }
};

// ---------------------------------------------------------------------------
// Payoff functionals
// ---------------------------------------------------------------------------

enum class PayoffKind {
  RunningMax,  // max_{t <= theta} value_t
  NegTau,      // -theta
  NegTauSq,    // -theta^2
  TauSq,       // +theta^2
  Terminal,    // f(value_theta), f a grid table
  TimeValue,   // f(theta, value_theta), table
  Custom       // raw table over (full path, theta); Full mode only
};

/// Non-anticipative payoff description. Tables are exact; Custom tables are
/// keyed by the complete horizon-length path plus the stop index, so that
/// anticipativity is a checkable property rather than an assumption.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::NegTau;
  std::map<int, Rational> terminal_table;                  // x -> value
  std::map<std::pair<int, int>, Rational> time_value_table;  // (t,x) -> value
  int custom_horizon = -1;
  std::map<std::pair<std::uint64_t, int>, Rational> custom_table;

  static PayoffSpec running_max() { return {PayoffKind::RunningMax}; }
  static PayoffSpec neg_tau() { return {PayoffKind::NegTau}; }
  static PayoffSpec neg_tau_sq() { return {PayoffKind::NegTauSq}; }
  static PayoffSpec tau_sq() { return {PayoffKind::TauSq}; }
  static PayoffSpec terminal(std::map<int, Rational> table);
  /// |x - strike| on the grid [-horizon, horizon].
  static PayoffSpec terminal_abs(const Rational& strike, int horizon);
  static PayoffSpec time_value(std::map<std::pair<int, int>, Rational> table);
  static PayoffSpec custom(int horizon,
                           std::map<std::pair<std::uint64_t, int>, Rational> table);

  bool needs_max() const { return kind == PayoffKind::RunningMax; }
  bool expressible_in(TreeMode mode, Statistic stat) const;
  std::string kind_name() const;
};

/// Point statistics of a stopped prefix, sufficient to evaluate any payoff.
struct PathStat {
  int theta = 0;
  int value = 0;
  int max_value = 0;
  std::uint64_t path = 0;  // bits of steps[0..theta); Custom payoffs only
};

/// Payoff bound to a tree, evaluating in the requested scalar type. Checks
/// statistic expressibility and table completeness at bind time. Owns its
/// copy of the spec; only the tree must outlive the evaluator.
template <class S>
class PayoffEvaluator {
 public:
  PayoffEvaluator(PayoffSpec spec, const PathTree& tree);

  const PayoffSpec& spec() const { return spec_; }
  const PathTree& tree() const { return *tree_; }

  S at_stat(const PathStat& st) const;
  S at_node(int v) const { return node_values_[v]; }
  S at_prefix(const PathPrefix& p) const;
  const VectorX<S>& node_values() const { return node_values_; }

  /// Evaluates at (full-length path, theta). For table payoffs this reads the
  /// raw table entry, so anticipative tables are observable here.
  S at_raw(std::uint64_t full_path, int theta) const;

 private:
  PayoffSpec spec_;
  const PathTree* tree_;
  VectorX<S> node_values_;
};

/// Convenience: evaluate a payoff at a stopped prefix (tree supplies the
/// horizon and, for Custom kinds, the table domain).
template <class S>
S eval_payoff(const PayoffSpec& spec, const PathTree& tree, const PathPrefix& p) {
  return PayoffEvaluator<S>(spec, tree).at_prefix(p);
}

// ---------------------------------------------------------------------------
// Non-anticipativity check
// ---------------------------------------------------------------------------

struct AnticipationViolation {
  int prefix_node = -1;  // the offending stopped prefix (depth = theta)
  int theta = 0;
  std::uint64_t witness_a = 0, witness_b = 0;  // two full paths disagreeing
  std::string value_a, value_b;                // formatted payoff values
};

struct NonAnticipativityReport {
  long prefixes_checked = 0;
  std::vector<AnticipationViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Exhaustive check on a Full tree: for every prefix (omega, theta) and every
/// alteration of the steps after theta, the payoff value must not change.
NonAnticipativityReport check_nonanticipative(const PayoffSpec& spec,
                                              const PathTree& tree);

extern template class PayoffEvaluator<double>;
extern template class PayoffEvaluator<Rational>;

}  // namespace sep
