#include "sep/classics.hpp"

#include <algorithm>
#include <vector>

namespace sep {

namespace {

// Minimal dense two-phase simplex over rationals, deliberately separate from
// the lp module: its own layout, its own pivoting, shared with nothing.
// Maximizes c.x subject to A x = b, x >= 0.
class OracleSimplex {
 public:
  OracleSimplex(int cols) : n_(cols) {}

  void add_row(std::vector<Rational> coeffs, Rational rhs) {
    rows_.push_back(std::move(coeffs));
    rhs_.push_back(std::move(rhs));
  }

  // Returns the optimum; throws on infeasible input (callers pre-check) or
  // iteration blow-up.
  Rational maximize(const std::vector<Rational>& objective) {
    m_ = static_cast<int>(rows_.size());
    width_ = n_ + m_ + 1;  // structural + artificial + rhs
    tab_.assign(m_, std::vector<Rational>(width_, Rational(0)));
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) {
      bool neg = rhs_[i] < 0;
      for (int j = 0; j < n_; ++j)
        tab_[i][j] = neg ? Rational(-rows_[i][j]) : rows_[i][j];
      tab_[i][n_ + i] = 1;
      tab_[i][width_ - 1] = neg ? Rational(-rhs_[i]) : rhs_[i];
      basis_[i] = n_ + i;
    }

    // phase 1: minimize the artificial mass
    std::vector<Rational> phase1(width_ - 1, Rational(0));
    for (int i = 0; i < m_; ++i) phase1[n_ + i] = -1;
    run(phase1, /*allow_artificial=*/true);
    Rational art_mass(0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= n_) art_mass += tab_[i][width_ - 1];
    if (art_mass != 0)
      throw config_error("oracle simplex: system infeasible");
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      for (int j = 0; j < n_; ++j)
        if (tab_[i][j] != 0) {
          pivot(i, j);
          break;
        }
    }

    std::vector<Rational> phase2(width_ - 1, Rational(0));
    for (int j = 0; j < n_; ++j) phase2[j] = objective[j];
    run(phase2, /*allow_artificial=*/false);

    Rational value(0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_) value += objective[basis_[i]] * tab_[i][width_ - 1];
    return value;
  }

 private:
  void run(const std::vector<Rational>& cost, bool allow_artificial) {
    recompute_reduced(cost);
    long iters = 0;
    const long limit = 20000L + 400L * m_;
    long stall = 0;
    Rational last = objective_of(cost);
    bool bland = false;
    while (true) {
      if (++iters > limit)
        throw resource_error("oracle simplex: iteration limit");
      int enter = -1;
      if (bland) {
        for (int j = 0; j < width_ - 1; ++j) {
          if (!allow_artificial && j >= n_) break;
          if (red_[j] < 0) {
            enter = j;
            break;
          }
        }
      } else {
        for (int j = 0; j < width_ - 1; ++j) {
          if (!allow_artificial && j >= n_) break;
          if (red_[j] < 0 && (enter < 0 || red_[j] < red_[enter])) enter = j;
        }
      }
      if (enter < 0) return;
      int leave = -1;
      Rational best;
      for (int i = 0; i < m_; ++i) {
        if (tab_[i][enter] <= 0) continue;
        Rational ratio = tab_[i][width_ - 1] / tab_[i][enter];
        if (leave < 0 || ratio < best ||
            (ratio == best && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0)
        throw config_error("oracle simplex: unbounded (flow LP is compact)");
      pivot(leave, enter);
      update_reduced(cost, enter, leave);
      Rational now = objective_of(cost);
      if (now > last) {
        last = now;
        stall = 0;
        bland = false;
      } else if (++stall > 200 + 2L * m_) {
        bland = true;
      }
    }
  }

  Rational objective_of(const std::vector<Rational>& cost) const {
    Rational z(0);
    for (int i = 0; i < m_; ++i) z += cost[basis_[i]] * tab_[i][width_ - 1];
    return z;
  }

  void recompute_reduced(const std::vector<Rational>& cost) {
    red_.assign(width_ - 1, Rational(0));
    for (int j = 0; j < width_ - 1; ++j) {
      Rational z(0);
      for (int i = 0; i < m_; ++i)
        if (cost[basis_[i]] != 0) z += cost[basis_[i]] * tab_[i][j];
      red_[j] = z - cost[j];
    }
  }

  void update_reduced(const std::vector<Rational>& cost, int, int) {
    // The tableau pivot changed the basis; recomputing keeps the oracle
    // simple and obviously correct (sizes here are modest).
    recompute_reduced(cost);
  }

  void pivot(int row, int col) {
    Rational p = tab_[row][col];
    for (auto& x : tab_[row]) x /= p;
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      Rational f = tab_[i][col];
      if (f == 0) continue;
      for (int j = 0; j < width_; ++j) tab_[i][j] -= f * tab_[row][j];
    }
    basis_[row] = col;
  }

  int n_ = 0, m_ = 0, width_ = 0;
  std::vector<std::vector<Rational>> rows_;
  std::vector<Rational> rhs_;
  std::vector<std::vector<Rational>> tab_;
  std::vector<Rational> red_;
  std::vector<int> basis_;
};

}  // namespace

Rational brute_force_value(const PathTree& tree, const TargetMeasure& mu,
                           const PayoffSpec& payoff) {
  if (tree.mode() != TreeMode::Full)
    throw config_error("brute_force_value requires a full tree");
  if (tree.horizon() > 8)
    throw resource_error("brute_force_value is capped at horizon 8");
  PayoffEvaluator<Rational> xi(payoff, tree);
  const int n = tree.num_nodes();

  // Presolve the structurally forced zeros: a node can carry mass only if
  // its subtree can absorb it (stop on the support or keep walking).
  std::vector<char> absorb(n, 0);
  for (int t = tree.horizon(); t >= 0; --t) {
    for (int v = tree.level_begin(t); v < tree.level_end(t); ++v) {
      bool can_stop = mu.weight(tree.node(v).value) > 0;
      bool can_walk = !tree.is_leaf(v) && absorb[tree.node(v).child[0]] &&
                      absorb[tree.node(v).child[1]];
      absorb[v] = can_stop || can_walk;
    }
  }
  if (!absorb[tree.root()])
    throw config_error("brute_force_value: target not embeddable");
  std::vector<char> live(n, 0);
  live[tree.root()] = 1;
  for (int v = 0; v < n; ++v) {
    if (!live[v] || tree.is_leaf(v)) continue;
    int c0 = tree.node(v).child[0], c1 = tree.node(v).child[1];
    if (absorb[c0] && absorb[c1]) {
      live[c0] = 1;
      live[c1] = 1;
    }
  }

  // Columns: stop masses on live support nodes, continue masses on live
  // internal nodes whose children stay absorbable.
  std::vector<int> stop_col(n, -1), cont_col(n, -1);
  int cols = 0;
  for (int v = 0; v < n; ++v) {
    if (!live[v]) continue;
    if (mu.weight(tree.node(v).value) > 0) stop_col[v] = cols++;
    if (!tree.is_leaf(v) && absorb[tree.node(v).child[0]] &&
        absorb[tree.node(v).child[1]])
      cont_col[v] = cols++;
  }

  OracleSimplex simplex(cols);
  const Rational half(1, 2);
  // marginal rows first, then node balances
  for (const auto& [x, w] : mu.atoms) {
    std::vector<Rational> row(cols, Rational(0));
    for (int v = 0; v < n; ++v)
      if (stop_col[v] >= 0 && tree.node(v).value == x) row[stop_col[v]] = 1;
    simplex.add_row(std::move(row), w);
  }
  for (int v = 0; v < n; ++v) {
    if (!live[v]) continue;
    std::vector<Rational> row(cols, Rational(0));
    if (stop_col[v] >= 0) row[stop_col[v]] = 1;
    if (cont_col[v] >= 0) row[cont_col[v]] = 1;
    int p = tree.node(v).parent;
    if (p >= 0 && cont_col[p] >= 0) row[cont_col[p]] = -half;
    simplex.add_row(std::move(row), v == tree.root() ? Rational(1) : Rational(0));
  }

  std::vector<Rational> objective(cols, Rational(0));
  for (int v = 0; v < n; ++v)
    if (stop_col[v] >= 0) objective[stop_col[v]] = xi.at_node(v);
  return simplex.maximize(objective);
}

}  // namespace sep
