// Test-only oracles, independent of the solver paths they referee.
#pragma once

#include "sep/primal.hpp"

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace sep::testing {

// Exhaustive basic-feasible-solution enumeration of the flow polytope
// {balance rows, marginal rows, masses >= 0} after removing the structurally
// zero columns (stop mass off the support, continue mass at leaves). Only
// meant for tiny instances.
inline std::vector<StoppingFlow<Rational>> exact_vertex_flows(
    const PathTree& tree, const TargetMeasure& mu) {
  const int n = tree.num_nodes();
  std::vector<int> stop_col(n, -1), cont_col(n, -1);
  std::vector<int> col_owner;  // column -> node, stop cols first
  for (int v = 0; v < n; ++v)
    if (mu.weight(tree.node(v).value) > 0) {
      stop_col[v] = static_cast<int>(col_owner.size());
      col_owner.push_back(v);
    }
  const int stop_cols = static_cast<int>(col_owner.size());
  for (int v = 0; v < n; ++v)
    if (!tree.is_leaf(v)) {
      cont_col[v] = static_cast<int>(col_owner.size());
      col_owner.push_back(v);
    }
  const int cols = static_cast<int>(col_owner.size());

  // rows: node balances, then one marginal per support atom
  const int rows = n + static_cast<int>(mu.atoms.size());
  MatrixX<Rational> A = MatrixX<Rational>::Zero(rows, cols);
  VectorX<Rational> b = VectorX<Rational>::Zero(rows);
  for (int v = 0; v < n; ++v) {
    if (stop_col[v] >= 0) A(v, stop_col[v]) = 1;
    if (cont_col[v] >= 0) A(v, cont_col[v]) = 1;
  }
  for (int v = 0; v < n; ++v) {
    if (cont_col[v] < 0) continue;  // inflow arrives along child edges
    A(tree.node(v).child[0], cont_col[v]) -= Rational(1, 2);
    A(tree.node(v).child[1], cont_col[v]) -= Rational(1, 2);
  }
  b[tree.root()] = 1;
  for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
    for (int v = 0; v < n; ++v)
      if (stop_col[v] >= 0 && tree.node(v).value == mu.atoms[k].first)
        A(n + static_cast<int>(k), stop_col[v]) = 1;
    b[n + static_cast<int>(k)] = mu.atoms[k].second;
  }

  // rank of A by rational elimination
  MatrixX<Rational> R = A;
  int rank = 0;
  {
    int r = 0;
    for (int c = 0; c < cols && r < rows; ++c) {
      int piv = -1;
      for (int i = r; i < rows; ++i)
        if (R(i, c) != 0) {
          piv = i;
          break;
        }
      if (piv < 0) continue;
      R.row(piv).swap(R.row(r));
      for (int i = 0; i < rows; ++i) {
        if (i == r || R(i, c) == 0) continue;
        Rational f = R(i, c) / R(r, c);
        R.row(i) -= f * R.row(r);
      }
      ++r;
    }
    rank = r;
  }

  std::vector<StoppingFlow<Rational>> out;
  std::set<std::string> seen;
  std::vector<int> chosen;
  // Solve A_B y = b for the chosen columns; consistency checked.
  std::function<void()> try_basis = [&]() {
    MatrixX<Rational> M = MatrixX<Rational>::Zero(rows, rank + 1);
    for (int k = 0; k < rank; ++k) M.col(k) = A.col(chosen[k]);
    M.col(rank) = b;
    int r = 0;
    std::vector<int> pivot_of_col(rank, -1);
    for (int c = 0; c < rank && r < rows; ++c) {
      int piv = -1;
      for (int i = r; i < rows; ++i)
        if (M(i, c) != 0) {
          piv = i;
          break;
        }
      if (piv < 0) return;  // dependent columns, not a basis
      M.row(piv).swap(M.row(r));
      for (int i = 0; i < rows; ++i) {
        if (i == r || M(i, c) == 0) continue;
        Rational f = M(i, c) / M(r, c);
        M.row(i) -= f * M.row(r);
      }
      pivot_of_col[c] = r;
      ++r;
    }
    for (int i = r; i < rows; ++i)
      if (M(i, rank) != 0) return;  // inconsistent
    VectorX<Rational> y(rank);
    for (int c = 0; c < rank; ++c) {
      y[c] = M(pivot_of_col[c], rank) / M(pivot_of_col[c], c);
      if (y[c] < 0) return;
    }
    StoppingFlow<Rational> f;
    f.tree = &tree;
    f.stop = VectorX<Rational>::Zero(n);
    f.cont = VectorX<Rational>::Zero(n);
    for (int k = 0; k < rank; ++k) {
      int col = chosen[k];
      if (col < stop_cols)
        f.stop[col_owner[col]] = y[k];
      else
        f.cont[col_owner[col]] = y[k];
    }
    std::string key;
    for (int v = 0; v < n; ++v)
      key += format_rational(f.stop[v]) + "," + format_rational(f.cont[v]) + ";";
    if (seen.insert(key).second) out.push_back(std::move(f));
  };
  std::function<void(int)> rec = [&](int from) {
    if (static_cast<int>(chosen.size()) == rank) {
      try_basis();
      return;
    }
    int need = rank - static_cast<int>(chosen.size());
    for (int c = from; c + need <= cols; ++c) {
      chosen.push_back(c);
      rec(c + 1);
      chosen.pop_back();
    }
  };
  rec(0);
  return out;
}

inline Rational best_vertex_value(const std::vector<StoppingFlow<Rational>>& flows,
                                  const PayoffEvaluator<Rational>& xi) {
  Rational best;
  bool have = false;
  for (const auto& f : flows) {
    Rational v = f.expected_payoff(xi);
    if (!have || v > best) {
      best = v;
      have = true;
    }
  }
  return best;
}

// The constructed suboptimal flow on the three-point instance at horizon 6:
// stops a third of the mass at the root, routes mass through (t=2, x=0) and
// stops it at (t=4, x in {-2,0,2}).
inline StoppingFlow<Rational> detour_flow_three_point(const PathTree& full6) {
  std::vector<Rational> frac(full6.num_nodes(), Rational(0));
  for (int v = 0; v < full6.num_nodes(); ++v) {
    const TreeNode& n = full6.node(v);
    if (n.t == 0) frac[v] = Rational(1, 3);
    else if (n.t == 2 && (n.value == 2 || n.value == -2)) frac[v] = 1;
    else if (n.t == 4) frac[v] = 1;
  }
  return flow_from_stop_fractions(full6, frac);
}

}  // namespace sep::testing
