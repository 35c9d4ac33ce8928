#pragma once

#include "sep/rational.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace sep {

enum class Relation { LE, GE, EQ };
enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* lp_status_name(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration_limit";
  }
  return "?";
}

template <class S>
struct LinearProgram {
  struct Row {
    std::vector<std::pair<int, S>> coeffs;
    Relation rel = Relation::EQ;
    S rhs{};
  };

  bool maximize = true;
  std::vector<S> objective;
  std::vector<unsigned char> free_var;  // nonzero: unrestricted sign
  std::vector<Row> rows;

  int num_vars() const { return static_cast<int>(objective.size()); }

  int add_variable(S obj, bool is_free = false) {
    objective.push_back(std::move(obj));
    free_var.push_back(is_free ? 1 : 0);
    return num_vars() - 1;
  }

  void add_row(std::vector<std::pair<int, S>> coeffs, Relation rel, S rhs) {
    rows.push_back(Row{std::move(coeffs), rel, std::move(rhs)});
  }
};

struct LpOptions {
  double tol = 1e-9;        // pivot/feasibility tolerance (ignored when exact)
  long max_iterations = 0;  // 0: automatic
  std::uint64_t seed = 0;
  bool randomize = false;   // randomized entering-variable choice
};

template <class S>
struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  S value{};
  std::vector<S> x;
  /// Row multipliers at optimality: duals.b == value; for a maximization,
  /// c_j - duals.A_j <= 0 on x>=0 columns (= 0 on free columns); reversed
  /// inequality for minimization.
  std::vector<S> duals;
  /// Infeasibility certificate: farkas.b > 0 while farkas.A_j <= 0 on x>=0
  /// columns, = 0 on free columns, with farkas_i <= 0 on LE rows and >= 0 on
  /// GE rows.
  std::vector<S> farkas;
  long iterations = 0;
};

namespace detail {

template <class S>
class SimplexTableau {
 public:
  SimplexTableau(const LinearProgram<S>& lp, const LpOptions& opt)
      : lp_(lp), opt_(opt), rng_(opt.seed) {
    if constexpr (scalar_traits<S>::exact)
      tol_ = S(0);
    else
      tol_ = S(opt.tol);
    build();
  }

  LpSolution<S> solve() {
    LpSolution<S> sol;
    long budget = opt_.max_iterations > 0
                      ? opt_.max_iterations
                      : 2000 + 200L * (m_ + total_cols_);

    if (num_artificial_ > 0) {
      set_phase1_objective();
      LpStatus st = iterate(true, budget, sol.iterations);
      if (st == LpStatus::IterationLimit) {
        sol.status = st;
        return sol;
      }
      S infeas = phase1_infeasibility();
      if (infeas > tol_) {
        sol.status = LpStatus::Infeasible;
        sol.farkas = extract_farkas();
        return sol;
      }
      drive_out_artificials();
    }

    set_phase2_objective();
    LpStatus st = iterate(false, budget, sol.iterations);
    if (st != LpStatus::Optimal) {
      sol.status = st;
      return sol;
    }
    sol.status = LpStatus::Optimal;
    sol.x = extract_primal();
    sol.value = S(0);
    for (int j = 0; j < lp_.num_vars(); ++j)
      sol.value += lp_.objective[j] * sol.x[j];
    sol.duals = extract_duals();
    return sol;
  }

 private:
  void build() {
    int n = lp_.num_vars();
    col_pos_.resize(n);
    col_neg_.assign(n, -1);
    int c = 0;
    for (int j = 0; j < n; ++j) {
      col_pos_[j] = c++;
      if (lp_.free_var[j]) col_neg_[j] = c++;
    }
    struct_cols_ = c;

    m_ = static_cast<int>(lp_.rows.size());
    flip_.assign(m_, false);
    slack_col_.assign(m_, -1);
    art_col_.assign(m_, -1);

    int slack_count = 0, art_count = 0;
    for (int i = 0; i < m_; ++i) {
      Relation rel = lp_.rows[i].rel;
      bool flip = lp_.rows[i].rhs < S(0);
      if (flip && rel == Relation::LE) rel = Relation::GE;
      else if (flip && rel == Relation::GE) rel = Relation::LE;
      flip_[i] = flip;
      if (rel != Relation::EQ) ++slack_count;
      if (rel != Relation::LE) ++art_count;
      norm_rel_.push_back(rel);
    }
    slack_begin_ = struct_cols_;
    art_begin_ = slack_begin_ + slack_count;
    total_cols_ = art_begin_ + art_count;
    num_artificial_ = art_count;

    T_.setZero(m_, total_cols_ + 1);  // last column: rhs
    basis_.assign(m_, -1);

    int next_slack = slack_begin_, next_art = art_begin_;
    for (int i = 0; i < m_; ++i) {
      const auto& row = lp_.rows[i];
      S sign = flip_[i] ? S(-1) : S(1);
      for (const auto& [j, a] : row.coeffs) {
        S v = sign * a;
        T_(i, col_pos_[j]) += v;
        if (col_neg_[j] >= 0) T_(i, col_neg_[j]) -= v;
      }
      T_(i, total_cols_) = sign * row.rhs;
      if (norm_rel_[i] == Relation::LE) {
        slack_col_[i] = next_slack++;
        T_(i, slack_col_[i]) = S(1);
        basis_[i] = slack_col_[i];
      } else if (norm_rel_[i] == Relation::GE) {
        slack_col_[i] = next_slack++;
        T_(i, slack_col_[i]) = S(-1);
      }
      if (norm_rel_[i] != Relation::LE) {
        art_col_[i] = next_art++;
        T_(i, art_col_[i]) = S(1);
        basis_[i] = art_col_[i];
      }
    }
    zrow_.setZero(total_cols_ + 1);
  }

  // Internal objective is always "maximize". Phase 1 maximizes -sum(art).
  void set_phase1_objective() {
    cost_.assign(total_cols_, S(0));
    for (int i = 0; i < m_; ++i)
      if (art_col_[i] >= 0) cost_[art_col_[i]] = S(-1);
    barred_.assign(total_cols_, 0);
    recompute_zrow();
  }

  void set_phase2_objective() {
    cost_.assign(total_cols_, S(0));
    S sense = lp_.maximize ? S(1) : S(-1);
    for (int j = 0; j < lp_.num_vars(); ++j) {
      cost_[col_pos_[j]] = sense * lp_.objective[j];
      if (col_neg_[j] >= 0) cost_[col_neg_[j]] = -sense * lp_.objective[j];
    }
    barred_.assign(total_cols_, 0);
    for (int i = 0; i < m_; ++i)
      if (art_col_[i] >= 0) barred_[art_col_[i]] = 1;
    recompute_zrow();
  }

  void recompute_zrow() {
    zrow_.setZero(total_cols_ + 1);
    for (int i = 0; i < m_; ++i) {
      const S& cb = cost_[basis_[i]];
      if (cb != S(0)) zrow_ += cb * T_.row(i).transpose();
    }
    for (int j = 0; j < total_cols_; ++j) zrow_[j] -= cost_[j];
  }

  LpStatus iterate(bool phase1, long budget, long& iterations) {
    long stall = 0;
    S last_obj = current_objective();
    bool force_bland = false;
    const long stall_limit = 400 + 4L * m_;
    while (true) {
      if (iterations >= budget) return LpStatus::IterationLimit;
      int enter = choose_entering(force_bland);
      if (enter < 0) return LpStatus::Optimal;
      int leave = ratio_test(enter);
      if (leave < 0) return LpStatus::Unbounded;
      pivot(leave, enter);
      ++iterations;
      S obj = current_objective();
      if (obj > last_obj) {
        last_obj = obj;
        stall = 0;
        force_bland = false;
      } else if (++stall > stall_limit) {
        force_bland = true;  // anti-cycling fallback
      }
      (void)phase1;
    }
  }

  S current_objective() const {
    S z(0);
    for (int i = 0; i < m_; ++i) z += cost_[basis_[i]] * T_(i, total_cols_);
    return z;
  }

  // Dantzig by default, randomized when requested; stalled degeneracy
  // switches to Bland until the objective moves again.
  int choose_entering(bool force_bland) {
    if (force_bland) {
      for (int j = 0; j < total_cols_; ++j)
        if (!barred_[j] && zrow_[j] < -tol_) return j;
      return -1;
    }
    if (opt_.randomize) {
      std::vector<int> eligible;
      for (int j = 0; j < total_cols_; ++j)
        if (!barred_[j] && zrow_[j] < -tol_) eligible.push_back(j);
      if (eligible.empty()) return -1;
      std::uniform_int_distribution<std::size_t> d(0, eligible.size() - 1);
      return eligible[d(rng_)];
    }
    int best = -1;
    S best_val(0);
    for (int j = 0; j < total_cols_; ++j) {
      if (barred_[j]) continue;
      if (zrow_[j] < -tol_ && (best < 0 || zrow_[j] < best_val)) {
        best = j;
        best_val = zrow_[j];
      }
    }
    return best;
  }

  int ratio_test(int enter) {
    int leave = -1;
    S best_ratio(0);
    for (int i = 0; i < m_; ++i) {
      const S& a = T_(i, enter);
      if (a <= tol_) continue;
      S rhs = T_(i, total_cols_);
      if (rhs < S(0)) rhs = S(0);  // guard roundoff in floating mode
      S ratio = rhs / a;
      if (leave < 0 || ratio < best_ratio ||
          (ratio == best_ratio && basis_[i] < basis_[leave])) {
        leave = i;
        best_ratio = ratio;
      }
    }
    return leave;
  }

  void pivot(int row, int col) {
    S p = T_(row, col);
    T_.row(row) /= p;
    for (int k = 0; k < m_; ++k) {
      if (k == row) continue;
      const S& f = T_(k, col);
      if (f != S(0)) T_.row(k) -= f * T_.row(row);
    }
    const S& fz = zrow_[col];
    if (fz != S(0)) zrow_ -= fz * T_.row(row).transpose();
    basis_[row] = col;
  }

  S phase1_infeasibility() const {
    S total(0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= art_begin_) total += T_(i, total_cols_);
    return total;
  }

  void drive_out_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < art_begin_) continue;
      int target = -1;
      for (int j = 0; j < art_begin_; ++j) {
        const S& a = T_(i, j);
        if (a > tol_ || a < -tol_) {
          target = j;
          break;
        }
      }
      if (target >= 0) pivot(i, target);
      // else: redundant row; the artificial stays basic at level zero.
    }
  }

  std::vector<S> extract_primal() const {
    std::vector<S> col_val(total_cols_, S(0));
    for (int i = 0; i < m_; ++i) col_val[basis_[i]] = T_(i, total_cols_);
    std::vector<S> x(lp_.num_vars());
    for (int j = 0; j < lp_.num_vars(); ++j) {
      x[j] = col_val[col_pos_[j]];
      if (col_neg_[j] >= 0) x[j] -= col_val[col_neg_[j]];
    }
    return x;
  }

  // Row multipliers of the normalized system read off the z-row under each
  // row's identity column, then mapped back to original row orientation.
  std::vector<S> normalized_multipliers() const {
    std::vector<S> y(m_, S(0));
    for (int i = 0; i < m_; ++i) {
      if (art_col_[i] >= 0) {
        y[i] = zrow_[art_col_[i]] + cost_[art_col_[i]];
      } else {
        y[i] = zrow_[slack_col_[i]] + cost_[slack_col_[i]];
      }
    }
    return y;
  }

  std::vector<S> extract_duals() const {
    std::vector<S> y = normalized_multipliers();
    S sense = lp_.maximize ? S(1) : S(-1);
    for (int i = 0; i < m_; ++i) {
      if (flip_[i]) y[i] = -y[i];
      y[i] *= sense;
    }
    return y;
  }

  std::vector<S> extract_farkas() const {
    std::vector<S> y = normalized_multipliers();
    for (int i = 0; i < m_; ++i) {
      y[i] = -y[i];
      if (flip_[i]) y[i] = -y[i];
    }
    return y;
  }

  const LinearProgram<S>& lp_;
  LpOptions opt_;
  std::mt19937_64 rng_;
  S tol_{};

  int m_ = 0, struct_cols_ = 0, slack_begin_ = 0, art_begin_ = 0,
      total_cols_ = 0, num_artificial_ = 0;
  std::vector<int> col_pos_, col_neg_, slack_col_, art_col_, basis_;
  std::vector<Relation> norm_rel_;
  std::vector<bool> flip_;
  std::vector<S> cost_;
  std::vector<unsigned char> barred_;
  MatrixX<S> T_;
  VectorX<S> zrow_;
};

}  // namespace detail

template <class S>
LpSolution<S> solve_lp(const LinearProgram<S>& lp, const LpOptions& opt = {}) {
  detail::SimplexTableau<S> tab(lp, opt);
  return tab.solve();
}

}  // namespace sep
