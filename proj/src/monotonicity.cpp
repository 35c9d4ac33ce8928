#include "sep/monotonicity.hpp"

#include <algorithm>
#include <thread>

namespace sep {

ContactSet lower_extension(const ContactSet& gamma, const PathTree& tree) {
  if (tree.mode() != TreeMode::Full)
    throw config_error("lower_extension requires a full tree");
  ContactSet out;
  out.source = gamma.source;
  out.in.assign(tree.num_nodes(), 0);
  // desc[v] = some strict descendant of v lies in gamma
  for (int t = tree.horizon() - 1; t >= 0; --t) {
    for (int v = tree.level_begin(t); v < tree.level_end(t); ++v) {
      const TreeNode& n = tree.node(v);
      for (int c : n.child)
        if (gamma.in[c] || out.in[c]) out.in[v] = 1;
    }
  }
  for (int v = 0; v < tree.num_nodes(); ++v)
    if (out.in[v]) out.members.push_back(v);
  return out;
}

namespace {

template <class S>
struct KernelView {
  const PayoffEvaluator<S>* xi;
  bool custom;
  S at(int theta, int value, int maxv, std::uint64_t path) const {
    return xi->at_stat(PathStat{theta, value, maxv, path});
  }
};

// Verdict of the all-continuations comparison for one (first, second)
// signature class.
template <class S>
struct SgVerdict {
  enum Kind { Member, Excluded, Censored } kind = Member;
  S margin{};
  std::string witness;
  int witness_theta = 0;
};

// first = (theta_a, max_a, path_a), second = (theta_b, max_b, path_b), common
// endpoint value x. Continuations range over stopped paths of length 1..d.
template <class S>
SgVerdict<S> sg_class_verdict(const KernelView<S>& k, int horizon, int x,
                              int theta_a, int max_a, std::uint64_t path_a,
                              int theta_b, int max_b, std::uint64_t path_b,
                              const S& eps) {
  SgVerdict<S> out;
  int d = horizon - std::max(theta_a, theta_b);
  if (d == 0) {
    out.kind = SgVerdict<S>::Censored;
    return out;
  }
  const S xi_a = k.at(theta_a, x, max_a, path_a);
  const S xi_b = k.at(theta_b, x, max_b, path_b);
  bool have_min = false;
  S min_gap{};
  std::string stack_chars;
  // depth-first over continuations; every visited prefix is one continuation
  struct Frame {
    int len;
    int off;
    int moff;
    std::uint64_t bits;
  };
  std::vector<Frame> stack;
  stack.push_back({0, 0, 0, 0});
  std::vector<std::uint64_t> path_of_len(d + 1, 0);
  // iterative DFS with explicit enumeration of both steps
  struct Item {
    int len, off, moff;
    std::uint64_t bits;
  };
  std::vector<Item> todo;
  todo.push_back({0, 0, 0, 0});
  while (!todo.empty()) {
    Item it = todo.back();
    todo.pop_back();
    for (int step : {+1, -1}) {
      int len = it.len + 1;
      int off = it.off + step;
      int moff = std::max(it.moff, off);
      std::uint64_t bits = step > 0 ? (it.bits | (std::uint64_t(1) << it.len))
                                    : it.bits;
      S swap_v = k.at(theta_b + len, x + off, std::max(max_b, x + moff),
                      path_b | (bits << theta_b));
      S stay_v = k.at(theta_a + len, x + off, std::max(max_a, x + moff),
                      path_a | (bits << theta_a));
      S gap = xi_a + swap_v - stay_v - xi_b;
      if (gap <= eps) {
        out.kind = SgVerdict<S>::Excluded;
        out.margin = gap;
        out.witness_theta = len;
        out.witness.clear();
        for (int i = 0; i < len; ++i)
          out.witness.push_back(((bits >> i) & 1) ? 'U' : 'D');
        return out;
      }
      if (!have_min || gap < min_gap) {
        min_gap = gap;
        have_min = true;
      }
      if (len < d) todo.push_back({len, off, moff, bits});
    }
  }
  out.kind = SgVerdict<S>::Member;
  out.margin = min_gap;
  return out;
}

template <class S>
void sort_pairs(std::vector<SGPairRecord<S>>& v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
}

std::vector<std::vector<int>> value_groups(const PathTree& tree) {
  int N = tree.horizon();
  std::vector<std::vector<int>> groups(2 * N + 1);
  for (int v = 0; v < tree.num_nodes(); ++v)
    groups[tree.node(v).value + N].push_back(v);
  return groups;
}

template <class S>
void merge_from(SGPairSet<S>& into, SGPairSet<S>& from) {
  auto move_all = [](auto& dst, auto& src) {
    dst.insert(dst.end(), std::make_move_iterator(src.begin()),
               std::make_move_iterator(src.end()));
  };
  move_all(into.members, from.members);
  move_all(into.excluded, from.excluded);
  move_all(into.censored, from.censored);
  into.candidates += from.candidates;
}

}  // namespace

template <class S>
SGPairSet<S> enumerate_sg(const PayoffEvaluator<S>& xi, const PathTree& tree,
                          const SGOptions& opt) {
  if (tree.mode() != TreeMode::Full)
    throw config_error("stop-go enumeration requires a full tree");
  const S eps = scalar_traits<S>::exact ? S(0) : S(opt.eps_sg);
  const bool custom = xi.spec().kind == PayoffKind::Custom;
  KernelView<S> kernel{&xi, custom};
  auto groups = value_groups(tree);

  auto process_group = [&](const std::vector<int>& group, SGPairSet<S>& out) {
    if (group.size() < 2) return;
    const int x = tree.node(group.front()).value;
    if (!custom) {
      // collapse nodes into (theta, running max) signature classes
      std::map<std::pair<int, int>, std::vector<int>> sig;
      for (int v : group)
        sig[{tree.node(v).t, tree.node(v).max_value}].push_back(v);
      for (const auto& [sa, va] : sig) {
        for (const auto& [sb, vb] : sig) {
          long pair_count = static_cast<long>(va.size()) * vb.size();
          if (sa == sb) pair_count -= static_cast<long>(va.size());
          if (pair_count <= 0) continue;
          out.candidates += pair_count;
          SgVerdict<S> verdict =
              sg_class_verdict(kernel, tree.horizon(), x, sa.first, sa.second,
                               0, sb.first, sb.second, 0, eps);
          for (int a : va)
            for (int b : vb) {
              if (a == b) continue;
              SGPairRecord<S> rec;
              rec.first = a;
              rec.second = b;
              rec.margin = verdict.margin;
              rec.witness = verdict.witness;
              rec.witness_theta = verdict.witness_theta;
              switch (verdict.kind) {
                case SgVerdict<S>::Member: out.members.push_back(rec); break;
                case SgVerdict<S>::Excluded: out.excluded.push_back(rec); break;
                case SgVerdict<S>::Censored: out.censored.push_back(rec); break;
              }
            }
        }
      }
    } else {
      for (int a : group)
        for (int b : group) {
          if (a == b) continue;
          ++out.candidates;
          const TreeNode& na = tree.node(a);
          const TreeNode& nb = tree.node(b);
          SgVerdict<S> verdict =
              sg_class_verdict(kernel, tree.horizon(), x, na.t, na.max_value,
                               na.path, nb.t, nb.max_value, nb.path, eps);
          SGPairRecord<S> rec;
          rec.first = a;
          rec.second = b;
          rec.margin = verdict.margin;
          rec.witness = verdict.witness;
          rec.witness_theta = verdict.witness_theta;
          switch (verdict.kind) {
            case SgVerdict<S>::Member: out.members.push_back(rec); break;
            case SgVerdict<S>::Excluded: out.excluded.push_back(rec); break;
            case SgVerdict<S>::Censored: out.censored.push_back(rec); break;
          }
        }
    }
  };

  SGPairSet<S> result;
  result.flavor = SGFlavor::SG;
  if (tree.num_nodes() > opt.warn_above_nodes)
    result.cost_warning =
        "pair enumeration is quadratic in the node count (" +
        std::to_string(tree.num_nodes()) + " nodes)";
  int threads = std::max(1, opt.threads);
  if (threads == 1) {
    for (const auto& g : groups) process_group(g, result);
  } else {
    std::vector<SGPairSet<S>> partial(threads);
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k)
      pool.emplace_back([&, k] {
        for (std::size_t gi = k; gi < groups.size(); gi += threads)
          process_group(groups[gi], partial[k]);
      });
    for (auto& th : pool) th.join();
    for (auto& p : partial) merge_from(result, p);
  }
  sort_pairs(result.members);
  sort_pairs(result.excluded);
  sort_pairs(result.censored);
  return result;
}

namespace {

// Atoms of Q* at v cut at continuation depth d: stopped continuations keep
// their own length, mass continuing past the cut is force-stopped there.
template <class S>
struct CutProfile {
  struct Atom {
    int len;
    int off;
    int moff;
    std::uint64_t bits;
    S mass;
  };
  std::vector<Atom> atoms;
  S truncated_mass{};
};

template <class S>
CutProfile<S> cut_profile(const StoppingFlow<S>& flow, int v, int d,
                          const S& dust) {
  const PathTree& tree = *flow.tree;
  CutProfile<S> prof;
  prof.truncated_mass = S(0);
  struct Item {
    int node;
    int len;
    int off;
    int moff;
    std::uint64_t bits;
  };
  std::vector<Item> todo;
  const TreeNode& nv = tree.node(v);
  todo.push_back({v, 0, 0, 0, 0});
  while (!todo.empty()) {
    Item it = todo.back();
    todo.pop_back();
    const TreeNode& n = tree.node(it.node);
    if (it.len > 0 && flow.stop[it.node] != S(0))
      prof.atoms.push_back(
          {it.len, it.off, it.moff, it.bits, flow.stop[it.node]});
    if (it.len == d) {
      // mass continuing past the cut is force-stopped here (censoring)
      if (flow.cont[it.node] > dust) {
        prof.atoms.push_back(
            {it.len, it.off, it.moff, it.bits, flow.cont[it.node]});
        prof.truncated_mass += flow.cont[it.node];
      }
      continue;
    }
    if (tree.is_leaf(it.node)) continue;
    for (int s : {0, 1}) {
      int child = n.child[s];
      int step = s ? 1 : -1;
      int off = it.off + step;
      std::uint64_t bits =
          s ? (it.bits | (std::uint64_t(1) << it.len)) : it.bits;
      todo.push_back({child, it.len + 1, off, std::max(it.moff, off), bits});
    }
  }
  (void)nv;
  return prof;
}

// E[xi(prefix ⊗ truncated continuation)] under the profile (unnormalized).
template <class S>
S fold_profile(const KernelView<S>& k, const CutProfile<S>& prof, int theta,
               int x, int maxv, std::uint64_t path) {
  S acc(0);
  for (const auto& a : prof.atoms)
    acc += a.mass * k.at(theta + a.len, x + a.off, std::max(maxv, x + a.moff),
                         path | (a.bits << theta));
  return acc;
}

}  // namespace

template <class S>
SGPairSet<S> enumerate_sg_star(const PayoffEvaluator<S>& xi,
                               const StoppingFlow<S>& flow,
                               const SGOptions& opt) {
  const PathTree& tree = *flow.tree;
  if (tree.mode() != TreeMode::Full)
    throw config_error("stop-go enumeration requires a full tree");
  const S eps = scalar_traits<S>::exact ? S(0) : S(opt.eps_sg);
  const double dg_default =
      default_degenerate_tol(scalar_traits<S>::exact);
  const S dust = opt.degenerate_tol < 0 ? S(dg_default) : S(opt.degenerate_tol);
  const bool custom = xi.spec().kind == PayoffKind::Custom;
  KernelView<S> kernel{&xi, custom};
  auto groups = value_groups(tree);

  auto emit = [](SGPairSet<S>& out, SGPairRecord<S> rec, int kind) {
    if (kind == 0)
      out.members.push_back(std::move(rec));
    else if (kind == 1)
      out.excluded.push_back(std::move(rec));
    else
      out.censored.push_back(std::move(rec));
  };

  auto process_group = [&](const std::vector<int>& group, SGPairSet<S>& out) {
    if (group.size() < 2) return;
    const int x = tree.node(group.front()).value;
    for (int v : group) {
      const TreeNode& nv = tree.node(v);
      out.candidates += static_cast<long>(group.size()) - 1;
      if (flow.cont[v] <= dust) {
        // degenerate branch: Q* sits at theta'' = 0 and the gap vanishes
        for (int vp : group) {
          if (vp == v) continue;
          SGPairRecord<S> rec;
          rec.first = v;
          rec.second = vp;
          rec.margin = S(0);
          rec.witness = "degenerate";
          rec.swap_expectation = xi.at_node(vp);
          rec.stay_expectation = xi.at_node(v);
          emit(out, std::move(rec), 1);
        }
        continue;
      }
      const S xi_v = xi.at_node(v);
      std::map<int, CutProfile<S>> profiles;  // keyed by cut depth d
      auto profile_for = [&](int d) -> const CutProfile<S>& {
        auto it = profiles.find(d);
        if (it == profiles.end())
          it = profiles.emplace(d, cut_profile(flow, v, d, dust)).first;
        return it->second;
      };
      if (!custom) {
        std::map<std::pair<int, int>, std::vector<int>> sig;
        for (int vp : group) {
          if (vp == v) continue;
          sig[{tree.node(vp).t, tree.node(vp).max_value}].push_back(vp);
        }
        for (const auto& [sp, nodes] : sig) {
          int d = tree.horizon() - std::max(nv.t, sp.first);
          const CutProfile<S>& prof = profile_for(d);
          S stay = fold_profile(kernel, prof, nv.t, x, nv.max_value, 0) /
                   flow.cont[v];
          S swap = fold_profile(kernel, prof, sp.first, x, sp.second, 0) /
                   flow.cont[v];
          S xi_vp = kernel.at(sp.first, x, sp.second, 0);
          S gap = xi_v + swap - stay - xi_vp;
          bool censored = prof.truncated_mass > S(0);
          int kind = censored ? 2 : (gap > eps ? 0 : 1);
          for (int vp : nodes) {
            SGPairRecord<S> rec;
            rec.first = v;
            rec.second = vp;
            rec.margin = gap;
            rec.swap_expectation = swap;
            rec.stay_expectation = stay;
            emit(out, std::move(rec), kind);
          }
        }
      } else {
        for (int vp : group) {
          if (vp == v) continue;
          const TreeNode& np = tree.node(vp);
          int d = tree.horizon() - std::max(nv.t, np.t);
          const CutProfile<S>& prof = profile_for(d);
          S stay =
              fold_profile(kernel, prof, nv.t, x, nv.max_value, nv.path) /
              flow.cont[v];
          S swap =
              fold_profile(kernel, prof, np.t, x, np.max_value, np.path) /
              flow.cont[v];
          S gap = xi_v + swap - stay - xi.at_node(vp);
          bool censored = prof.truncated_mass > S(0);
          int kind = censored ? 2 : (gap > eps ? 0 : 1);
          SGPairRecord<S> rec;
          rec.first = v;
          rec.second = vp;
          rec.margin = gap;
          rec.swap_expectation = swap;
          rec.stay_expectation = stay;
          emit(out, std::move(rec), kind);
        }
      }
    }
  };

  SGPairSet<S> result;
  result.flavor = SGFlavor::SGStar;
  if (tree.num_nodes() > opt.warn_above_nodes)
    result.cost_warning =
        "pair enumeration is quadratic in the node count (" +
        std::to_string(tree.num_nodes()) + " nodes)";
  int threads = std::max(1, opt.threads);
  if (threads == 1) {
    for (const auto& g : groups) process_group(g, result);
  } else {
    std::vector<SGPairSet<S>> partial(threads);
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k)
      pool.emplace_back([&, k] {
        for (std::size_t gi = k; gi < groups.size(); gi += threads)
          process_group(groups[gi], partial[k]);
      });
    for (auto& th : pool) th.join();
    for (auto& p : partial) merge_from(result, p);
  }
  sort_pairs(result.members);
  sort_pairs(result.excluded);
  sort_pairs(result.censored);
  return result;
}

template SGPairSet<double> enumerate_sg(const PayoffEvaluator<double>&,
                                        const PathTree&, const SGOptions&);
template SGPairSet<Rational> enumerate_sg(const PayoffEvaluator<Rational>&,
                                          const PathTree&, const SGOptions&);
template SGPairSet<double> enumerate_sg_star(const PayoffEvaluator<double>&,
                                             const StoppingFlow<double>&,
                                             const SGOptions&);
template SGPairSet<Rational> enumerate_sg_star(
    const PayoffEvaluator<Rational>&, const StoppingFlow<Rational>&,
    const SGOptions&);

}  // namespace sep
