#include "sep/walkspace.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

namespace sep {

// ---------------------------------------------------------------------------
// Rational parsing / formatting
// ---------------------------------------------------------------------------

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw io_error("empty rational literal");
  auto slash = s.find('/');
  try {
    if (slash != std::string::npos) {
      Rational r(mpz_class(s.substr(0, slash), 10),
                 mpz_class(s.substr(slash + 1), 10));
      if (r.get_den() == 0) throw io_error("zero denominator: " + text);
      r.canonicalize();
      return r;
    }
    // decimal with optional exponent; exactly representable as a rational
    mpz_class exp_shift(1);
    bool exp_negative = false;
    auto epos = s.find_first_of("eE");
    if (epos != std::string::npos) {
      long e = std::stol(s.substr(epos + 1));
      exp_negative = e < 0;
      for (long i = 0; i < std::labs(e); ++i) exp_shift *= 10;
      s = s.substr(0, epos);
    }
    auto dot = s.find('.');
    std::string digits = s;
    std::size_t frac_len = 0;
    if (dot != std::string::npos) {
      digits = s.substr(0, dot) + s.substr(dot + 1);
      frac_len = s.size() - dot - 1;
    }
    if (digits.empty() || digits == "-" || digits == "+")
      throw io_error("bad rational literal: " + text);
    mpz_class num(digits, 10);
    mpz_class den(1);
    for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
    Rational r(exp_negative ? num : num * exp_shift,
               exp_negative ? den * exp_shift : den);
    r.canonicalize();
    return r;
  } catch (const std::invalid_argument&) {
    throw io_error("bad rational literal: " + text);
  }
}

std::string format_rational(const Rational& r) {
  if (r.get_den() == 1) return r.get_num().get_str();
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

// ---------------------------------------------------------------------------
// PayoffSpec
// ---------------------------------------------------------------------------

PayoffSpec PayoffSpec::terminal(std::map<int, Rational> table) {
  PayoffSpec s;
  s.kind = PayoffKind::Terminal;
  s.terminal_table = std::move(table);
  for (auto& [x, v] : s.terminal_table) v.canonicalize();
  return s;
}

PayoffSpec PayoffSpec::terminal_abs(const Rational& strike, int horizon) {
  PayoffSpec s;
  s.kind = PayoffKind::Terminal;
  Rational k = strike;
  k.canonicalize();
  for (int x = -horizon; x <= horizon; ++x) {
    Rational v = Rational(x) - k;
    s.terminal_table[x] = v < 0 ? Rational(-v) : v;
  }
  return s;
}

PayoffSpec PayoffSpec::time_value(std::map<std::pair<int, int>, Rational> table) {
  PayoffSpec s;
  s.kind = PayoffKind::TimeValue;
  s.time_value_table = std::move(table);
  for (auto& [tx, v] : s.time_value_table) v.canonicalize();
  return s;
}

PayoffSpec PayoffSpec::custom(
    int horizon, std::map<std::pair<std::uint64_t, int>, Rational> table) {
  PayoffSpec s;
  s.kind = PayoffKind::Custom;
  s.custom_horizon = horizon;
  s.custom_table = std::move(table);
  for (auto& [key, v] : s.custom_table) v.canonicalize();
  return s;
}

bool PayoffSpec::expressible_in(TreeMode mode, Statistic stat) const {
  if (mode == TreeMode::Full) return true;
  switch (kind) {
    case PayoffKind::RunningMax:
      return stat == Statistic::TimeValueMax;
    case PayoffKind::Custom:
      return false;  // node tables carry whole paths
    default:
      return true;  // functions of (theta, value)
  }
}

std::string PayoffSpec::kind_name() const {
  switch (kind) {
    case PayoffKind::RunningMax: return "running_max";
    case PayoffKind::NegTau: return "neg_tau";
    case PayoffKind::NegTauSq: return "neg_tau_sq";
    case PayoffKind::TauSq: return "tau_sq";
    case PayoffKind::Terminal: return "terminal";
    case PayoffKind::TimeValue: return "time_value";
    case PayoffKind::Custom: return "custom";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// PayoffEvaluator
// ---------------------------------------------------------------------------

template <class S>
PayoffEvaluator<S>::PayoffEvaluator(PayoffSpec spec, const PathTree& tree)
    : spec_(std::move(spec)), tree_(&tree) {
  if (!spec_.expressible_in(tree.mode(), tree.statistic()))
    throw config_error("payoff '" + spec_.kind_name() +
                       "' is not a function of the declared tree statistic");
  if (spec_.kind == PayoffKind::Custom) {
    if (spec_.custom_horizon != tree.horizon())
      throw config_error("custom payoff table horizon mismatch");
    std::uint64_t leaves = std::uint64_t(1) << tree.horizon();
    for (std::uint64_t path = 0; path < leaves; ++path)
      for (int th = 0; th <= tree.horizon(); ++th)
        if (!spec_.custom_table.count({path, th}))
          throw config_error("custom payoff table incomplete");
  }
  if (spec_.kind == PayoffKind::Terminal) {
    for (int x = -tree.horizon(); x <= tree.horizon(); ++x)
      if (!spec_.terminal_table.count(x))
        throw config_error("terminal payoff table misses grid point " +
                           std::to_string(x));
  }
  if (spec_.kind == PayoffKind::TimeValue) {
    for (int t = 0; t <= tree.horizon(); ++t)
      for (int x = -t; x <= t; x += 2)
        if (!spec_.time_value_table.count({t, x}))
          throw config_error("time-value payoff table misses (t,x)=(" +
                             std::to_string(t) + "," + std::to_string(x) + ")");
  }
  node_values_.resize(tree.num_nodes());
  for (int v = 0; v < tree.num_nodes(); ++v) {
    const TreeNode& n = tree.node(v);
    node_values_[v] = at_stat(PathStat{n.t, n.value, n.max_value, n.path});
  }
}

template <class S>
S PayoffEvaluator<S>::at_stat(const PathStat& st) const {
  switch (spec_.kind) {
    case PayoffKind::RunningMax:
      return S(st.max_value);
    case PayoffKind::NegTau:
      return S(-st.theta);
    case PayoffKind::NegTauSq:
      return S(-st.theta * st.theta);
    case PayoffKind::TauSq:
      return S(st.theta * st.theta);
    case PayoffKind::Terminal:
      return from_rational<S>(spec_.terminal_table.at(st.value));
    case PayoffKind::TimeValue:
      return from_rational<S>(spec_.time_value_table.at({st.theta, st.value}));
    case PayoffKind::Custom: {
      // Canonical extension: pad with down-steps to the horizon (unset high
      // bits). For a well-formed table the extension is immaterial;
      // check_nonanticipative verifies exactly that.
      auto it = spec_.custom_table.find({st.path, st.theta});
      if (it == spec_.custom_table.end())
        throw config_error("custom payoff table lookup failed");
      return from_rational<S>(it->second);
    }
  }
  throw config_error("unknown payoff kind");
}

template <class S>
S PayoffEvaluator<S>::at_raw(std::uint64_t full_path, int theta) const {
  if (spec_.kind == PayoffKind::Custom) {
    auto it = spec_.custom_table.find({full_path, theta});
    if (it == spec_.custom_table.end())
      throw config_error("custom payoff table lookup failed");
    return from_rational<S>(it->second);
  }
  // stats of the stopped part of the path
  int v = 0, m = 0;
  std::uint64_t bits = 0;
  for (int i = 0; i < theta; ++i) {
    int step = (full_path >> i) & 1 ? 1 : -1;
    v += step;
    m = std::max(m, v);
    if (step > 0) bits |= std::uint64_t(1) << i;
  }
  return at_stat(PathStat{theta, v, m, bits});
}

template <class S>
S PayoffEvaluator<S>::at_prefix(const PathPrefix& p) const {
  p.validate();
  if (p.theta > tree_->horizon())
    throw config_error("prefix deeper than tree horizon");
  std::uint64_t bits = 0;
  for (int i = 0; i < p.theta; ++i)
    if (p.steps[i] > 0) bits |= std::uint64_t(1) << i;
  return at_stat(PathStat{p.theta, p.endpoint(), p.running_max(), bits});
}

template class PayoffEvaluator<double>;
template class PayoffEvaluator<Rational>;

// ---------------------------------------------------------------------------
// Non-anticipativity check
// ---------------------------------------------------------------------------

NonAnticipativityReport check_nonanticipative(const PayoffSpec& spec,
                                              const PathTree& tree) {
  if (tree.mode() != TreeMode::Full)
    throw config_error("non-anticipativity check requires a full tree");
  PayoffEvaluator<Rational> eval(spec, tree);
  NonAnticipativityReport report;
  int N = tree.horizon();
  std::uint64_t leaves = std::uint64_t(1) << N;
  for (int theta = 0; theta <= N; ++theta) {
    std::uint64_t prefix_count = std::uint64_t(1) << theta;
    std::uint64_t tails = std::uint64_t(1) << (N - theta);
    for (std::uint64_t prefix = 0; prefix < prefix_count; ++prefix) {
      ++report.prefixes_checked;
      Rational ref;
      std::uint64_t ref_path = 0;
      bool have_ref = false;
      for (std::uint64_t tail = 0; tail < tails; ++tail) {
        std::uint64_t full = prefix | (tail << theta);
        if (full >= leaves) break;
        Rational val = eval.at_raw(full, theta);
        if (!have_ref) {
          ref = val;
          ref_path = full;
          have_ref = true;
        } else if (val != ref) {
          AnticipationViolation v;
          v.prefix_node = tree.full_node_at(theta, prefix);
          v.theta = theta;
          v.witness_a = ref_path;
          v.witness_b = full;
          v.value_a = format_rational(ref);
          v.value_b = format_rational(val);
          report.violations.push_back(std::move(v));
          break;  // one witness per prefix
        }
      }
    }
  }
  return report;
}

}  // namespace sep
