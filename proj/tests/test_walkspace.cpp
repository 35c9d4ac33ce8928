#include <doctest.h>

#include "sep/walkspace.hpp"

#include <random>

using namespace sep;

namespace {

PathPrefix random_prefix(std::mt19937_64& rng, int max_len) {
  std::uniform_int_distribution<int> len_d(0, max_len);
  int len = len_d(rng);
  PathPrefix p;
  for (int i = 0; i < len; ++i)
    p.steps.push_back(rng() & 1 ? 1 : -1);
  p.theta = len;
  return p;
}

long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

}  // namespace

TEST_CASE("tree construction node counts") {
  PathTree full1 = PathTree::build(1, TreeMode::Full);
  CHECK(full1.num_nodes() == 3);
  CHECK(full1.node(0).t == 0);
  CHECK(full1.node(0).value == 0);

  PathTree aug2 = PathTree::build(2, TreeMode::Augmented);
  CHECK(aug2.num_nodes() == 6);  // (0,0),(1,+-1),(2,0),(2,+-2)

  PathTree full3 = PathTree::build(3, TreeMode::Full);
  CHECK(full3.num_nodes() == 15);

  for (int t = 0; t <= 9; ++t) {
    PathTree aug = PathTree::build(9, TreeMode::Augmented);
    CHECK(aug.level_end(t) - aug.level_begin(t) <= t + 1);
  }

  CHECK_THROWS_AS(PathTree::build(17, TreeMode::Full), resource_error);
  CHECK_NOTHROW(PathTree::build(17, TreeMode::Full, Statistic::TimeValue, 17));
  CHECK_THROWS_AS(PathTree::build(0, TreeMode::Full), config_error);
}

TEST_CASE("full tree structure and augmented recombination") {
  PathTree full = PathTree::build(6, TreeMode::Full);
  // binomial path counts per (t, value)
  for (int t = 0; t <= 6; ++t) {
    std::map<int, long> count;
    for (int v = full.level_begin(t); v < full.level_end(t); ++v)
      ++count[full.node(v).value];
    for (const auto& [value, c] : count)
      CHECK(c == binomial(t, (t + value) / 2));
  }
  // parent/child consistency
  for (int v = 1; v < full.num_nodes(); ++v) {
    const TreeNode& n = full.node(v);
    const TreeNode& p = full.node(n.parent);
    CHECK(n.t == p.t + 1);
    CHECK(std::abs(n.value - p.value) == 1);
    CHECK(n.max_value == std::max(p.max_value, n.value));
  }
  // every augmented (t,value) state collects exactly its binomial fiber
  PathTree aug = PathTree::build(6, TreeMode::Augmented);
  std::vector<long> fiber(aug.num_nodes(), 0);
  for (int v = 0; v < full.num_nodes(); ++v) {
    const TreeNode& n = full.node(v);
    ++fiber[aug.state_node(n.t, n.value)];
  }
  for (int s = 0; s < aug.num_nodes(); ++s) {
    const TreeNode& n = aug.node(s);
    CHECK(fiber[s] == binomial(n.t, (n.t + n.value) / 2));
  }
}

TEST_CASE("node keys round trip") {
  for (TreeMode mode : {TreeMode::Full, TreeMode::Augmented}) {
    PathTree tree = PathTree::build(4, mode, Statistic::TimeValueMax);
    for (int v = 0; v < tree.num_nodes(); ++v)
      CHECK(tree.node_from_key(tree.node_key(v)) == v);
  }
  PathTree tree = PathTree::build(3, TreeMode::Full);
  CHECK_THROWS_AS(tree.node_from_key("t9:UUU"), io_error);
  CHECK_THROWS_AS(tree.node_from_key("garbage"), io_error);
}

TEST_CASE("concatenation") {
  PathPrefix a = PathPrefix::from_string("U");
  PathPrefix b = PathPrefix::from_string("D");
  PathPrefix ab = concat(a, b);
  CHECK(ab.theta == 2);
  CHECK(ab.value_at(0) == 0);
  CHECK(ab.value_at(1) == 1);
  CHECK(ab.value_at(2) == 0);

  PathPrefix empty = PathPrefix::empty();
  PathPrefix c = PathPrefix::from_string("UUDU");
  PathPrefix ec = concat(empty, c);
  CHECK(ec.theta == c.theta);
  CHECK(ec.to_string() == c.to_string());
  PathPrefix ce = concat(c, empty);
  CHECK(ce.to_string() == c.to_string());

  // steps beyond theta are dropped by concatenation
  PathPrefix truncated = PathPrefix::from_string("UUDU", 2);
  CHECK(concat(truncated, b).to_string() == "UUD");

  std::mt19937_64 rng(20240811);
  for (int trial = 0; trial < 200; ++trial) {
    PathPrefix x = random_prefix(rng, 6);
    PathPrefix y = random_prefix(rng, 6);
    PathPrefix z = random_prefix(rng, 6);
    PathPrefix lhs = concat(concat(x, y), z);
    PathPrefix rhs = concat(x, concat(y, z));
    CHECK(lhs.theta == rhs.theta);
    CHECK(lhs.to_string() == rhs.to_string());
  }
}

TEST_CASE("concatenation is associative on every prefix triple at horizon 4") {
  PathTree tree = PathTree::build(4, TreeMode::Full);
  std::vector<PathPrefix> prefixes;
  for (int v = 0; v < tree.num_nodes(); ++v)
    prefixes.push_back(tree.prefix_of(v));
  long checked = 0;
  for (const PathPrefix& a : prefixes)
    for (const PathPrefix& b : prefixes)
      for (const PathPrefix& c : prefixes) {
        PathPrefix lhs = concat(concat(a, b), c);
        PathPrefix rhs = concat(a, concat(b, c));
        if (lhs.theta != rhs.theta || lhs.to_string() != rhs.to_string()) {
          REQUIRE(false);
        }
        ++checked;
      }
  CHECK(checked == 31L * 31L * 31L);
  // the empty prefix is a two-sided identity
  for (const PathPrefix& a : prefixes) {
    CHECK(concat(a, PathPrefix::empty()).to_string() == a.to_string());
    CHECK(concat(PathPrefix::empty(), a).to_string() == a.to_string());
  }
}

TEST_CASE("running minimum") {
  PathPrefix p = PathPrefix::from_string("DDUU");
  CHECK(p.running_min() == -2);
  CHECK(p.running_max() == 0);
  CHECK(PathPrefix::empty().running_min() == 0);
}

TEST_CASE("payoff evaluation basics") {
  PathTree tree = PathTree::build(4, TreeMode::Full);
  PathPrefix ud = PathPrefix::from_string("UD");

  CHECK(eval_payoff<Rational>(PayoffSpec::running_max(), tree, ud) == 1);
  CHECK(eval_payoff<Rational>(PayoffSpec::running_max(), tree,
                              PathPrefix::empty()) == 0);
  PathPrefix three = PathPrefix::from_string("DDD");
  CHECK(eval_payoff<Rational>(PayoffSpec::neg_tau_sq(), tree, three) == -9);
  CHECK(eval_payoff<Rational>(PayoffSpec::neg_tau(), tree, three) == -3);
  CHECK(eval_payoff<Rational>(PayoffSpec::tau_sq(), tree, three) == 9);
  CHECK(eval_payoff<double>(PayoffSpec::terminal_abs(Rational(1), 4), tree,
                            three) == doctest::Approx(4.0));

  // running max of a negative path stays at the start value 0
  CHECK(eval_payoff<Rational>(PayoffSpec::running_max(), tree, three) == 0);
}

TEST_CASE("statistic expressibility is enforced") {
  PathTree aug_tv = PathTree::build(4, TreeMode::Augmented, Statistic::TimeValue);
  PathTree aug_tvm =
      PathTree::build(4, TreeMode::Augmented, Statistic::TimeValueMax);
  CHECK_THROWS_AS(PayoffEvaluator<Rational>(PayoffSpec::running_max(), aug_tv),
                  config_error);
  CHECK_NOTHROW(PayoffEvaluator<Rational>(PayoffSpec::running_max(), aug_tvm));
  CHECK_NOTHROW(PayoffEvaluator<Rational>(PayoffSpec::neg_tau_sq(), aug_tv));
}

TEST_CASE("full and augmented evaluations agree on expressible payoffs") {
  for (int N : {3, 6, 10}) {
    PathTree full = PathTree::build(N, TreeMode::Full);
    for (Statistic stat : {Statistic::TimeValue, Statistic::TimeValueMax}) {
      PathTree aug = PathTree::build(N, TreeMode::Augmented, stat);
      std::vector<PayoffSpec> specs = {PayoffSpec::neg_tau(),
                                       PayoffSpec::neg_tau_sq(),
                                       PayoffSpec::tau_sq(),
                                       PayoffSpec::terminal_abs(Rational(1), N)};
      if (stat == Statistic::TimeValueMax)
        specs.push_back(PayoffSpec::running_max());
      for (const PayoffSpec& spec : specs) {
        PayoffEvaluator<Rational> on_full(spec, full);
        PayoffEvaluator<Rational> on_aug(spec, aug);
        for (int v = 0; v < full.num_nodes(); ++v) {
          const TreeNode& n = full.node(v);
          int s = aug.state_node(n.t, n.value, n.max_value);
          REQUIRE(s >= 0);
          CHECK(on_full.at_node(v) == on_aug.at_node(s));
        }
      }
    }
  }
}

TEST_CASE("non-anticipativity check") {
  PathTree t3 = PathTree::build(3, TreeMode::Full);
  CHECK(check_nonanticipative(PayoffSpec::running_max(), t3).ok());
  PathTree t4 = PathTree::build(4, TreeMode::Full);
  CHECK(check_nonanticipative(PayoffSpec::neg_tau(), t4).ok());

  // a custom table depending on the step after theta
  std::map<std::pair<std::uint64_t, int>, Rational> table;
  for (std::uint64_t path = 0; path < 8; ++path)
    for (int th = 0; th <= 3; ++th) {
      Rational value(-th);
      if (th == 1 && ((path >> 1) & 1)) value += Rational(1, 2);
      table[{path, th}] = value;
    }
  PayoffSpec bad = PayoffSpec::custom(3, table);
  NonAnticipativityReport rep = check_nonanticipative(bad, t3);
  REQUIRE_FALSE(rep.ok());
  // offending prefixes are exactly the two one-step prefixes
  for (const auto& viol : rep.violations) CHECK(viol.theta == 1);
  CHECK(rep.violations.size() == 2);

  // the same table with the anticipative term removed passes
  for (auto& [key, value] : table) value = Rational(-key.second);
  CHECK(check_nonanticipative(PayoffSpec::custom(3, table), t3).ok());
}

TEST_CASE("target measure validation") {
  CHECK_NOTHROW(TargetMeasure::from_atoms(
      {{-1, Rational(1, 2)}, {1, Rational(1, 2)}}));
  CHECK_THROWS_AS(TargetMeasure::from_atoms({{-1, Rational(1, 2)},
                                             {1, Rational(1, 4)}}),
                  config_error);
  CHECK_THROWS_AS(TargetMeasure::from_atoms({{0, Rational(1, 2)},
                                             {2, Rational(1, 2)}}),
                  config_error);
  CHECK_THROWS_AS(TargetMeasure::from_atoms({{-1, Rational(3, 2)},
                                             {1, Rational(-1, 2)}}),
                  config_error);
  TargetMeasure mu = TargetMeasure::from_atoms(
      {{2, Rational(1, 4)}, {-2, Rational(1, 4)}, {0, Rational(1, 2)}});
  CHECK(mu.atoms.size() == 3);
  CHECK(mu.atoms.front().first == -2);  // sorted
  CHECK(mu.second_moment() == 2);
  CHECK(mu.weight(1) == 0);
}

TEST_CASE("rational parsing") {
  CHECK(parse_rational("1/4") == Rational(1, 4));
  CHECK(parse_rational("-3/6") == Rational(-1, 2));
  CHECK(parse_rational("0.25") == Rational(1, 4));
  CHECK(parse_rational("-2") == Rational(-2));
  CHECK(format_rational(Rational(-1, 3)) == "-1/3");
  CHECK(format_rational(Rational(7)) == "7");
  CHECK_THROWS_AS(parse_rational("abc"), io_error);
  CHECK_THROWS_AS(parse_rational("1/0"), io_error);
}
