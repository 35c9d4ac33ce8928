#include <doctest.h>

#include "sep/monotonicity.hpp"
#include "support/oracles.hpp"

#include <random>

using namespace sep;

namespace {

TargetMeasure two_point() {
  return TargetMeasure::from_atoms({{-1, Rational(1, 2)}, {1, Rational(1, 2)}});
}
TargetMeasure three_point() {
  return TargetMeasure::from_atoms(
      {{-2, Rational(1, 4)}, {0, Rational(1, 2)}, {2, Rational(1, 4)}});
}

PayoffSpec constant_payoff(int horizon, const Rational& k) {
  std::map<std::pair<int, int>, Rational> table;
  for (int t = 0; t <= horizon; ++t)
    for (int x = -t; x <= t; x += 2) table[{t, x}] = k;
  return PayoffSpec::time_value(table);
}

// The closed-form pair for the expected-stop-time payoff: lambda(x) = -x^2,
// S(v) = value^2 - t, a martingale dominating -tau with equality everywhere.
DualCertificate<Rational> wald_certificate(const PathTree& tree) {
  DualCertificate<Rational> cert;
  cert.tree = &tree;
  int N = tree.horizon();
  cert.lambda.resize(2 * N + 1);
  for (int x = -N; x <= N; ++x) cert.lambda[x + N] = Rational(-x * x);
  cert.smg.resize(tree.num_nodes());
  for (int v = 0; v < tree.num_nodes(); ++v) {
    const TreeNode& n = tree.node(v);
    cert.smg[v] = Rational(n.value * n.value - n.t);
  }
  return cert;
}

}  // namespace

TEST_CASE("dual LP shape at horizon one") {
  PathTree tree = PathTree::build(1, TreeMode::Full);
  PayoffEvaluator<Rational> xi(PayoffSpec::neg_tau(), tree);
  DualLp<Rational> dlp = assemble_dual(tree, two_point(), xi);
  CHECK(dlp.lp.num_vars() == 3 + 3);     // lambda grid + node process
  CHECK(dlp.lp.rows.size() == 3 + 1 + 1);  // domination + supermtg + root pin
  for (int j = 0; j < dlp.lp.num_vars(); ++j) CHECK(dlp.lp.free_var[j]);
}

TEST_CASE("constant payoffs price to the constant") {
  PathTree tree = PathTree::build(3, TreeMode::Full);
  PayoffEvaluator<Rational> zero(constant_payoff(3, Rational(0)), tree);
  DualSolveResult<Rational> rz = solve_dual(tree, two_point(), zero);
  REQUIRE(rz.status == DualStatus::Optimal);
  CHECK(rz.value == 0);

  PayoffEvaluator<Rational> seven(constant_payoff(3, Rational(7, 2)), tree);
  DualSolveResult<Rational> rs = solve_dual(tree, two_point(), seven);
  REQUIRE(rs.status == DualStatus::Optimal);
  CHECK(rs.value == Rational(7, 2));
}

TEST_CASE("the explicit Wald certificate is optimal for the stop-time payoff") {
  for (int N : {2, 4, 6}) {
    PathTree tree = PathTree::build(N, TreeMode::Full);
    PayoffEvaluator<Rational> xi(PayoffSpec::neg_tau(), tree);
    DualCertificate<Rational> cert = wald_certificate(tree);
    auto res = cert.residuals(xi);
    CHECK(res.root_offset == 0);
    CHECK(res.max_domination == 0);
    CHECK(res.max_supermartingale == 0);
    // eta vanishes identically: the certificate touches at every node
    for (int v = 0; v < tree.num_nodes(); ++v) CHECK(cert.eta(v, xi) == 0);
    for (TargetMeasure mu : {two_point(), three_point()}) {
      if (mu.max_point() > N) continue;
      CHECK(cert.objective(mu) == -mu.second_moment());
      DualSolveResult<Rational> solved = solve_dual(tree, mu, xi);
      REQUIRE(solved.status == DualStatus::Optimal);
      CHECK(solved.value == -mu.second_moment());
    }
  }
}

TEST_CASE("strong duality on small instances") {
  // running max, two-point law: P = D = 1/2
  {
    PathTree tree = PathTree::build(3, TreeMode::Full);
    PayoffEvaluator<Rational> xi(PayoffSpec::running_max(), tree);
    PrimalSolveResult<Rational> p = solve_primal(tree, two_point(), xi);
    DualSolveResult<Rational> d = solve_dual(tree, two_point(), xi);
    REQUIRE(p.status == LpStatus::Optimal);
    REQUIRE(d.status == DualStatus::Optimal);
    CHECK(p.value == Rational(1, 2));
    CHECK(d.value == Rational(1, 2));
    CHECK(verify_duality(p.value, d.value, 1e-9).pass);
  }
  // squared stop time, three-point law
  {
    PathTree tree = PathTree::build(4, TreeMode::Full);
    PayoffEvaluator<Rational> xi(PayoffSpec::neg_tau_sq(), tree);
    PrimalSolveResult<Rational> p = solve_primal(tree, three_point(), xi);
    DualSolveResult<Rational> d = solve_dual(tree, three_point(), xi);
    REQUIRE(p.status == LpStatus::Optimal);
    REQUIRE(d.status == DualStatus::Optimal);
    CHECK(p.value == d.value);
    GapReport<Rational> gap = verify_duality(p.value, d.value, 1e-9);
    CHECK(gap.pass);
    CHECK(gap.gap == 0);
  }
}

TEST_CASE("weak duality separates suboptimal flows") {
  PathTree tree = PathTree::build(4, TreeMode::Augmented);
  TargetMeasure mu = three_point();
  PayoffEvaluator<Rational> xi(PayoffSpec::tau_sq(), tree);
  DualSolveResult<Rational> d = solve_dual(tree, mu, xi);
  REQUIRE(d.status == DualStatus::Optimal);
  auto vertices = testing::exact_vertex_flows(tree, mu);
  bool strict_somewhere = false;
  for (const auto& f : vertices) {
    Rational value = f.expected_payoff(xi);
    CHECK(value <= d.value);
    if (value < d.value) strict_somewhere = true;
  }
  CHECK(strict_somewhere);  // not every feasible vertex is optimal here
}

TEST_CASE("weak duality on random flow/certificate pairs") {
  PathTree tree = PathTree::build(5, TreeMode::Full);
  TargetMeasure mu = three_point();
  PayoffSpec spec = PayoffSpec::tau_sq();
  PayoffEvaluator<Rational> xi(spec, tree);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(-4, 4);
  for (int trial = 0; trial < 10; ++trial) {
    StoppingFlow<Rational> flow =
        random_feasible_vertex<Rational>(tree, mu, 100 + trial);
    // random grid function completed backwards into a feasible certificate
    DualCertificate<Rational> cert;
    cert.tree = &tree;
    cert.lambda.resize(2 * tree.horizon() + 1);
    for (auto& l : cert.lambda) l = Rational(pick(rng));
    cert.smg.resize(tree.num_nodes());
    for (int t = tree.horizon(); t >= 0; --t) {
      for (int v = tree.level_begin(t); v < tree.level_end(t); ++v) {
        Rational need =
            xi.at_node(v) - cert.lambda[tree.node(v).value + tree.horizon()];
        if (!tree.is_leaf(v)) {
          const TreeNode& n = tree.node(v);
          Rational mean = (cert.smg[n.child[0]] + cert.smg[n.child[1]]) / 2;
          cert.smg[v] = std::max(need, mean);
        } else {
          cert.smg[v] = need;
        }
      }
    }
    Rational root_shift = cert.smg[tree.root()];
    for (auto& l : cert.lambda) l += root_shift;
    for (int v = 0; v < tree.num_nodes(); ++v) cert.smg[v] -= root_shift;
    auto res = cert.residuals(xi);
    REQUIRE(res.root_offset == 0);
    REQUIRE(res.max_domination == 0);
    REQUIRE(res.max_supermartingale == 0);
    CHECK(flow.expected_payoff(xi) <= cert.objective(mu));
  }
}

TEST_CASE("contact sets and complementary slackness") {
  PathTree tree = PathTree::build(6, TreeMode::Full);
  TargetMeasure mu = three_point();
  PayoffEvaluator<Rational> xi(PayoffSpec::neg_tau(), tree);
  // the Wald certificate touches everywhere
  DualCertificate<Rational> wald = wald_certificate(tree);
  int touched = 0;
  for (int v = 0; v < tree.num_nodes(); ++v)
    if (wald.eta(v, xi) == 0) ++touched;
  CHECK(touched == tree.num_nodes());

  PayoffEvaluator<Rational> rmax(PayoffSpec::running_max(), tree);
  PrimalSolveResult<Rational> p = solve_primal(tree, mu, rmax);
  DualSolveResult<Rational> d = solve_dual(tree, mu, rmax);
  REQUIRE(p.status == LpStatus::Optimal);
  REQUIRE(d.status == DualStatus::Optimal);
  CHECK(p.value == d.value);
  // every stop-support node is a contact node of any optimal certificate
  SlacknessReport<Rational> slack = check_slackness(p.flow, d.certificate, rmax, 0.0);
  CHECK(slack.ok());

  // and the certificate recovered from the primal multipliers agrees
  PrimalLp<Rational> plp = assemble_primal(tree, mu, rmax);
  PrimalSolveResult<Rational> p2 = solve_primal_lp(plp);
  DualCertificate<Rational> from_duals =
      certificate_from_primal_duals(plp, p2.row_duals);
  auto res = from_duals.residuals(rmax);
  CHECK(res.root_offset == 0);
  CHECK(res.max_domination == 0);
  CHECK(res.max_supermartingale == 0);
  CHECK(from_duals.objective(mu) == p.value);
  CHECK(check_slackness(p2.flow, from_duals, rmax, 0.0).ok());
}

TEST_CASE("contact sets of trivial and optimal certificates") {
  PathTree tree = PathTree::build(4, TreeMode::Full);
  TargetMeasure mu = three_point();
  // the zero certificate touches everywhere for the zero payoff
  PayoffEvaluator<Rational> zero(constant_payoff(4, Rational(0)), tree);
  DualCertificate<Rational> flat;
  flat.tree = &tree;
  flat.lambda.assign(2 * tree.horizon() + 1, Rational(0));
  flat.smg = VectorX<Rational>::Zero(tree.num_nodes());
  ContactSet gamma = certificate_contact_set(flat, zero, 0.0);
  CHECK(gamma.size() == tree.num_nodes());

  // an optimal certificate's contact set covers the optimizer's support
  PayoffEvaluator<Rational> xi(PayoffSpec::running_max(), tree);
  PrimalSolveResult<Rational> p = solve_primal(tree, mu, xi);
  DualSolveResult<Rational> d = solve_dual(tree, mu, xi);
  REQUIRE(p.status == LpStatus::Optimal);
  REQUIRE(d.status == DualStatus::Optimal);
  ContactSet cert_gamma = certificate_contact_set(d.certificate, xi, 0.0);
  ContactSet support = support_contact_set(p.flow, 0.0);
  for (int v : support.members) CHECK(cert_gamma.contains(v));
}

TEST_CASE("slackness violations localize suboptimality") {
  PathTree tree = PathTree::build(4, TreeMode::Augmented);
  TargetMeasure mu = three_point();
  PayoffEvaluator<Rational> xi(PayoffSpec::tau_sq(), tree);
  DualSolveResult<Rational> d = solve_dual(tree, mu, xi);
  REQUIRE(d.status == DualStatus::Optimal);
  auto vertices = testing::exact_vertex_flows(tree, mu);
  REQUIRE(vertices.size() == 2);
  for (const auto& f : vertices) {
    SlacknessReport<Rational> rep = check_slackness(f, d.certificate, xi, 0.0);
    bool optimal = f.expected_payoff(xi) == d.value;
    CHECK(rep.ok() == optimal);
  }
}

TEST_CASE("dirac instance is trivially slack-consistent") {
  PathTree tree = PathTree::build(3, TreeMode::Full);
  TargetMeasure mu = TargetMeasure::from_atoms({{0, Rational(1)}});
  PayoffEvaluator<Rational> xi(PayoffSpec::neg_tau_sq(), tree);
  PrimalSolveResult<Rational> p = solve_primal(tree, mu, xi);
  DualSolveResult<Rational> d = solve_dual(tree, mu, xi);
  REQUIRE(p.status == LpStatus::Optimal);
  REQUIRE(d.status == DualStatus::Optimal);
  CHECK(p.value == 0);
  CHECK(d.value == 0);
  CHECK(check_slackness(p.flow, d.certificate, xi, 0.0).ok());
}

TEST_CASE("adding a constant shifts both values and keeps optimizers") {
  PathTree tree = PathTree::build(4, TreeMode::Full);
  TargetMeasure mu = three_point();
  const Rational shift(5, 3);
  std::map<std::pair<int, int>, Rational> shifted;
  for (int t = 0; t <= 4; ++t)
    for (int x = -t; x <= t; x += 2) shifted[{t, x}] = Rational(-t * t) + shift;
  PayoffEvaluator<Rational> xi(PayoffSpec::neg_tau_sq(), tree);
  PayoffEvaluator<Rational> xi_shift(PayoffSpec::time_value(shifted), tree);

  PrimalSolveResult<Rational> p0 = solve_primal(tree, mu, xi);
  PrimalSolveResult<Rational> p1 = solve_primal(tree, mu, xi_shift);
  DualSolveResult<Rational> d0 = solve_dual(tree, mu, xi);
  DualSolveResult<Rational> d1 = solve_dual(tree, mu, xi_shift);
  REQUIRE(p0.status == LpStatus::Optimal);
  REQUIRE(p1.status == LpStatus::Optimal);
  CHECK(p1.value == p0.value + shift);
  CHECK(d1.value == d0.value + shift);
  // the shifted optimizer is an optimizer of the unshifted problem
  CHECK(p1.flow.expected_payoff(xi) == p0.value);
}

TEST_CASE("infeasible embedding surfaces as an unbounded dual") {
  PathTree tree = PathTree::build(2, TreeMode::Full);
  PayoffEvaluator<Rational> xi(PayoffSpec::neg_tau(), tree);

  // support outside the reachable grid
  TargetMeasure far =
      TargetMeasure::from_atoms({{-3, Rational(1, 2)}, {3, Rational(1, 2)}});
  DualSolveResult<Rational> d = solve_dual(tree, far, xi);
  CHECK(d.status == DualStatus::EmbeddingInfeasible);

  // in-range but not embeddable by horizon 2: stopping any mass at +-1
  // starves the leaf at 0, and the +-2 budget needs the full half
  TargetMeasure spread = TargetMeasure::from_atoms({{-2, Rational(1, 4)},
                                                    {-1, Rational(1, 4)},
                                                    {1, Rational(1, 4)},
                                                    {2, Rational(1, 4)}});
  FeasibilityReport<Rational> fr = feasibility<Rational>(tree, spread);
  CHECK_FALSE(fr.feasible);
  CHECK(fr.certificate_valid);
  DualSolveResult<Rational> d2 = solve_dual(tree, spread, xi);
  CHECK(d2.status == DualStatus::EmbeddingInfeasible);
  CHECK(d2.lp_status == LpStatus::Unbounded);
}

TEST_CASE("growth diagnostic is reported") {
  PathTree tree = PathTree::build(4, TreeMode::Full);
  DualCertificate<Rational> cert = wald_certificate(tree);
  CHECK(cert.growth_constant() >= 0);
  CHECK(cert.growth_constant() <= Rational(16));  // |S| <= N^2 on this tree
}
