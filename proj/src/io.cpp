#include "sep/io.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace sep {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

long now_ms_anchor() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch())
      .count();
}

template <class S>
S parse_scalar(const std::string& tok) {
  if constexpr (scalar_traits<S>::exact) {
    return parse_rational(tok);
  } else {
    if (tok.find('/') != std::string::npos)
      return parse_rational(tok).get_d();
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      if (used != tok.size()) throw io_error("bad numeric token: " + tok);
      return v;
    } catch (const std::exception&) {
      throw io_error("bad numeric token: " + tok);
    }
  }
}

const char* tree_mode_name(TreeMode m) {
  return m == TreeMode::Full ? "full" : "augmented";
}
const char* statistic_name(Statistic s) {
  return s == Statistic::TimeValue ? "time_value" : "time_value_max";
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

TargetMeasure parse_measure_inline(const std::string& text) {
  std::string prepared = text;
  for (char& c : prepared)
    if (c == ',') c = ' ';
  std::vector<std::pair<int, Rational>> atoms;
  for (const std::string& tok : split_ws(prepared)) {
    auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw config_error("measure atom must be point:weight, got '" + tok + "'");
    try {
      atoms.emplace_back(std::stoi(tok.substr(0, colon)),
                         parse_rational(tok.substr(colon + 1)));
    } catch (const std::exception& e) {
      throw config_error("bad measure atom '" + tok + "': " + e.what());
    }
  }
  return TargetMeasure::from_atoms(std::move(atoms));
}

TargetMeasure load_measure_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open measure file " + path.string());
  std::vector<std::pair<int, Rational>> atoms;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto toks = split_ws(t);
    if (toks.size() != 2)
      throw io_error(path.string() + ":" + std::to_string(lineno) +
                     ": expected 'point weight'");
    atoms.emplace_back(std::stoi(toks[0]), parse_rational(toks[1]));
  }
  return TargetMeasure::from_atoms(std::move(atoms));
}

PayoffSpec ExperimentConfig::make_payoff() const {
  auto table_path = [&]() {
    if (payoff_file.empty())
      throw config_error("payoff kind '" + payoff_kind +
                         "' needs payoff_file");
    fs::path p = payoff_file;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p;
  };
  if (payoff_kind == "running_max") return PayoffSpec::running_max();
  if (payoff_kind == "neg_tau") return PayoffSpec::neg_tau();
  if (payoff_kind == "neg_tau_sq") return PayoffSpec::neg_tau_sq();
  if (payoff_kind == "tau_sq") return PayoffSpec::tau_sq();
  if (payoff_kind == "terminal_abs")
    return PayoffSpec::terminal_abs(strike, horizon);
  if (payoff_kind == "terminal_table") {
    std::ifstream is(table_path());
    if (!is) throw io_error("cannot open payoff file " + payoff_file);
    std::map<int, Rational> table;
    std::string line;
    while (std::getline(is, line)) {
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto toks = split_ws(t);
      if (toks.size() != 2) throw io_error("terminal table: expected 'x value'");
      table[std::stoi(toks[0])] = parse_rational(toks[1]);
    }
    return PayoffSpec::terminal(std::move(table));
  }
  if (payoff_kind == "time_value_table") {
    std::ifstream is(table_path());
    if (!is) throw io_error("cannot open payoff file " + payoff_file);
    std::map<std::pair<int, int>, Rational> table;
    std::string line;
    while (std::getline(is, line)) {
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto toks = split_ws(t);
      if (toks.size() != 3)
        throw io_error("time-value table: expected 't x value'");
      table[{std::stoi(toks[0]), std::stoi(toks[1])}] = parse_rational(toks[2]);
    }
    return PayoffSpec::time_value(std::move(table));
  }
  if (payoff_kind == "custom_table") {
    std::ifstream is(table_path());
    if (!is) throw io_error("cannot open payoff file " + payoff_file);
    std::map<std::pair<std::uint64_t, int>, Rational> table;
    std::string line;
    while (std::getline(is, line)) {
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto toks = split_ws(t);
      if (toks.size() != 3)
        throw io_error("custom table: expected 'path theta value'");
      if (static_cast<int>(toks[0].size()) != horizon)
        throw io_error("custom table: path must have horizon length");
      std::uint64_t bits = 0;
      for (int i = 0; i < horizon; ++i) {
        if (toks[0][i] == 'U')
          bits |= std::uint64_t(1) << i;
        else if (toks[0][i] != 'D')
          throw io_error("custom table: path must be U/D");
      }
      table[{bits, std::stoi(toks[1])}] = parse_rational(toks[2]);
    }
    return PayoffSpec::custom(horizon, std::move(table));
  }
  throw config_error("unknown payoff kind '" + payoff_kind + "'");
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open config " + path.string());
  ExperimentConfig cfg;
  cfg.base_dir = path.parent_path();
  bool have_measure = false;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto where = [&] { return path.string() + ":" + std::to_string(lineno); };
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw config_error(where() + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    auto hash = value.find('#');
    if (hash != std::string::npos) value = trim(value.substr(0, hash));
    try {
      if (key == "horizon") cfg.horizon = std::stoi(value);
      else if (key == "tree") {
        if (value == "full") cfg.mode = TreeMode::Full;
        else if (value == "augmented") cfg.mode = TreeMode::Augmented;
        else throw config_error("tree must be full|augmented");
      } else if (key == "statistic") {
        if (value == "time_value") cfg.statistic = Statistic::TimeValue;
        else if (value == "time_value_max")
          cfg.statistic = Statistic::TimeValueMax;
        else throw config_error("statistic must be time_value|time_value_max");
      } else if (key == "arithmetic") {
        if (value == "exact") cfg.exact = true;
        else if (value == "floating") cfg.exact = false;
        else throw config_error("arithmetic must be exact|floating");
      } else if (key == "payoff") cfg.payoff_kind = value;
      else if (key == "strike") cfg.strike = parse_rational(value);
      else if (key == "payoff_file") cfg.payoff_file = value;
      else if (key == "measure") {
        cfg.measure = parse_measure_inline(value);
        have_measure = true;
      } else if (key == "measure_file") {
        fs::path p = value;
        if (p.is_relative()) p = cfg.base_dir / p;
        cfg.measure = load_measure_file(p);
        have_measure = true;
      } else if (key == "lp_tol") cfg.lp_tol = std::stod(value);
      else if (key == "contact_tol") cfg.contact_tol = std::stod(value);
      else if (key == "sg_tol") cfg.sg_tol = std::stod(value);
      else if (key == "degenerate_tol") cfg.degenerate_tol = std::stod(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "threads") cfg.threads = std::stoi(value);
      else if (key == "full_cap") cfg.full_cap = std::stoi(value);
      else if (key == "out") cfg.out_dir = value;
      else if (key == "commands") cfg.commands = split_ws(value);
      else throw config_error("unknown key '" + key + "'");
    } catch (const config_error& e) {
      std::string msg = e.what();
      if (msg.rfind(path.string(), 0) == 0) throw;
      throw config_error(where() + ": " + msg);
    } catch (const std::exception& e) {
      throw config_error(where() + ": bad value for '" + key + "': " + e.what());
    }
  }
  if (!have_measure)
    throw config_error(path.string() + ": config must set measure");
  if (cfg.horizon < 1) throw config_error("horizon must be >= 1");
  if (!cfg.exact) {
    if (cfg.lp_tol <= 0 || cfg.contact_tol <= 0 || cfg.sg_tol <= 0)
      throw config_error("floating mode requires positive tolerances");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Artifact emission / loading
// ---------------------------------------------------------------------------

template <class S>
void emit_flow(std::ostream& os, const StoppingFlow<S>& flow) {
  const PathTree& tree = *flow.tree;
  os << "# sepflow v1\n";
  os << "# horizon=" << tree.horizon() << " tree=" << tree_mode_name(tree.mode())
     << " statistic=" << statistic_name(tree.statistic()) << " arithmetic="
     << (scalar_traits<S>::exact ? "exact" : "floating") << "\n";
  os << "# columns: node stop continue\n";
  for (int v = 0; v < tree.num_nodes(); ++v)
    os << tree.node_key(v) << ' ' << format_scalar(flow.stop[v]) << ' '
       << format_scalar(flow.cont[v]) << '\n';
}

namespace {

struct FlowHeader {
  int horizon = -1;
  TreeMode mode = TreeMode::Full;
  Statistic statistic = Statistic::TimeValue;
  std::string arithmetic;
};

FlowHeader parse_flow_header(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "# sepflow v1")
    throw io_error("flow file: bad or missing version header");
  if (!std::getline(is, line))
    throw io_error("flow file: missing parameter header");
  FlowHeader h;
  for (const std::string& tok : split_ws(line)) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
    if (key == "horizon") h.horizon = std::stoi(value);
    else if (key == "tree")
      h.mode = value == "full" ? TreeMode::Full : TreeMode::Augmented;
    else if (key == "statistic")
      h.statistic = value == "time_value" ? Statistic::TimeValue
                                          : Statistic::TimeValueMax;
    else if (key == "arithmetic") h.arithmetic = value;
  }
  if (h.horizon < 1) throw io_error("flow file: missing horizon");
  return h;
}

}  // namespace

template <class S>
StoppingFlow<S> load_flow(std::istream& is, const PathTree& tree) {
  FlowHeader h = parse_flow_header(is);
  if (h.horizon != tree.horizon() || h.mode != tree.mode() ||
      (h.mode == TreeMode::Augmented && h.statistic != tree.statistic()))
    throw io_error("flow file does not match the expected tree shape");
  StoppingFlow<S> flow;
  flow.tree = &tree;
  flow.stop = VectorX<S>::Zero(tree.num_nodes());
  flow.cont = VectorX<S>::Zero(tree.num_nodes());
  std::string line;
  while (std::getline(is, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto toks = split_ws(t);
    if (toks.size() != 3)
      throw io_error("flow file: expected 'node stop continue'");
    int v = tree.node_from_key(toks[0]);
    flow.stop[v] = parse_scalar<S>(toks[1]);
    flow.cont[v] = parse_scalar<S>(toks[2]);
  }
  return flow;
}

template <class S>
void emit_certificate(std::ostream& lambda_os, std::ostream& smg_os,
                      const DualCertificate<S>& cert) {
  const PathTree& tree = *cert.tree;
  lambda_os << "# seplambda v1\n# columns: x lambda\n";
  for (int x = -tree.horizon(); x <= tree.horizon(); ++x)
    lambda_os << x << ' ' << format_scalar(cert.lambda_at(x)) << '\n';
  smg_os << "# sepsmg v1\n# columns: node S\n";
  for (int v = 0; v < tree.num_nodes(); ++v)
    smg_os << tree.node_key(v) << ' ' << format_scalar(cert.smg[v]) << '\n';
}

template <class S>
void emit_pairs(std::ostream& os, const SGPairSet<S>& pairs,
                const PathTree& tree) {
  os << "# seppairs v1\n";
  os << "# flavor=" << (pairs.flavor == SGFlavor::SG ? "sg" : "sg_star")
     << " candidates=" << pairs.candidates
     << " members=" << pairs.members.size()
     << " excluded=" << pairs.excluded.size()
     << " censored=" << pairs.censored.size() << "\n";
  os << "# columns: first second class margin witness_theta witness swap_exp "
        "stay_exp\n";
  auto dump = [&](const std::vector<SGPairRecord<S>>& list, const char* cls) {
    for (const auto& rec : list) {
      os << tree.node_key(rec.first) << ' ' << tree.node_key(rec.second) << ' '
         << cls << ' ' << format_scalar(rec.margin) << ' ' << rec.witness_theta
         << ' ' << (rec.witness.empty() ? "-" : rec.witness);
      if (pairs.flavor == SGFlavor::SGStar)
        os << ' ' << format_scalar(rec.swap_expectation) << ' '
           << format_scalar(rec.stay_expectation);
      else
        os << " - -";
      os << '\n';
    }
  };
  dump(pairs.members, "member");
  dump(pairs.excluded, "excluded");
  dump(pairs.censored, "censored");
}

void emit_node_set(std::ostream& os, const ContactSet& set,
                   const PathTree& tree, const std::string& label) {
  os << "# sepnodes v1\n";
  os << "# label=" << label << " source="
     << (set.source == ContactSet::Source::Support ? "support" : "certificate")
     << " count=" << set.members.size() << "\n";
  for (int v : set.members) os << tree.node_key(v) << '\n';
}

void Summary::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : fields)
    if (k == key) {
      v = value;
      return;
    }
  fields.emplace_back(key, value);
}

void Summary::write(std::ostream& os) const {
  os << "# sepsummary v1\n";
  for (const auto& [k, v] : fields) os << k << " = " << v << '\n';
}

template void emit_flow(std::ostream&, const StoppingFlow<double>&);
template void emit_flow(std::ostream&, const StoppingFlow<Rational>&);
template StoppingFlow<double> load_flow(std::istream&, const PathTree&);
template StoppingFlow<Rational> load_flow(std::istream&, const PathTree&);
template void emit_certificate(std::ostream&, std::ostream&,
                               const DualCertificate<double>&);
template void emit_certificate(std::ostream&, std::ostream&,
                               const DualCertificate<Rational>&);
template void emit_pairs(std::ostream&, const SGPairSet<double>&,
                         const PathTree&);
template void emit_pairs(std::ostream&, const SGPairSet<Rational>&,
                         const PathTree&);

// ---------------------------------------------------------------------------
// Command drivers
// ---------------------------------------------------------------------------

namespace {

void apply_overrides(ExperimentConfig& cfg, const RunOverrides& ov) {
  if (!ov.mode.empty()) {
    if (ov.mode == "exact") cfg.exact = true;
    else if (ov.mode == "floating") cfg.exact = false;
    else throw config_error("mode override must be exact|floating");
  }
  if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
  if (ov.lp_tol > 0) cfg.lp_tol = ov.lp_tol;
  if (ov.sg_tol > 0) cfg.sg_tol = ov.sg_tol;
  if (ov.seed >= 0) cfg.seed = static_cast<std::uint64_t>(ov.seed);
}

fs::path prepare_out_dir(const ExperimentConfig& cfg) {
  fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw io_error("cannot write " + (dir / name).string());
  return os;
}

LpOptions lp_options(const ExperimentConfig& cfg) {
  LpOptions o;
  o.tol = cfg.lp_tol;
  o.seed = cfg.seed;
  o.randomize = cfg.seed != 0;
  return o;
}

// Raw custom tables are accepted only after the exhaustive alteration check.
void reject_anticipative(const PayoffSpec& spec, const PathTree& full_tree) {
  if (spec.kind != PayoffKind::Custom) return;
  NonAnticipativityReport rep = check_nonanticipative(spec, full_tree);
  if (!rep.ok()) {
    const AnticipationViolation& v = rep.violations.front();
    throw config_error(
        "custom payoff table is anticipative at prefix " +
        full_tree.node_key(v.prefix_node) + " (theta=" +
        std::to_string(v.theta) + "): values " + v.value_a + " vs " +
        v.value_b + " across " + std::to_string(rep.violations.size()) +
        " violating prefixes");
  }
}

void base_summary(Summary& s, const ExperimentConfig& cfg,
                  const std::string& command) {
  s.set("command", command);
  s.set("arithmetic", cfg.exact ? "exact" : "floating");
  s.set("horizon", std::to_string(cfg.horizon));
  s.set("tree", tree_mode_name(cfg.mode));
  s.set("statistic", statistic_name(cfg.statistic));
  s.set("payoff", cfg.payoff_kind);
  std::string mu;
  for (const auto& [x, w] : cfg.measure.atoms) {
    if (!mu.empty()) mu += " ";
    mu += std::to_string(x) + ":" + format_rational(w);
  }
  s.set("measure", mu);
  s.set("P", "-");
  s.set("D", "-");
  s.set("gap", "-");
  s.set("status", "-");
  s.set("n_sg_pairs", "0");
  s.set("n_violations", "0");
}

void finish_summary(Summary& s, const fs::path& dir, long t0_ms) {
  s.set("runtime_ms", std::to_string(now_ms_anchor() - t0_ms));
  auto os = open_out(dir, "summary.txt");
  s.write(os);
}

template <class S>
int run_solve_impl(const ExperimentConfig& cfg) {
  long t0 = now_ms_anchor();
  fs::path dir = prepare_out_dir(cfg);
  Summary summary;
  base_summary(summary, cfg, "solve");

  PathTree tree = cfg.make_tree();
  PayoffSpec spec = cfg.make_payoff();
  if (spec.kind == PayoffKind::Custom) reject_anticipative(spec, tree);
  PayoffEvaluator<S> xi(spec, tree);
  LpOptions opt = lp_options(cfg);

  PrimalSolveResult<S> primal = solve_primal(tree, cfg.measure, xi, opt);
  if (primal.status == LpStatus::Infeasible) {
    summary.set("status", "INFEASIBLE");
    finish_summary(summary, dir, t0);
    return 1;
  }
  if (primal.status != LpStatus::Optimal) {
    summary.set("status", "SOLVER_ERROR");
    finish_summary(summary, dir, t0);
    return 1;
  }

  DualSolveResult<S> dual = solve_dual(tree, cfg.measure, xi, opt);
  if (dual.status != DualStatus::Optimal) {
    summary.set("status", dual.status == DualStatus::EmbeddingInfeasible
                              ? "INFEASIBLE"
                              : "SOLVER_ERROR");
    finish_summary(summary, dir, t0);
    return 1;
  }

  GapReport<S> gap = verify_duality(primal.value, dual.value, cfg.lp_tol);
  summary.set("P", format_scalar(primal.value));
  summary.set("D", format_scalar(dual.value));
  summary.set("gap", format_scalar(gap.gap));
  summary.set("status", gap.pass ? "OPTIMAL" : "GAP_FAIL");

  {
    auto os = open_out(dir, "flow.txt");
    emit_flow(os, primal.flow);
  }
  {
    auto losv = open_out(dir, "certificate_lambda.txt");
    auto sosv = open_out(dir, "certificate_s.txt");
    emit_certificate(losv, sosv, dual.certificate);
  }
  finish_summary(summary, dir, t0);
  return gap.pass ? 0 : 1;
}

// Loads a flow file, building whatever tree its header names.
template <class S>
std::pair<std::unique_ptr<PathTree>, StoppingFlow<S>> load_flow_file(
    const fs::path& path, int full_cap) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open flow file " + path.string());
  FlowHeader h = parse_flow_header(is);
  is.clear();
  is.seekg(0);
  auto tree = std::make_unique<PathTree>(
      PathTree::build(h.horizon, h.mode, h.statistic, full_cap));
  StoppingFlow<S> flow = load_flow<S>(is, *tree);
  return {std::move(tree), std::move(flow)};
}

template <class S>
int run_verify_impl(const ExperimentConfig& cfg, const RunOverrides& ov) {
  long t0 = now_ms_anchor();
  fs::path dir = prepare_out_dir(cfg);
  Summary summary;
  base_summary(summary, cfg, "verify");

  PayoffSpec spec = cfg.make_payoff();
  PathTree full_tree =
      PathTree::build(cfg.horizon, TreeMode::Full, Statistic::TimeValue,
                      cfg.full_cap);
  reject_anticipative(spec, full_tree);
  PayoffEvaluator<S> xi_full(spec, full_tree);
  LpOptions opt = lp_options(cfg);

  std::unique_ptr<PathTree> solve_tree;
  std::unique_ptr<PathTree> loaded_tree;
  StoppingFlow<S> full_flow;

  if (!ov.flow_file.empty()) {
    auto [tree, flow] = load_flow_file<S>(ov.flow_file, cfg.full_cap);
    loaded_tree = std::move(tree);
    if (loaded_tree->horizon() != cfg.horizon)
      throw config_error("injected flow horizon differs from config");
    full_flow = lift_to_full(flow, full_tree);
    summary.set("flow_source", ov.flow_file);
  } else {
    solve_tree = std::make_unique<PathTree>(cfg.make_tree());
    PayoffEvaluator<S> xi(spec, *solve_tree);
    PrimalSolveResult<S> primal = solve_primal(*solve_tree, cfg.measure, xi, opt);
    if (primal.status != LpStatus::Optimal) {
      summary.set("status", primal.status == LpStatus::Infeasible
                                ? "INFEASIBLE"
                                : "SOLVER_ERROR");
      finish_summary(summary, dir, t0);
      return 1;
    }
    DualSolveResult<S> dual = solve_dual(*solve_tree, cfg.measure, xi, opt);
    if (dual.status != DualStatus::Optimal) {
      summary.set("status", "SOLVER_ERROR");
      finish_summary(summary, dir, t0);
      return 1;
    }
    GapReport<S> gap = verify_duality(primal.value, dual.value, cfg.lp_tol);
    summary.set("P", format_scalar(primal.value));
    summary.set("D", format_scalar(dual.value));
    summary.set("gap", format_scalar(gap.gap));
    if (!gap.pass) {
      summary.set("status", "GAP_FAIL");
      finish_summary(summary, dir, t0);
      return 1;
    }
    full_flow = lift_to_full(primal.flow, full_tree);
    auto os = open_out(dir, "flow.txt");
    emit_flow(os, primal.flow);
  }
  {
    auto os = open_out(dir, "flow_full.txt");
    emit_flow(os, full_flow);
  }

  SGOptions sgopt;
  sgopt.eps_sg = cfg.sg_tol;
  sgopt.support_eps = cfg.contact_tol;
  sgopt.degenerate_tol = cfg.degenerate_tol;
  sgopt.threads = cfg.threads;

  SGPairSet<S> sg = enumerate_sg(xi_full, full_tree, sgopt);
  SGPairSet<S> sg_star = enumerate_sg_star(xi_full, full_flow, sgopt);
  MPReport<S> rep_sg = verify_mp(full_flow, xi_full, SGFlavor::SG, sgopt, &sg);
  MPReport<S> rep_star =
      verify_mp(full_flow, xi_full, SGFlavor::SGStar, sgopt, &sg_star);

  ContactSet gamma = support_contact_set(full_flow, sgopt.support_eps);
  ContactSet gamma_lower = lower_extension(gamma, full_tree);
  {
    auto os = open_out(dir, "sg_pairs.txt");
    emit_pairs(os, sg, full_tree);
  }
  {
    auto os = open_out(dir, "sg_star_pairs.txt");
    emit_pairs(os, sg_star, full_tree);
  }
  {
    auto os = open_out(dir, "gamma_star.txt");
    emit_node_set(os, gamma, full_tree, "gamma_star");
  }
  {
    auto os = open_out(dir, "gamma_star_lower.txt");
    emit_node_set(os, gamma_lower, full_tree, "gamma_star_lower");
  }
  {
    ContactSet proj;
    proj.source = ContactSet::Source::Support;
    proj.in = project_sg(sg, gamma);
    for (int v = 0; v < full_tree.num_nodes(); ++v)
      if (proj.in[v]) proj.members.push_back(v);
    auto os = open_out(dir, "projection.txt");
    emit_node_set(os, proj, full_tree, "projection_sg");
    ContactSet proj2;
    proj2.source = ContactSet::Source::Support;
    proj2.in = project_sg(sg_star, gamma);
    for (int v = 0; v < full_tree.num_nodes(); ++v)
      if (proj2.in[v]) proj2.members.push_back(v);
    auto os2 = open_out(dir, "projection_star.txt");
    emit_node_set(os2, proj2, full_tree, "projection_sg_star");
  }
  {
    auto os = open_out(dir, "violations.txt");
    os << "# sepviolations v1\n# columns: flavor first second margin\n";
    for (const auto& rec : rep_sg.violations)
      os << "sg " << full_tree.node_key(rec.first) << ' '
         << full_tree.node_key(rec.second) << ' ' << format_scalar(rec.margin)
         << '\n';
    for (const auto& rec : rep_star.violations)
      os << "sg_star " << full_tree.node_key(rec.first) << ' '
         << full_tree.node_key(rec.second) << ' ' << format_scalar(rec.margin)
         << '\n';
  }

  bool pass = rep_sg.pass && rep_star.pass;
  summary.set("n_sg_pairs", std::to_string(sg.members.size()));
  summary.set("n_sg_star_pairs", std::to_string(sg_star.members.size()));
  summary.set("n_censored",
              std::to_string(sg.censored.size() + sg_star.censored.size()));
  summary.set("n_violations",
              std::to_string(rep_sg.violations.size() +
                             rep_sg.projection_violations.size() +
                             rep_star.violations.size() +
                             rep_star.projection_violations.size()));
  summary.set("n_censored_violations",
              std::to_string(rep_sg.censored_violations.size() +
                             rep_star.censored_violations.size()));
  summary.set("status", pass ? "PASS" : "FAIL");
  finish_summary(summary, dir, t0);
  return pass ? 0 : 1;
}

template <class S>
int run_enumerate_impl(const ExperimentConfig& cfg, const RunOverrides& ov) {
  long t0 = now_ms_anchor();
  fs::path dir = prepare_out_dir(cfg);
  Summary summary;
  base_summary(summary, cfg, "enumerate");
  if (cfg.mode != TreeMode::Full)
    throw config_error("enumerate requires tree = full");

  PathTree tree = cfg.make_tree();
  PayoffSpec spec = cfg.make_payoff();
  reject_anticipative(spec, tree);
  PayoffEvaluator<S> xi(spec, tree);

  SGOptions sgopt;
  sgopt.eps_sg = cfg.sg_tol;
  sgopt.support_eps = cfg.contact_tol;
  sgopt.degenerate_tol = cfg.degenerate_tol;
  sgopt.threads = cfg.threads;

  SGPairSet<S> sg = enumerate_sg(xi, tree, sgopt);
  {
    auto os = open_out(dir, "sg_pairs.txt");
    emit_pairs(os, sg, tree);
  }
  summary.set("n_sg_pairs", std::to_string(sg.members.size()));
  summary.set("n_sg_excluded", std::to_string(sg.excluded.size()));
  summary.set("n_sg_censored", std::to_string(sg.censored.size()));
  if (!sg.cost_warning.empty()) summary.set("warning", sg.cost_warning);

  if (!ov.flow_file.empty()) {
    auto [ltree, flow] = load_flow_file<S>(ov.flow_file, cfg.full_cap);
    if (ltree->horizon() != cfg.horizon)
      throw config_error("injected flow horizon differs from config");
    StoppingFlow<S> full_flow = lift_to_full(flow, tree);
    SGPairSet<S> star = enumerate_sg_star(xi, full_flow, sgopt);
    auto os = open_out(dir, "sg_star_pairs.txt");
    emit_pairs(os, star, tree);
    summary.set("n_sg_star_pairs", std::to_string(star.members.size()));
  }
  summary.set("status", "OK");
  finish_summary(summary, dir, t0);
  return 0;
}

}  // namespace

int run_solve(ExperimentConfig cfg, const RunOverrides& ov) {
  apply_overrides(cfg, ov);
  return cfg.exact ? run_solve_impl<Rational>(cfg) : run_solve_impl<double>(cfg);
}

int run_verify(ExperimentConfig cfg, const RunOverrides& ov) {
  apply_overrides(cfg, ov);
  return cfg.exact ? run_verify_impl<Rational>(cfg, ov)
                   : run_verify_impl<double>(cfg, ov);
}

int run_enumerate(ExperimentConfig cfg, const RunOverrides& ov) {
  apply_overrides(cfg, ov);
  return cfg.exact ? run_enumerate_impl<Rational>(cfg, ov)
                   : run_enumerate_impl<double>(cfg, ov);
}

int run_batch(const fs::path& config_dir, int jobs, const std::string& out_root) {
  std::vector<fs::path> configs;
  for (const auto& entry : fs::directory_iterator(config_dir))
    if (entry.path().extension() == ".cfg") configs.push_back(entry.path());
  std::sort(configs.begin(), configs.end());
  if (configs.empty()) {
    throw config_error("batch: no .cfg files in " + config_dir.string());
  }
  std::atomic<std::size_t> next{0};
  std::atomic<int> worst{0};
  std::mutex io_mutex;
  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      int code = 0;
      std::string note = "ok";
      try {
        ExperimentConfig cfg = load_config(configs[i]);
        if (!out_root.empty())
          cfg.out_dir =
              (fs::path(out_root) / configs[i].stem()).string();
        std::vector<std::string> cmds =
            cfg.commands.empty() ? std::vector<std::string>{"solve"}
                                 : cfg.commands;
        for (const std::string& c : cmds) {
          int rc = 0;
          if (c == "solve") rc = run_solve(cfg, {});
          else if (c == "verify") rc = run_verify(cfg, {});
          else if (c == "enumerate") rc = run_enumerate(cfg, {});
          else throw config_error("unknown command '" + c + "' in config");
          code = std::max(code, rc);
        }
      } catch (const std::exception& e) {
        code = 2;
        note = e.what();
      }
      if (code != 0 && note == "ok") note = "failed";
      int prev = worst.load();
      while (prev < code && !worst.compare_exchange_weak(prev, code)) {
      }
      std::lock_guard<std::mutex> lock(io_mutex);
      std::printf("%s: %s\n", configs[i].stem().string().c_str(), note.c_str());
    }
  };
  int n = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return worst.load();
}

}  // namespace sep
