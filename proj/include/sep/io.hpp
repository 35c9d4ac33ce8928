#pragma once

#include "sep/monotonicity.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace sep {

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  int horizon = 4;
  TreeMode mode = TreeMode::Full;
  Statistic statistic = Statistic::TimeValue;
  bool exact = true;
  std::string payoff_kind = "neg_tau";
  Rational strike{0};
  std::string payoff_file;
  TargetMeasure measure;
  double lp_tol = 1e-9;
  double contact_tol = 1e-7;
  double sg_tol = 1e-9;
  double degenerate_tol = -1.0;
  std::uint64_t seed = 0;
  int threads = 1;
  int full_cap = PathTree::kDefaultFullCap;
  std::string out_dir = "out";
  std::vector<std::string> commands;
  std::filesystem::path base_dir;  // directory of the config file

  /// Builds the payoff spec for this configuration (tables loaded from
  /// payoff_file when required).
  PayoffSpec make_payoff() const;
  PathTree make_tree() const { return PathTree::build(horizon, mode, statistic, full_cap); }
};

/// Parses the key=value configuration format; throws config_error with the
/// offending line on malformed input.
ExperimentConfig load_config(const std::filesystem::path& path);

TargetMeasure parse_measure_inline(const std::string& text);
TargetMeasure load_measure_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Artifact files (columnar text, versioned headers)
// ---------------------------------------------------------------------------

template <class S>
void emit_flow(std::ostream& os, const StoppingFlow<S>& flow);

template <class S>
StoppingFlow<S> load_flow(std::istream& is, const PathTree& tree);

template <class S>
void emit_certificate(std::ostream& lambda_os, std::ostream& smg_os,
                      const DualCertificate<S>& cert);

template <class S>
void emit_pairs(std::ostream& os, const SGPairSet<S>& pairs,
                const PathTree& tree);

void emit_node_set(std::ostream& os, const ContactSet& set,
                   const PathTree& tree, const std::string& label);

/// Ordered key=value report; values preformatted. runtime_ms is always the
/// final entry so that reports are byte-deterministic up to it.
struct Summary {
  std::vector<std::pair<std::string, std::string>> fields;
  void set(const std::string& key, const std::string& value);
  void write(std::ostream& os) const;
};

// ---------------------------------------------------------------------------
// Command drivers (shared by the CLI and the test-suites)
// ---------------------------------------------------------------------------

struct RunOverrides {
  std::string flow_file;   // verify/enumerate: use this flow, skip solving
  std::string mode;        // "exact" | "floating" | ""
  std::string out_dir;
  double lp_tol = -1;
  double sg_tol = -1;
  long seed = -1;
};

/// Solves primal and dual, writes flow/certificate/summary artifacts.
/// Returns the process exit code (0 ok, 1 infeasible or gap failure).
int run_solve(ExperimentConfig config, const RunOverrides& ov = {});

/// Runs the monotonicity verifier (both stop-go flavors) on the solved or
/// injected flow; emits pair files, contact sets, projections, verdict.
int run_verify(ExperimentConfig config, const RunOverrides& ov = {});

/// Emits the stop-go listings (conditional flavor too when a flow is given).
int run_enumerate(ExperimentConfig config, const RunOverrides& ov = {});

/// Runs every *.cfg in a directory on a small worker pool.
int run_batch(const std::filesystem::path& config_dir, int jobs,
              const std::string& out_root);

extern template void emit_flow(std::ostream&, const StoppingFlow<double>&);
extern template void emit_flow(std::ostream&, const StoppingFlow<Rational>&);
extern template StoppingFlow<double> load_flow(std::istream&, const PathTree&);
extern template StoppingFlow<Rational> load_flow(std::istream&, const PathTree&);
extern template void emit_certificate(std::ostream&, std::ostream&,
                                      const DualCertificate<double>&);
extern template void emit_certificate(std::ostream&, std::ostream&,
                                      const DualCertificate<Rational>&);
extern template void emit_pairs(std::ostream&, const SGPairSet<double>&,
                                const PathTree&);
extern template void emit_pairs(std::ostream&, const SGPairSet<Rational>&,
                                const PathTree&);

}  // namespace sep
