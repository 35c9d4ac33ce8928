// Command-line driver for the embedding solver: solve / verify / enumerate /
// batch over key=value config files.

#include "sep/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

namespace {

struct CommonArgs {
  std::string config;
  sep::RunOverrides ov;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool flow_flag) {
  cmd->add_option("--config", args.config, "experiment config file")
      ->required();
  cmd->add_option("--mode", args.ov.mode, "arithmetic override: exact|floating");
  cmd->add_option("--out", args.ov.out_dir, "output directory override");
  cmd->add_option("--tol", args.ov.lp_tol, "LP tolerance override");
  cmd->add_option("--sg-tol", args.ov.sg_tol, "stop-go margin override");
  cmd->add_option("--seed", args.ov.seed, "pivot-randomization seed override");
  if (flow_flag)
    cmd->add_option("--flow", args.ov.flow_file,
                    "use this flow file instead of solving");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal stopping embedding solver and stop-go verifier"};
  app.require_subcommand(1);

  CommonArgs solve_args, verify_args, enum_args;
  std::string batch_dir, batch_out;
  int batch_jobs = 1;

  CLI::App* solve = app.add_subcommand("solve", "solve primal and dual");
  add_common(solve, solve_args, false);
  CLI::App* verify =
      app.add_subcommand("verify", "run the stop-go monotonicity verifier");
  add_common(verify, verify_args, true);
  CLI::App* enumerate =
      app.add_subcommand("enumerate", "emit stop-go pair listings");
  add_common(enumerate, enum_args, true);
  CLI::App* batch = app.add_subcommand("batch", "run a directory of configs");
  batch->add_option("--config", batch_dir, "directory of .cfg files")
      ->required();
  batch->add_option("--jobs", batch_jobs, "worker count");
  batch->add_option("--out", batch_out, "output root (per-config subdirs)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed())
      return sep::run_solve(sep::load_config(solve_args.config), solve_args.ov);
    if (verify->parsed())
      return sep::run_verify(sep::load_config(verify_args.config),
                             verify_args.ov);
    if (enumerate->parsed())
      return sep::run_enumerate(sep::load_config(enum_args.config),
                                enum_args.ov);
    if (batch->parsed()) return sep::run_batch(batch_dir, batch_jobs, batch_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
