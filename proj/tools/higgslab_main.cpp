#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "higgslab/lab.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  bool exact_leading = false;
  bool override_path_guard = false;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("--config", opts.config_path, "experiment config file")->required();
  sub->add_option("--out", opts.out_dir, "output directory (overrides config)");
  sub->add_flag("--exact-leading", opts.exact_leading,
                "integrate the exact leading connection (zero error fields)");
  sub->add_flag("--override-path-guard", opts.override_path_guard,
                "allow path lengths beyond R/2");
}

higgslab::ExperimentConfig load_config(const CommonOpts& opts) {
  std::ifstream in(opts.config_path);
  if (!in) throw higgslab::UsageError("cannot open config file " + opts.config_path);
  // Flags must be in force before validation so L > R/2 guards see them.
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  if (opts.override_path_guard) text += "\noverride_path_guard = true\n";
  if (opts.exact_leading) text += "\nexact_leading = true\n";
  higgslab::ExperimentConfig cfg = higgslab::parse_config_string(text);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

void print_summary(const higgslab::CommandOutcome& outcome) {
  const auto& s = outcome.report["summary"];
  std::cout << "pass=" << s["pass"] << " fail=" << s["fail"]
            << " inconclusive=" << s["inconclusive"] << "\n";
  for (const auto& v : outcome.verdicts)
    if (!v.pass && !v.inconclusive) std::cout << "FAILED: " << v.name << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for cyclic Toda reductions of Hitchin's equations"};
  app.require_subcommand(1);

  CommonOpts solve_opts, decay_opts, transport_opts, report_opts;
  CLI::App* solve = app.add_subcommand("solve", "solve the Dirichlet problems and dump fields");
  add_common(solve, solve_opts);
  CLI::App* decay = app.add_subcommand("verify-decay", "fit eigensolution decay rates");
  add_common(decay, decay_opts);
  CLI::App* transport = app.add_subcommand("transport", "integrate parallel transport");
  add_common(transport, transport_opts);
  CLI::App* report = app.add_subcommand("report", "full pipeline with plot data");
  add_common(report, report_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    higgslab::CommandOutcome outcome;
    if (solve->parsed()) {
      outcome = higgslab::cmd_solve(load_config(solve_opts));
    } else if (decay->parsed()) {
      outcome = higgslab::cmd_verify_decay(load_config(decay_opts));
    } else if (transport->parsed()) {
      outcome = higgslab::cmd_transport(load_config(transport_opts));
    } else {
      outcome = higgslab::cmd_report(load_config(report_opts));
    }
    print_summary(outcome);
    return outcome.exit_code;
  } catch (const higgslab::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
