// Command-line driver: run a continual-learning sequence, verify the embedded
// benchmark fixtures, or re-emit reports from a finished run directory.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "moeforge/config.hpp"
#include "moeforge/errors.hpp"
#include "moeforge/evaluator.hpp"
#include "moeforge/fixtures.hpp"
#include "moeforge/log.hpp"
#include "moeforge/task_suite.hpp"
#include "moeforge/tensor_io.hpp"
#include "moeforge/trainer.hpp"

namespace {

using namespace moeforge;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct RunFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> tasks, experts, topk, merge_cycle, iterations, batch;
  std::optional<std::string> merge_enabled;
  std::optional<std::string> out;
};

CliConfig resolve(const RunFlags& f) {
  CliConfig cfg;
  if (f.config) apply_config_file(cfg, *f.config);
  auto set = [&](const char* section, const char* key, const auto& opt) {
    if (!opt) return;
    std::ostringstream os;
    os << *opt;
    apply_setting(cfg, section, key, os.str());
  };
  set("run", "seed", f.seed);
  set("suite", "tasks", f.tasks);
  set("train", "experts", f.experts);
  set("train", "topk", f.topk);
  set("merge", "cycle", f.merge_cycle);
  set("merge", "enabled", f.merge_enabled);
  set("train", "iterations", f.iterations);
  set("train", "batch", f.batch);
  set("output", "dir", f.out);
  cfg.suite.validate();
  cfg.train.validate();
  return cfg;
}

void print_block(const char* name, const MetricBlock& b) {
  std::printf("  %-9s", name);
  for (const auto& v : b.per_task) {
    if (v) {
      std::printf(" %6.1f", round1(*v));
    } else {
      std::printf(" %6s", "-");
    }
  }
  if (b.mean) std::printf(" | mean %.1f", round1(*b.mean));
  std::printf("\n");
}

int cmd_run(const RunFlags& flags) {
  CliConfig cfg = resolve(flags);
  const auto& out = cfg.out_dir;
  std::filesystem::create_directories(out);
  write_text_file(out / "config.ini", render_config(cfg));
  const TaskSequence suite = generate_suite(cfg.suite);
  save_suite(suite, out / "suite");
  RunOptions opts;
  opts.out_dir = out;
  const RunResult result = run_sequence(suite, cfg.train, opts);
  export_report(result, out);
  const MetricReport m = compute_metrics(result.accuracy);
  std::printf("run complete: %lld tasks, output in %s\n",
              static_cast<long long>(result.accuracy.checkpoints()), out.string().c_str());
  print_block("transfer", m.transfer);
  print_block("average", m.average);
  print_block("last", m.last);
  return kExitOk;
}

struct Perturbation {
  std::string method;
  int row = 0, col = 0;
  double delta = 0.0;
};

Perturbation parse_perturbation(const std::string& spec) {
  // METHOD:ROW:COL:DELTA with 1-based row/col.
  Perturbation p;
  std::istringstream in(spec);
  std::string row, col, delta;
  if (!std::getline(in, p.method, ':') || !std::getline(in, row, ':') ||
      !std::getline(in, col, ':') || !std::getline(in, delta)) {
    throw ConfigError("--perturb expects METHOD:ROW:COL:DELTA");
  }
  try {
    p.row = std::stoi(row);
    p.col = std::stoi(col);
    p.delta = std::stod(delta);
  } catch (const std::exception&) {
    throw ConfigError("--perturb expects METHOD:ROW:COL:DELTA");
  }
  return p;
}

int cmd_verify_fixtures(const std::optional<std::string>& perturb) {
  auto methods = fixtures::published_methods();
  if (perturb) {
    const Perturbation p = parse_perturbation(*perturb);
    bool found = false;
    for (auto& m : methods) {
      if (m.name != p.method) continue;
      if (p.row < 1 || p.row > m.raw.checkpoints() || p.col < 1 || p.col > m.raw.tasks()) {
        throw ConfigError("--perturb: cell out of range");
      }
      m.raw.values(p.row - 1, p.col - 1) += p.delta;
      found = true;
    }
    if (!found) throw ConfigError("--perturb: unknown method " + p.method);
  }
  const auto report = fixtures::verify_fixtures(methods);
  std::printf("%-6s %-9s", "method", "metric");
  for (const auto& n : fixtures::benchmark_task_names()) std::printf(" %10.10s", n.c_str());
  std::printf(" %10s\n", "mean");
  for (const auto& row : report.rows) {
    std::printf("%-6s %-9s", row.method.c_str(), row.metric.c_str());
    for (const auto& v : row.recomputed) {
      if (v) {
        std::printf(" %10.1f", round1(*v));
      } else {
        std::printf(" %10s", "");
      }
    }
    std::printf("\n");
  }
  for (const auto& mm : report.mismatches) {
    std::printf("MISMATCH %s %s %s: expected %.1f got %.4f\n", mm.method.c_str(),
                mm.metric.c_str(), mm.cell.c_str(), mm.expected, mm.got);
  }
  std::printf("%s: %d cells checked, %zu mismatches\n", report.passed() ? "PASS" : "FAIL",
              report.cells_checked, report.mismatches.size());
  return report.passed() ? kExitOk : kExitRuntime;
}

int cmd_report(const std::string& run_dir, const std::optional<std::string>& out) {
  const RunResult result = load_run(run_dir);
  const std::filesystem::path dest = out ? std::filesystem::path(*out) : std::filesystem::path(run_dir);
  export_report(result, dest);
  std::printf("report: %lld checkpoint rows written to %s\n",
              static_cast<long long>(result.accuracy.checkpoints()), dest.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moeforge: mixture-of-experts continual learning with expert merging"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Generate a suite, train the sequence, export reports");
  run->add_option("--config", run_flags.config, "INI configuration file");
  run->add_option("--seed", run_flags.seed, "Top-level seed");
  run->add_option("--tasks", run_flags.tasks, "Number of tasks");
  run->add_option("--experts", run_flags.experts, "Experts per block");
  run->add_option("--topk", run_flags.topk, "Routing top-k");
  run->add_option("--merge-cycle", run_flags.merge_cycle, "Merge every N iterations");
  run->add_option("--merge-enabled", run_flags.merge_enabled, "true|false");
  run->add_option("--iterations", run_flags.iterations, "Iterations per task");
  run->add_option("--batch", run_flags.batch, "Batch size");
  run->add_option("--out", run_flags.out, "Output directory");

  std::optional<std::string> perturb;
  auto* verify = app.add_subcommand("verify-fixtures", "Recompute published summary metrics");
  verify->add_option("--perturb", perturb,
                     "Negative control: add DELTA to METHOD's raw cell ROW:COL (1-based)");

  std::string report_dir;
  std::optional<std::string> report_out;
  auto* report = app.add_subcommand("report", "Re-emit CSV reports from a run directory");
  report->add_option("run_dir", report_dir, "Run directory")->required();
  report->add_option("--out", report_out, "Destination (defaults to the run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*verify) return cmd_verify_fixtures(perturb);
    if (*report) return cmd_report(report_dir, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
