// Experiment runner for online optimal prediction intervals.
//
// Exit codes: 0 success, 1 runtime fault, 2 configuration error.

#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opi/errors.hpp"
#include "opi/experiment.hpp"
#include "opi/trace_io.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFault = 1;
constexpr int kConfigError = 2;

struct CommonOptions {
  std::string config;
  std::string out;
  std::vector<std::string> arms;
  long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config, "experiment manifest (key = value lines)")->required();
  cmd->add_option("--seed", opts.seed, "override engine.seed and series.seed");
  cmd->add_option("--out", opts.out, "output root (default $OPI_OUTPUT_ROOT, then ./runs)");
  cmd->add_option("--arm", opts.arms, "restrict to these arms: opi, cpi, naive, frozen, opi-no-per");
}

opi::ExperimentManifest prepare(const CommonOptions& opts) {
  auto m = opi::load_manifest(opts.config);
  if (opts.seed >= 0) {
    m.engine.seed = static_cast<std::uint64_t>(opts.seed);
    m.series.seed = static_cast<std::uint64_t>(opts.seed);
  }
  if (!opts.out.empty()) m.output_root = opts.out;
  if (!opts.arms.empty()) {
    m.arms.clear();
    for (const auto& a : opts.arms) m.arms.push_back(opi::parse_arm(a));
  }
  m.validate();
  return m;
}

void print_scores(const opi::ExperimentResult& result) {
  std::cout << "artifacts: " << result.directory.string() << '\n';
  std::printf("%-14s %9s %12s %10s %12s %10s\n", "arm", "n_actions", "winkler", "coverage", "cov.dev", "sharpness");
  for (const auto& row : result.scores) {
    const auto& r = row.report;
    std::printf("%-14s %9zu %12.5f %10.4f %12.4f %10.5f\n", row.label.c_str(), row.n_actions, r.mean_winkler,
                r.coverage, r.avg_coverage_deviation, r.mean_sharpness);
  }
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const opi::DomainError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const opi::ParseError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << '\n';
    return kRuntimeFault;
  }
}

using Runner = std::function<opi::ExperimentResult(const opi::ExperimentManifest&)>;

int run_guarded(const CommonOptions& opts, const Runner& runner) {
  opi::ExperimentManifest m;
  if (int rc = guarded([&] {
        m = prepare(opts);
        return kOk;
      });
      rc != kOk) {
    return rc;
  }
  try {
    print_scores(runner(m));
    return kOk;
  } catch (const opi::DomainError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const opi::ParseError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << '\n';
    return kRuntimeFault;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online optimal prediction intervals: experiment runner"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, ablate_opts, drift_opts;
  std::vector<std::size_t> sizes;
  auto* run = app.add_subcommand("run", "run every arm of a manifest");
  add_common(run, run_opts);
  auto* sweep = app.add_subcommand("sweep", "OPI over a grid of action-space sizes, plus the CPI reference");
  add_common(sweep, sweep_opts);
  sweep->add_option("--sizes", sizes, "action counts (2^n - 1); default experiment.sweep or 3,7,15,31,63")
      ->delimiter(',');
  auto* ablate = app.add_subcommand("ablate", "OPI with and without prioritized replay");
  add_common(ablate, ablate_opts);
  auto* drift = app.add_subcommand("drift", "continuing-online vs frozen models across an injected drift");
  add_common(drift, drift_opts);

  std::string score_dir, trace_a, trace_b;
  auto* score = app.add_subcommand("score", "recompute score tables from trace files");
  score->add_option("--dir", score_dir, "experiment directory holding *.trace.csv");
  score->add_option("--trace", trace_a, "trace of the proposed method");
  score->add_option("--against", trace_b, "reference trace; prints mean Winkler(reference) - mean Winkler(trace)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (*run) return run_guarded(run_opts, [](const opi::ExperimentManifest& m) { return opi::run_experiment(m); });
  if (*ablate) return run_guarded(ablate_opts, [](const opi::ExperimentManifest& m) { return opi::run_ablation_no_per(m); });
  if (*drift) return run_guarded(drift_opts, [](const opi::ExperimentManifest& m) { return opi::run_drift(m); });
  if (*sweep) {
    return run_guarded(sweep_opts, [&sizes](const opi::ExperimentManifest& base) {
      auto m = base;
      if (!sizes.empty()) m.sweep = sizes;
      if (m.sweep.empty()) m.sweep = {3, 7, 15, 31, 63};
      m.arms = {opi::Arm::Cpi};
      m.validate();
      return opi::run_experiment(m);
    });
  }
  if (*score) {
    return guarded([&] {
      if (!trace_a.empty() || !trace_b.empty()) {
        if (trace_a.empty() || trace_b.empty()) throw opi::DomainError("--trace and --against go together");
        const auto a = opi::read_trace(trace_a).records;
        const auto b = opi::read_trace(trace_b).records;
        std::cout << opi::format_double(opi::report_relative_winkler(a, b)) << '\n';
        return kOk;
      }
      if (score_dir.empty()) throw opi::DomainError("score needs --dir or --trace/--against");
      const auto rows = opi::score_directory(score_dir);
      opi::write_score_table(std::cout, rows, "recomputed");
      return kOk;
    });
  }
  return kConfigError;
}
