#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "eoslab/config.hpp"
#include "eoslab/flow.hpp"
#include "eoslab/loss.hpp"
#include "eoslab/optimizer.hpp"
#include "eoslab/quadratic_lab.hpp"
#include "eoslab/stableness.hpp"
#include "eoslab/svg_plot.hpp"
#include "eoslab/trace_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace eos;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericalFailure = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long seed = -1;
  double eta = -1.0;
  long steps = -1;
  bool check = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config) {
  auto* opt = cmd->add_option("--config", args.config_path, "experiment config file");
  if (needs_config) opt->required();
  cmd->add_option("--out-dir", args.out_dir, "output directory override");
  cmd->add_option("--seed", args.seed, "seed override");
  cmd->add_option("--eta", args.eta, "learning rate override");
  cmd->add_option("--steps", args.steps, "step count override");
  cmd->add_flag("--check", args.check, "enable property assertions");
  cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = load_experiment_config(ConfigFile::parse_file(args.config_path));
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed >= 0) {
    cfg.init_seed = static_cast<std::uint64_t>(args.seed);
    cfg.run.noise.seed = cfg.init_seed;
  }
  if (args.eta > 0.0) cfg.run.eta = args.eta;
  if (args.steps > 0) cfg.run.steps = args.steps;
  return cfg;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_summary(const fs::path& path, json summary) {
  summary["written_at"] = timestamp();
  std::ofstream out(path);
  out << summary.dump(2) << '\n';
}

bool all_passed(const json& checks) {
  for (const auto& [key, value] : checks.items()) {
    if (value != "pass") return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

int cmd_quadratic(const CommonArgs& args, long seeds) {
  using namespace eos::quad;
  json checks;

  // Canonical two-dimensional instance: a barely-excited top coordinate
  // aligns, settles into the period-two cycle, and reproduces the cycle
  // losses.
  Vector lam(2), xt0(2);
  lam << 1.0, 0.4;
  xt0 << 1e-4, 0.45;
  const long steps = args.steps > 0 ? args.steps : 10000;

  const auto trace = run_tilde(lam, xt0, steps);
  const Vector& last = trace.back();
  const double angle =
      std::acos(std::min(1.0, std::abs(last[0]) / last.norm()));
  checks["top_alignment_limit"] = angle <= 1e-6 ? "pass" : "fail";

  const double norm_sum =
      trace[trace.size() - 1].norm() + trace[trace.size() - 2].norm();
  checks["two_step_norm_sum"] =
      std::abs(norm_sum - lam[0]) <= 1e-8 ? "pass" : "fail";

  const auto cycle = detect_limit_cycle(lam, xt0, 200000, 1e-13);
  const bool cycle_ok = cycle.converged && cycle.C > 0.0 && cycle.C < 1.0 &&
                        cycle.residual_even <= 1e-8 &&
                        cycle.residual_odd <= 1e-8;
  checks["limit_cycle"] = cycle_ok ? "pass" : "fail";

  auto loss_of_tilde = [&](const Vector& xt) {
    double acc = 0.0;
    for (Index i = 0; i < xt.size(); ++i) acc += xt[i] * xt[i] / lam[i];
    return 0.5 * acc;
  };
  const double le = loss_of_tilde(cycle.even_limit);
  const double lo = loss_of_tilde(cycle.odd_limit);
  const double te = 0.5 * cycle.C * cycle.C * lam[0];
  const double to = 0.5 * (cycle.C - 1.0) * (cycle.C - 1.0) * lam[0];
  checks["cycle_losses"] = (std::abs(le - te) <= 1e-6 * te &&
                            std::abs(lo - to) <= 1e-6 * to)
                               ? "pass"
                               : "fail";

  // Seeded five-dimensional instances.
  long set_violations = 0, drop_violations = 0, mono_violations = 0;
  for (std::uint64_t seed = 1; seed <= static_cast<std::uint64_t>(seeds); ++seed) {
    const RandomInstance inst = random_instance(seed, 5);
    const auto tr = run_tilde(inst.lambdas, inst.xt0, 2000);
    set_violations += check_invariant_sets(inst.lambdas, tr).violations;

    double worst = 0.0;
    for (Index j = 0; j < 5; ++j) {
      worst = std::max(worst,
                       invariant_entry_bound(inst.lambdas, inst.xt0.norm(), j));
    }
    const std::size_t start = static_cast<std::size_t>(std::ceil(worst));
    if (start + 10 < tr.size()) {
      std::vector<Vector> tail(tr.begin() + start, tr.end());
      const auto rep = check_alignment_lemmas(inst.lambdas, tail);
      drop_violations += rep.norm_drop_violations;
      mono_violations +=
          rep.monotonicity_violations + rep.subsequence_violations;
    }
  }
  checks["invariant_sets"] = set_violations == 0 ? "pass" : "fail";
  checks["norm_drop"] = drop_violations == 0 ? "pass" : "fail";
  checks["alignment_monotonicity"] = mono_violations == 0 ? "pass" : "fail";

  const double dev = sqrt_quadratic_equivalence(
      lam, Vector::Ones(2), 0.1, 1000);
  checks["sqrt_descent_equivalence"] = dev <= 1e-10 ? "pass" : "fail";

  json summary;
  summary["command"] = "quadratic";
  summary["seeds"] = seeds;
  summary["steps"] = steps;
  summary["cycle"] = {{"C", cycle.C}, {"s", cycle.s}};
  summary["checks"] = checks;

  const fs::path dir = args.out_dir.empty() ? fs::path(".") : fs::path(args.out_dir);
  fs::create_directories(dir);
  write_summary(dir / "quadratic_summary.json", summary);
  if (!args.quiet) std::printf("%s\n", summary["checks"].dump(2).c_str());

  if (args.check && !all_passed(checks)) return kExitCheckFailure;
  return kExitOk;
}

int cmd_run(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  auto model = cfg.make_loss();
  const Vector x0 = cfg.initial_point(*model);

  const Trace trace = run(*model, cfg.run, x0);
  if (trace.nonfinite_abort) {
    std::fprintf(stderr, "run: iterate left the finite range\n");
    return kExitNumericalFailure;
  }

  fs::create_directories(cfg.out_dir);
  const fs::path csv = fs::path(cfg.out_dir) / (cfg.prefix + ".csv");
  write_trace_csv(trace, csv.string(), cfg.run.diagnostics.with_stableness);

  json checks;
  if (args.check) {
    bool monotone_steps = true;
    for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
      monotone_steps &= trace.records[i + 1].step > trace.records[i].step;
    }
    checks["monotone_step_column"] = monotone_steps ? "pass" : "fail";
  }

  json summary;
  summary["command"] = "run";
  summary["optimizer"] = to_string(trace.kind);
  summary["eta"] = trace.eta;
  summary["steps_recorded"] = trace.records.size() - 1;
  summary["undefined_update_stop"] = trace.undefined_update_stop;
  summary["final_loss"] = trace.records.back().loss;
  summary["trace_csv"] = csv.string();
  if (args.check) summary["checks"] = checks;
  write_summary(fs::path(cfg.out_dir) / (cfg.prefix + "_summary.json"), summary);

  if (!args.quiet) {
    std::printf("wrote %s (%zu rows)\n", csv.string().c_str(),
                trace.records.size());
  }
  if (args.check && !all_passed(checks)) return kExitCheckFailure;
  return kExitOk;
}

int cmd_flow(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  auto model = cfg.make_loss();
  const Vector x0 = cfg.initial_point(*model);

  if (cfg.flow.proj.method == ProjectionMethod::PerExampleSpan &&
      !model->has_per_example_gradients()) {
    std::fprintf(stderr, "flow: loss has no per-example decomposition\n");
    return kExitConfigError;
  }

  std::vector<FlowState> trace;
  try {
    trace = integrate_flow(*model, x0, cfg.flow);
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "flow: %s\n", e.what());
    return kExitNumericalFailure;
  }

  fs::create_directories(cfg.out_dir);
  const fs::path csv = fs::path(cfg.out_dir) / (cfg.prefix + "_flow.csv");
  write_flow_csv(trace, csv.string());

  json checks;
  if (args.check) {
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
      monotone &= trace[i + 1].lambda1 <= trace[i].lambda1 + 1e-10;
    }
    checks["sharpness_non_increasing"] = monotone ? "pass" : "fail";
    bool on_manifold = true;
    for (const FlowState& s : trace) {
      on_manifold &= s.grad_norm <= cfg.flow.proj.tol_manifold;
    }
    checks["stays_on_manifold"] = on_manifold ? "pass" : "fail";
  }

  json summary;
  summary["command"] = "flow";
  summary["flow_kind"] = to_string(cfg.flow.kind);
  summary["eta_flow"] = cfg.flow.eta_flow;
  summary["tau_end"] = cfg.flow.tau_end;
  summary["coefficient"] = cfg.flow.coefficient >= 0.0
                               ? cfg.flow.coefficient
                               : default_flow_coefficient(cfg.flow.kind);
  summary["final_lambda1"] = trace.back().lambda1;
  summary["flow_csv"] = csv.string();
  if (args.check) summary["checks"] = checks;
  write_summary(fs::path(cfg.out_dir) / (cfg.prefix + "_flow_summary.json"),
                summary);

  if (!args.quiet) {
    std::printf("wrote %s (%zu states)\n", csv.string().c_str(), trace.size());
  }
  if (args.check && !all_passed(checks)) return kExitCheckFailure;
  return kExitOk;
}

int cmd_compare(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  auto model = cfg.make_loss();
  const Vector x0 = cfg.initial_point(*model);

  const double c_time =
      cfg.compare.c_time > 0.0
          ? cfg.compare.c_time
          : (cfg.run.kind == StepKind::SqrtLossGD ? 0.125 : 0.25);

  // The discrete run must cover the comparison window.
  const long needed = static_cast<long>(
      std::ceil(cfg.flow.tau_end / (c_time * cfg.run.eta * cfg.run.eta)));
  RunConfig run_cfg = cfg.run;
  run_cfg.steps = std::max(run_cfg.steps, needed);
  run_cfg.diag_every = 0;  // manifold points are estimated at sample times

  const Trace gd = run(*model, run_cfg, x0);
  if (gd.nonfinite_abort || static_cast<long>(gd.records.size()) <= needed) {
    std::fprintf(stderr, "compare: discrete run did not cover the window\n");
    return kExitNumericalFailure;
  }

  // Flow integrated with unit coefficient; the time map owns the constant.
  FlowOptions flow_cfg = cfg.flow;
  flow_cfg.coefficient = 1.0;
  std::vector<FlowState> flow;
  try {
    flow = integrate_flow(*model, x0, flow_cfg);
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "compare: %s\n", e.what());
    return kExitNumericalFailure;
  }

  CompareOptions copts = cfg.compare;
  copts.c_time = c_time;
  const ComparisonReport rep = compare_trajectories(*model, flow, gd, copts);

  fs::create_directories(cfg.out_dir);
  const fs::path csv = fs::path(cfg.out_dir) / (cfg.prefix + "_compare.csv");
  write_comparison_csv(rep, csv.string());

  long invalid = 0;
  for (const auto& s : rep.samples) invalid += s.valid ? 0 : 1;

  json summary;
  summary["command"] = "compare";
  summary["c_time"] = rep.c_time;
  summary["convention"] = rep.convention;
  summary["max_abs_distance"] = rep.max_abs_distance;
  summary["max_rel_distance"] = rep.max_rel_distance;
  summary["invalid_samples"] = invalid;
  summary["compare_csv"] = csv.string();
  write_summary(fs::path(cfg.out_dir) / (cfg.prefix + "_compare_summary.json"),
                summary);

  if (!args.quiet) {
    std::printf("max |Phi(gd) - flow| = %g over %zu samples\n",
                rep.max_abs_distance, rep.samples.size());
  }
  return kExitOk;
}

int cmd_stableness_scan(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  auto model = cfg.make_loss();
  const Vector x0 = cfg.initial_point(*model);

  RunConfig run_cfg = cfg.run;
  run_cfg.diag_every = 0;
  const Trace trace = run(*model, run_cfg, x0);
  if (trace.nonfinite_abort) {
    std::fprintf(stderr, "stableness-scan: iterate left the finite range\n");
    return kExitNumericalFailure;
  }

  const long cadence = cfg.run.diag_every > 0 ? cfg.run.diag_every : 1;
  fs::create_directories(cfg.out_dir);
  const fs::path csv = fs::path(cfg.out_dir) / (cfg.prefix + "_stableness.csv");
  std::ofstream out(csv);
  out << "step,eta_effective,stableness,stableness_lb,sqrt_stableness,"
         "sqrt_diverged\n";
  long rows = 0;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& rec = trace.records[i];
    if (rec.step % cadence != 0) continue;
    if (rec.grad_norm <= 1e-300 || !std::isfinite(rec.eta_effective)) continue;
    const StablenessResult s =
        stableness(*model, trace.iterates[i], rec.eta_effective,
                   cfg.run.diagnostics.stableness_grid);
    out << rec.step << ',' << format_double(rec.eta_effective) << ','
        << format_double(s.value) << ',' << format_double(s.lower_bound);
    if (cfg.run.kind == StepKind::SqrtLossGD) {
      const SqrtStablenessResult q = sqrt_stableness(
          *model, trace.iterates[i], trace.eta,
          cfg.run.diagnostics.stableness_grid);
      out << ',' << format_double(q.value) << ',' << (q.diverged ? '1' : '0');
    } else {
      out << ",,";
    }
    out << '\n';
    ++rows;
  }
  out.close();

  json summary;
  summary["command"] = "stableness-scan";
  summary["rows"] = rows;
  summary["stableness_csv"] = csv.string();
  write_summary(
      fs::path(cfg.out_dir) / (cfg.prefix + "_stableness_summary.json"),
      summary);
  if (!args.quiet) {
    std::printf("wrote %s (%ld rows)\n", csv.string().c_str(), rows);
  }
  return kExitOk;
}

int cmd_plot(const std::string& csv_path, const std::string& out_path,
             std::string x_column, std::vector<std::string> columns,
             bool quiet) {
  const CsvTable table = read_csv(csv_path);
  if (x_column.empty()) {
    x_column = table.column("step") >= 0 ? "step" : "tau";
  }
  if (columns.empty()) {
    for (const char* name : {"loss", "lambda1_at_x", "lambda1_at_phi",
                             "lambda1", "alignment", "stableness"}) {
      const Index c = table.column(name);
      if (c < 0) continue;
      bool any = false;
      for (double v : table.columns[static_cast<std::size_t>(c)]) {
        if (std::isfinite(v)) {
          any = true;
          break;
        }
      }
      if (any) columns.push_back(name);
    }
  }
  plot_csv(table, x_column, columns, out_path);
  if (!quiet) std::printf("wrote %s\n", out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "eoslab: descent dynamics at the edge of stability, on small losses "
      "with exact oracles"};
  app.require_subcommand(1);

  CommonArgs quad_args;
  long seeds = 100;
  auto* quad = app.add_subcommand(
      "quadratic", "property suites for the rescaled quadratic dynamics");
  add_common(quad, quad_args, false);
  quad->add_option("--seeds", seeds, "number of random instances");

  CommonArgs run_args;
  auto* run_cmd =
      app.add_subcommand("run", "drive an optimizer and record a trace");
  add_common(run_cmd, run_args, true);

  CommonArgs flow_args;
  auto* flow_cmd = app.add_subcommand(
      "flow", "integrate the on-manifold sharpness-reduction flow");
  add_common(flow_cmd, flow_args, true);

  CommonArgs cmp_args;
  auto* cmp_cmd = app.add_subcommand(
      "compare", "discrete trajectory against the limiting flow");
  add_common(cmp_cmd, cmp_args, true);

  CommonArgs scan_args;
  auto* scan_cmd = app.add_subcommand(
      "stableness-scan", "segment-supremum stableness along a trace");
  add_common(scan_cmd, scan_args, true);

  std::string plot_csv_path, plot_out, plot_x;
  std::vector<std::string> plot_columns;
  bool plot_quiet = false;
  auto* plot_cmd =
      app.add_subcommand("plot", "render line charts from a trace CSV");
  plot_cmd->add_option("--csv", plot_csv_path, "input CSV")->required();
  plot_cmd->add_option("--out", plot_out, "output SVG path")->required();
  plot_cmd->add_option("--x", plot_x, "x column (default step or tau)");
  plot_cmd->add_option("--columns", plot_columns, "y columns")->delimiter(',');
  plot_cmd->add_flag("--quiet", plot_quiet, "suppress output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (quad->parsed()) return cmd_quadratic(quad_args, seeds);
    if (run_cmd->parsed()) return cmd_run(run_args);
    if (flow_cmd->parsed()) return cmd_flow(flow_args);
    if (cmp_cmd->parsed()) return cmd_compare(cmp_args);
    if (scan_cmd->parsed()) return cmd_stableness_scan(scan_args);
    if (plot_cmd->parsed()) {
      return cmd_plot(plot_csv_path, plot_out, plot_x, plot_columns,
                      plot_quiet);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumericalFailure;
  }
  return kExitOk;
}
