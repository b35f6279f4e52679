#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gcnkit/config.hpp"
#include "gcnkit/error.hpp"
#include "gcnkit/experiments/experiments.hpp"
#include "gcnkit/experiments/presets.hpp"
#include "gcnkit/graphio/dataset.hpp"
#include "gcnkit/topology/topology.hpp"
#include "gcnkit/training/report.hpp"
#include "gcnkit/training/trainer.hpp"

namespace gcnkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

/// Thrown for flag combinations CLI11 cannot express.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class Verbosity { quiet, normal, verbose };

struct Options {
  std::string data;
  std::string out;
  std::string preset;
  std::string config;
  std::uint64_t seed = 0;
  std::string grid;
  std::size_t seeds = 10;
  std::string runs;
  std::string format = "csv";
  unsigned jobs = default_jobs();
  bool quiet = false;
  bool verbose = false;

  Verbosity verbosity() const {
    if (quiet) return Verbosity::quiet;
    return verbose ? Verbosity::verbose : Verbosity::normal;
  }
};

namespace cli_detail {

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
}

inline RunConfig resolve_run_config(const Options& o) {
  if (!o.preset.empty() && !o.config.empty()) throw UsageError("--preset and --config are mutually exclusive");
  if (!o.config.empty()) return load_run_config(o.config);
  require(o.preset, "--preset or --config");
  return preset_config(o.preset);
}

inline void write_text(const std::string& path, const std::string& text) {
  report_detail::write_file(path, text);
}

inline int cmd_validate(const Options& o, std::ostream& out) {
  require(o.data, "--data");
  Dataset d = load_dataset(o.data);
  auto s = compute_stats(d);
  out << fmt::format("dataset={} nodes={} edges={} classes={} features={} label_mismatch={:.3f} label_ratio={:.3f}\n",
                     d.name, s.nodes, s.edges, s.classes, s.features, s.label_mismatch, s.label_ratio);
  out << fmt::format("train={} val={} test={}\n", d.train_mask.size(), d.val_mask.size(), d.test_mask.size());
  return kExitOk;
}

inline int cmd_cc(const Options& o, std::ostream& out) {
  require(o.data, "--data");
  require(o.out, "--out");
  Dataset d = load_dataset(o.data);
  auto cc = local_clustering_coefficients(d.adjacency);
  std::string text = "# node clustering_coefficient\n";
  for (std::size_t i = 0; i < cc.size(); ++i) text += fmt::format("{} {}\n", i, cc[i]);
  write_text(o.out, text);
  if (o.verbosity() != Verbosity::quiet) out << fmt::format("wrote {} coefficients to {}\n", cc.size(), o.out);
  return kExitOk;
}

inline int cmd_train(const Options& o, std::ostream& out) {
  RunConfig rc = resolve_run_config(o);
  require(o.data, "--data");
  rc.train.seed = o.seed;
  Dataset d = load_dataset(o.data);
  TrainOptions to;
  to.preset = o.preset.empty() ? rc.model.name : o.preset;
  // Without --out the report goes to the results layout under the working directory.
  const std::filesystem::path report_path =
      o.out.empty() ? run_report_path(".", to.preset, d.name, o.seed) : std::filesystem::path(o.out);
  const auto v = o.verbosity();
  to.on_epoch = [&](const EpochRecord& e) {
    if (v == Verbosity::quiet) return;
    if (v == Verbosity::normal && e.epoch % 10 != 0) return;
    out << fmt::format("epoch {:4d} train_loss {:.6f} val_loss {:.6f} val_acc {:.4f}\n", e.epoch, e.train_loss,
                       e.val_loss, e.val_accuracy);
  };
  auto result = train(rc.model, rc.train, d, to);
  write_report(result.report, report_path);
  if (v != Verbosity::quiet) {
    out << fmt::format("best_epoch {} test_acc {:.4f} report {}\n", result.report.best_epoch,
                       result.report.test_accuracy, report_path.string());
  }
  return kExitOk;
}

inline int cmd_replicate(const Options& o, std::ostream& out) {
  require(o.preset, "--preset");
  RunConfig rc = preset_config(o.preset);
  require(o.data, "--data");
  require(o.out, "--out");
  Dataset d = load_dataset(o.data);
  auto r = replicate_config(rc, o.preset, d, o.seeds, {o.jobs, std::filesystem::path(o.out)});
  const std::filesystem::path table = std::filesystem::path(o.out) / "tables" / (o.preset + "_" + d.name + ".csv");
  write_text(table.string(), emit_table({r.aggregate}, TableFormat::csv));
  if (o.verbosity() != Verbosity::quiet) out << emit_table({r.aggregate}, TableFormat::text);
  return kExitOk;
}

inline int cmd_sweep(const Options& o, std::ostream& out) {
  require(o.grid, "--grid");
  SweepGrid grid = parse_grid(report_detail::read_file(o.grid), o.grid);
  require(o.data, "--data");
  require(o.out, "--out");
  Dataset d = load_dataset(o.data);
  const std::filesystem::path root(o.out);
  auto cells = run_grid(grid, preset_config(grid.base), d, {o.jobs, root, true});
  std::vector<AggregateResult> ok;
  std::string ranking = "# rank label mean_val_accuracy mean_test_accuracy mean_epoch_seconds status\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (!c.failed) ok.push_back(c.result);
    ranking += fmt::format("{} {} {:.6f} {:.6f} {:.6f} {}\n", i + 1, c.label, c.result.mean_val_accuracy,
                           c.result.mean_accuracy, c.result.mean_epoch_seconds,
                           c.failed ? "failed" : "ok");
  }
  const std::string name = std::filesystem::path(o.grid).stem().string();
  write_text((root / "tables" / (name + "_ranking.txt")).string(), ranking);
  if (!ok.empty()) write_text((root / "tables" / (name + ".csv")).string(), emit_table(ok, TableFormat::csv));
  if (o.verbosity() != Verbosity::quiet) out << ranking;
  return ok.empty() ? kExitValidation : kExitOk;
}

inline int cmd_table(const Options& o, std::ostream& out) {
  require(o.runs, "--runs");
  require(o.out, "--out");
  const TableFormat format = parse_table_format(o.format);
  auto results = aggregate_runs(o.runs);
  if (results.empty()) throw IoError("no .report files under " + o.runs);
  write_text(o.out, emit_table(results, format));
  if (o.verbosity() != Verbosity::quiet) out << fmt::format("wrote {} rows to {}\n", results.size(), o.out);
  return kExitOk;
}

}  // namespace cli_detail

/**
 * @brief Parses argv and runs one subcommand.
 *
 * Exit codes: 0 success, 1 validation failure (bad data files, invariant
 * violations, divergence), 2 usage error (unknown flag/subcommand/preset,
 * bad config).
 */
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph convolutional network experiments", "gcnkit"};
  app.require_subcommand(1, 1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Load a dataset, check invariants and print its statistics");
  validate->add_option("--data", o.data, "Dataset directory");

  auto* cc = app.add_subcommand("cc", "Write per-node local clustering coefficients");
  cc->add_option("--data", o.data, "Dataset directory");
  cc->add_option("--out", o.out, "Output file");

  auto* train_cmd = app.add_subcommand("train", "Train one model and write its report");
  train_cmd->add_option("--data", o.data, "Dataset directory");
  train_cmd->add_option("--preset", o.preset, "Preset name");
  train_cmd->add_option("--config", o.config, "Run config file");
  train_cmd->add_option("--seed", o.seed, "Random seed");
  train_cmd->add_option("--out", o.out, "Report file");

  auto* sweep = app.add_subcommand("sweep", "Grid search over activations, hidden sizes and losses");
  sweep->add_option("--data", o.data, "Dataset directory");
  sweep->add_option("--grid", o.grid, "Grid file");
  sweep->add_option("--out", o.out, "Results directory");
  sweep->add_option("--jobs", o.jobs, "Parallel sessions")->check(CLI::PositiveNumber);

  auto* repl = app.add_subcommand("replicate", "Train a preset over seeds 0..N-1 and aggregate");
  repl->add_option("--data", o.data, "Dataset directory");
  repl->add_option("--preset", o.preset, "Preset name");
  repl->add_option("--seeds", o.seeds, "Number of seeds")->check(CLI::Range(2, 1000000));
  repl->add_option("--out", o.out, "Results directory");
  repl->add_option("--jobs", o.jobs, "Parallel sessions")->check(CLI::PositiveNumber);

  auto* table = app.add_subcommand("table", "Aggregate run reports into a table");
  table->add_option("--runs", o.runs, "Directory of .report files");
  table->add_option("--format", o.format, "csv or text");
  table->add_option("--out", o.out, "Output file");

  for (auto* sub : {validate, cc, train_cmd, sweep, repl, table}) {
    sub->add_flag("--quiet", o.quiet, "Suppress progress output");
    sub->add_flag("--verbose", o.verbose, "Log every epoch");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (o.quiet && o.verbose) throw UsageError("--quiet and --verbose are mutually exclusive");
    if (*validate) return cli_detail::cmd_validate(o, out);
    if (*cc) return cli_detail::cmd_cc(o, out);
    if (*train_cmd) return cli_detail::cmd_train(o, out);
    if (*sweep) return cli_detail::cmd_sweep(o, out);
    if (*repl) return cli_detail::cmd_replicate(o, out);
    if (*table) return cli_detail::cmd_table(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace gcnkit::cli
