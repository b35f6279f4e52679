#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "gcnkit/config.hpp"
#include "gcnkit/error.hpp"
#include "gcnkit/experiments/presets.hpp"
#include "gcnkit/graphio/dataset.hpp"
#include "gcnkit/training/report.hpp"
#include "gcnkit/training/trainer.hpp"

namespace gcnkit {

struct AggregateResult {
  std::string preset;
  std::string dataset;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::size_t n = 0;
  double mean_epoch_seconds = 0.0;
  double mean_val_accuracy = 0.0;
};

/// Mean and sample standard deviation (zero for a single report).
inline AggregateResult aggregate(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw ContractViolation("aggregate: no reports");
  AggregateResult a;
  a.preset = reports.front().preset;
  a.dataset = reports.front().dataset;
  a.n = reports.size();
  const double n = static_cast<double>(a.n);
  for (const auto& r : reports) {
    a.mean_accuracy += r.test_accuracy;
    a.mean_val_accuracy += r.best_val_accuracy;
    a.mean_epoch_seconds += r.mean_epoch_seconds();
  }
  a.mean_accuracy /= n;
  a.mean_val_accuracy /= n;
  a.mean_epoch_seconds /= n;
  if (a.n > 1) {
    double ss = 0.0;
    for (const auto& r : reports) ss += (r.test_accuracy - a.mean_accuracy) * (r.test_accuracy - a.mean_accuracy);
    a.std_accuracy = std::sqrt(ss / (n - 1.0));
  }
  return a;
}

inline unsigned default_jobs() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/**
 * @brief Runs job(0..count-1) on at most `jobs` threads.
 *
 * The first exception thrown by a job is rethrown after every thread joins.
 */
inline void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& job) {
  if (jobs == 0) jobs = 1;
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(jobs, count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed) std::rethrow_exception(first_error);
}

inline std::filesystem::path run_report_path(const std::filesystem::path& out_dir, std::string_view preset,
                                             std::string_view dataset, std::uint64_t seed) {
  return out_dir / "runs" / std::string(preset) / std::string(dataset) / (std::to_string(seed) + ".report");
}

struct ReplicateOptions {
  unsigned jobs = 1;
  /// Reports are written under `<out_dir>/runs/` when set.
  std::optional<std::filesystem::path> out_dir;
};

struct ReplicateResult {
  AggregateResult aggregate;
  std::vector<RunReport> reports;
};

/// Trains seeds 0..n_seeds-1 of `rc` (the seed field is overridden).
inline ReplicateResult replicate_config(const RunConfig& rc, const std::string& preset, const Dataset& d,
                                        std::size_t n_seeds, const ReplicateOptions& opt = {}) {
  if (n_seeds < 2) throw ConfigError("replicate needs at least 2 seeds");
  std::vector<RunReport> reports(n_seeds);
  parallel_for(n_seeds, opt.jobs, [&](std::size_t i) {
    TrainConfig tcfg = rc.train;
    tcfg.seed = i;
    reports[i] = train(rc.model, tcfg, d, {preset, {}}).report;
  });
  if (opt.out_dir) {
    for (const auto& r : reports) write_report(r, run_report_path(*opt.out_dir, r.preset, r.dataset, r.seed));
  }
  return {aggregate(reports), std::move(reports)};
}

inline ReplicateResult replicate(std::string_view preset, const Dataset& d, std::size_t n_seeds,
                                 const ReplicateOptions& opt = {}) {
  return replicate_config(preset_config(preset), std::string(preset), d, n_seeds, opt);
}

struct SweepGrid {
  std::string base = "gcn";
  std::vector<ActivationKind> activations;
  std::vector<std::size_t> hidden_sizes;
  std::vector<LossVariant> loss_variants;
  std::size_t seeds_per_cell = 2;

  std::size_t cell_count() const { return activations.size() * hidden_sizes.size() * loss_variants.size(); }
};

inline constexpr std::array<std::size_t, 9> kAllowedHiddenSizes{16, 32, 48, 64, 80, 96, 100, 112, 200};

inline void validate_grid(const SweepGrid& g) {
  if (g.activations.empty() || g.hidden_sizes.empty() || g.loss_variants.empty()) {
    throw ConfigError("sweep grid axes must be nonempty");
  }
  for (auto a : g.activations) {
    if (a == ActivationKind::none) throw ConfigError("sweep activations must be relu, relu6, elu or selu");
  }
  for (auto h : g.hidden_sizes) {
    if (std::find(kAllowedHiddenSizes.begin(), kAllowedHiddenSizes.end(), h) == kAllowedHiddenSizes.end()) {
      throw ConfigError(fmt::format("hidden size {} outside the sweep set", h));
    }
  }
  if (g.seeds_per_cell < 2) throw ConfigError("seeds_per_cell must be at least 2");
}

/**
 * Grid file: `base = <preset>`, `activations = relu, elu`, `hidden_sizes = 16, 64`,
 * `loss_variants = softmax_ce`, `seeds_per_cell = 10`.
 */
inline SweepGrid parse_grid(std::string_view text, const std::string& source = "<grid>") {
  using namespace config_detail;
  SweepGrid g;
  std::size_t lineno = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    LineContext ctx{source, lineno};
    auto eq = line.find('=');
    if (eq == std::string_view::npos) ctx.fail("expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    auto items = split(value, ',');
    try {
      if (key == "base") {
        preset_config(value);
        g.base = std::string(value);
      } else if (key == "activations") {
        for (auto s : items) g.activations.push_back(parse_activation_kind(s));
      } else if (key == "hidden_sizes") {
        for (auto s : items) g.hidden_sizes.push_back(to_int<std::size_t>(s, ctx));
      } else if (key == "loss_variants") {
        for (auto s : items) g.loss_variants.push_back(parse_loss_variant(s));
      } else if (key == "seeds_per_cell") {
        g.seeds_per_cell = to_int<std::size_t>(value, ctx);
      } else {
        ctx.fail("unknown key '" + std::string(key) + "'");
      }
    } catch (const ConfigError& e) {
      if (std::string_view(e.what()).starts_with(source)) throw;
      ctx.fail(e.what());
    }
  }
  validate_grid(g);
  return g;
}

struct GridCell {
  std::string label;
  RunConfig config;
  AggregateResult result;
  bool failed = false;
  std::string error;
};

/// Applies a cell's activation and width to every hidden layer of `base`.
inline RunConfig grid_cell_config(RunConfig base, ActivationKind act, std::size_t hidden, LossVariant loss) {
  for (auto& l : base.model.layers) {
    if (l.out_dim == kClassesDim) continue;
    l.activation = act;
    l.out_dim = hidden;
  }
  base.train.loss = loss;
  return base;
}

struct GridOptions {
  unsigned jobs = 1;
  std::optional<std::filesystem::path> out_dir;
  /// Use mean epoch time as the first tie-break; without it ties go straight to the label.
  bool time_tiebreak = true;
};

inline void rank_cells(std::vector<GridCell>& cells, bool time_tiebreak) {
  std::stable_sort(cells.begin(), cells.end(), [&](const GridCell& a, const GridCell& b) {
    if (a.failed != b.failed) return !a.failed;
    if (!a.failed) {
      if (a.result.mean_val_accuracy != b.result.mean_val_accuracy) {
        return a.result.mean_val_accuracy > b.result.mean_val_accuracy;
      }
      if (time_tiebreak && a.result.mean_epoch_seconds != b.result.mean_epoch_seconds) {
        return a.result.mean_epoch_seconds < b.result.mean_epoch_seconds;
      }
    }
    return a.label < b.label;
  });
}

/// Trains every cell `seeds_per_cell` times and returns cells best first.
inline std::vector<GridCell> run_grid(const SweepGrid& grid, const RunConfig& base, const Dataset& d,
                                      const GridOptions& opt = {}) {
  validate_grid(grid);
  std::vector<GridCell> cells;
  for (auto act : grid.activations) {
    for (auto hidden : grid.hidden_sizes) {
      for (auto loss : grid.loss_variants) {
        GridCell c;
        c.label = fmt::format("{}-{}-h{}-{}", grid.base, to_string(act), hidden, to_string(loss));
        c.config = grid_cell_config(base, act, hidden, loss);
        c.config.model.name = c.label;
        cells.push_back(std::move(c));
      }
    }
  }
  const std::size_t seeds = grid.seeds_per_cell;
  std::vector<std::optional<RunReport>> reports(cells.size() * seeds);
  std::vector<std::string> errors(cells.size() * seeds);
  parallel_for(reports.size(), opt.jobs, [&](std::size_t job) {
    const auto& cell = cells[job / seeds];
    TrainConfig tcfg = cell.config.train;
    tcfg.seed = job % seeds;
    try {
      reports[job] = train(cell.config.model, tcfg, d, {cell.label, {}}).report;
    } catch (const DivergenceError& e) {
      errors[job] = e.what();
    }
  });
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<RunReport> ok;
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto& r = reports[c * seeds + s];
      if (r) {
        ok.push_back(*r);
        if (opt.out_dir) write_report(*r, run_report_path(*opt.out_dir, r->preset, r->dataset, r->seed));
      } else if (!cells[c].failed) {
        cells[c].failed = true;
        cells[c].error = errors[c * seeds + s];
      }
    }
    if (!cells[c].failed) {
      cells[c].result = aggregate(ok);
    } else {
      cells[c].result.preset = cells[c].label;
      cells[c].result.dataset = d.name;
    }
  }
  rank_cells(cells, opt.time_tiebreak);
  return cells;
}

enum class TableFormat { csv, text };

inline TableFormat parse_table_format(std::string_view s) {
  if (s == "csv") return TableFormat::csv;
  if (s == "text") return TableFormat::text;
  throw ConfigError("unknown table format '" + std::string(s) + "' (expected csv or text)");
}

inline constexpr std::array<std::string_view, 6> kTableColumns{"preset", "dataset", "mean", "std", "n",
                                                                "epoch_time"};

namespace table_detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> row_fields(const AggregateResult& r) {
  return {r.preset,
          r.dataset,
          fmt::format("{:.6f}", r.mean_accuracy),
          fmt::format("{:.6f}", r.std_accuracy),
          std::to_string(r.n),
          fmt::format("{:.6f}", r.mean_epoch_seconds)};
}

}  // namespace table_detail

inline std::vector<AggregateResult> sorted_results(std::vector<AggregateResult> results) {
  std::stable_sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return std::tie(a.preset, a.dataset) < std::tie(b.preset, b.dataset);
  });
  return results;
}

/// One row per result sorted by (preset, dataset); numbers printed with 6 decimals.
inline std::string emit_table(const std::vector<AggregateResult>& results, TableFormat format) {
  if (results.empty()) throw ContractViolation("emit_table: no results");
  std::vector<std::vector<std::string>> rows;
  rows.emplace_back(kTableColumns.begin(), kTableColumns.end());
  for (const auto& r : sorted_results(results)) rows.push_back(table_detail::row_fields(r));

  std::string out;
  if (format == TableFormat::csv) {
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += table_detail::csv_field(row[i]);
      }
      out += "\r\n";
    }
    return out;
  }
  std::vector<std::size_t> width(kTableColumns.size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      // Text columns left-aligned, numbers right-aligned.
      line += i < 2 ? fmt::format("{:<{}}", row[i], width[i]) : fmt::format("{:>{}}", row[i], width[i]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

/// RFC 4180 record splitting; accepts CRLF or LF line ends.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw FormatError("<csv>", rows.size() + 1, "unterminated quoted field");
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Reads emit_table(..., csv) output back.
inline std::vector<AggregateResult> parse_table_csv(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw FormatError("<csv>", 1, "missing header");
  for (std::size_t i = 0; i < kTableColumns.size(); ++i) {
    if (rows[0].size() != kTableColumns.size() || rows[0][i] != kTableColumns[i]) {
      throw FormatError("<csv>", 1, "unexpected header");
    }
  }
  std::vector<AggregateResult> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != kTableColumns.size()) throw FormatError("<csv>", r + 1, "wrong field count");
    AggregateResult a;
    a.preset = f[0];
    a.dataset = f[1];
    try {
      a.mean_accuracy = std::stod(f[2]);
      a.std_accuracy = std::stod(f[3]);
      a.n = std::stoul(f[4]);
      a.mean_epoch_seconds = std::stod(f[5]);
    } catch (const std::logic_error&) {
      throw FormatError("<csv>", r + 1, "bad number");
    }
    out.push_back(std::move(a));
  }
  return out;
}

/// Every `*.report` under `runs_dir`, grouped by (preset, dataset) in seed order.
inline std::vector<AggregateResult> aggregate_runs(const std::filesystem::path& runs_dir) {
  if (!std::filesystem::is_directory(runs_dir)) throw IoError("not a directory: " + runs_dir.string());
  std::map<std::pair<std::string, std::string>, std::vector<RunReport>> groups;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(runs_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".report") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto r = read_report(f);
    groups[{r.preset, r.dataset}].push_back(std::move(r));
  }
  std::vector<AggregateResult> out;
  for (auto& [key, reports] : groups) {
    std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
    out.push_back(aggregate(reports));
  }
  return out;
}

}  // namespace gcnkit
