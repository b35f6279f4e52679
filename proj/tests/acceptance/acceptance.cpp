// Acceptance gate: one [PASS]/[FAIL]/[BLOCKED] line per criterion.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <sys/wait.h>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gcnkit/gcnkit.hpp"
#include "properties.hpp"
#include "toy_data.hpp"

using namespace gcnkit;

namespace {

enum class Status { pass, fail, blocked };

struct Gate {
  int failed = 0;
  int blocked = 0;

  void line(Status s, const std::string& id, const std::string& text) {
    const char* tag = s == Status::pass ? "[PASS]" : s == Status::fail ? "[FAIL]" : "[BLOCKED]";
    fmt::print("{} {} {}\n", tag, id, text);
    if (s == Status::fail) ++failed;
    if (s == Status::blocked) ++blocked;
  }
  void detail(const std::string& text) { fmt::print("       {}\n", text); }
  void check(bool ok, const std::string& id, const std::string& text) { line(ok ? Status::pass : Status::fail, id, text); }
};

void report_checks(Gate& gate, const std::string& id, const std::string& title, const std::vector<props::Check>& checks) {
  bool ok = !checks.empty();
  for (const auto& c : checks) ok = ok && c.pass;
  gate.check(ok, id, fmt::format("{} ({} checks)", title, checks.size()));
  for (const auto& c : checks)
    if (!ok || !c.pass) gate.detail(fmt::format("{:<4} {:<44} {:.3e} <= {:.1e}", c.pass ? "ok" : "bad", c.name, c.value, c.limit));
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string("\"") + GCNKIT_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

void determinism(Gate& gate) {
  auto planted = toy::planted_partition(20, 3, 0.3, 0.02, 30, 5);
  std::vector<std::string> library_bad;
  for (const auto& preset : preset_names()) {
    auto rc = preset_config(preset);
    rc.train.seed = 7;
    auto a = train(rc.model, rc.train, planted, {preset, {}});
    auto b = train(rc.model, rc.train, planted, {preset, {}});
    if (report_text(a.report) != report_text(b.report) || a.params != b.params) library_bad.push_back(preset);
  }

  toy::TempDir tmp;
  const auto data = tmp.path() / "planted";
  write_dataset(planted, data);
  std::vector<std::string> cli_bad;
  for (const auto& preset : preset_names()) {
    std::string first;
    bool ok = true;
    for (const char* tag : {"a", "b"}) {
      const auto out = tmp.path() / fmt::format("{}_{}.report", preset, tag);
      ok = ok && run_binary(fmt::format("train --data {} --preset {} --seed 3 --quiet --out {}", quoted(data), preset,
                                        quoted(out))) == 0;
      if (!ok) break;
      const auto text = report_detail::read_file(out);
      if (first.empty()) first = text;
      ok = ok && text == first;
    }
    if (!ok) cli_bad.push_back(preset);
  }

  bool jobs_ok = true;
  for (unsigned jobs : {1u, 4u}) {
    jobs_ok = jobs_ok && run_binary(fmt::format("replicate --data {} --preset confgcn --seeds 4 --jobs {} --quiet --out {}",
                                                quoted(data), jobs, quoted(tmp.path() / fmt::format("j{}", jobs)))) == 0;
  }
  for (std::uint64_t s = 0; jobs_ok && s < 4; ++s) {
    jobs_ok = report_detail::read_file(run_report_path(tmp.path() / "j1", "confgcn", "planted", s)) ==
              report_detail::read_file(run_report_path(tmp.path() / "j4", "confgcn", "planted", s));
  }

  const bool ok = library_bad.empty() && cli_bad.empty() && jobs_ok;
  gate.check(ok, "C13", "same seed gives byte-identical reports (library, CLI, --jobs 1 vs 4)");
  for (const auto& p : library_bad) gate.detail("library mismatch: " + p);
  for (const auto& p : cli_bad) gate.detail("cli mismatch: " + p);
  if (!jobs_ok) gate.detail("replicate output depends on --jobs");
}

int properties() {
  Gate gate;
  report_checks(gate, "C9", "analytic gradients agree with finite differences", props::gradient_suite(20, 9));
  report_checks(gate, "C10", "clustering, spmm and normalization match brute-force oracles", props::oracle_suite(10));
  report_checks(gate, "C11", "limiting cases reduce to the plain layers", props::reduction_suite(11));
  determinism(gate);
  fmt::print("summary: {} failed\n", gate.failed);
  return gate.failed == 0 ? 0 : 1;
}

struct PaperRow {
  const char* dir;
  std::size_t nodes, edges, classes, features;
  double mismatch, ratio;
};

constexpr PaperRow kTable1[] = {
    {"cora", 2708, 5429, 7, 1433, 0.002, 0.052},
    {"cora_ml", 2995, 8416, 7, 2879, 0.018, 0.166},
    {"citeseer", 3327, 4372, 6, 3703, 0.003, 0.036},
    {"pubmed", 19717, 44338, 3, 500, 0.0, 0.003},
};

struct Replication {
  std::filesystem::path root;
  std::size_t seeds = 10;
  std::size_t timing_seeds = 3;
  unsigned jobs = 0;
  std::optional<std::filesystem::path> out;

  std::map<std::string, Dataset> data;
  std::map<std::pair<std::string, std::string>, ReplicateResult> cache;
  std::vector<AggregateResult> table;

  const Dataset* dataset(const std::string& name) {
    if (auto it = data.find(name); it != data.end()) return &it->second;
    return nullptr;
  }

  void load(Gate& gate) {
    for (const auto& row : kTable1) {
      const auto dir = root / row.dir;
      if (!std::filesystem::exists(dir / "meta.json")) {
        gate.detail(fmt::format("{}: not found under {}", row.dir, root.string()));
        continue;
      }
      try {
        data.emplace(row.dir, load_dataset(dir, row.dir));
      } catch (const Error& e) {
        gate.detail(fmt::format("{}: {}", row.dir, e.what()));
      }
    }
  }

  const ReplicateResult& run(const std::string& preset, const std::string& name) {
    const auto key = std::make_pair(preset, name);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    ReplicateOptions opt;
    opt.jobs = jobs;
    if (out) opt.out_dir = *out;
    auto res = replicate(preset, data.at(name), seeds, opt);
    fmt::print("       {:<12} {:<9} {:6.2f} +- {:.2f} (n={})\n", preset, name, 100 * res.aggregate.mean_accuracy,
               100 * res.aggregate.std_accuracy, res.aggregate.n);
    table.push_back(res.aggregate);
    return cache.emplace(key, std::move(res)).first->second;
  }

  /// Mean test accuracy in percent.
  double pct(const std::string& preset, const std::string& name) { return 100.0 * run(preset, name).aggregate.mean_accuracy; }
};

bool same_trajectory(const RunReport& a, const RunReport& b) {
  if (a.epochs.size() != b.epochs.size() || a.test_accuracy != b.test_accuracy || a.best_epoch != b.best_epoch)
    return false;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const auto &x = a.epochs[i], &y = b.epochs[i];
    if (x.train_loss != y.train_loss || x.val_loss != y.val_loss || x.val_accuracy != y.val_accuracy) return false;
  }
  return true;
}

void band(Gate& gate, Replication& rep, const std::string& id, const std::string& preset, const std::string& name,
          double lo, double hi) {
  if (!rep.dataset(name)) {
    gate.line(Status::blocked, id, fmt::format("{} on {}: dataset missing", preset, name));
    return;
  }
  const double m = rep.pct(preset, name);
  gate.check(m >= lo && m <= hi, id, fmt::format("{} on {}: {:.2f} in [{:.1f}, {:.1f}]", preset, name, m, lo, hi));
}

int replication(Replication& rep) {
  Gate gate;
  rep.load(gate);

  for (const auto& row : kTable1) {
    const auto* d = rep.dataset(row.dir);
    if (!d) {
      gate.line(Status::blocked, "C12", fmt::format("{} statistics: dataset missing", row.dir));
      continue;
    }
    const auto s = compute_stats(*d);
    const bool ok = s.nodes == row.nodes && s.edges == row.edges && s.classes == row.classes &&
                    s.features == row.features && std::abs(s.label_ratio - row.ratio) <= 0.001;
    gate.check(ok, "C12",
               fmt::format("{} statistics: nodes {}/{} edges {}/{} classes {}/{} features {}/{} ratio {:.3f}/{:.3f}",
                           row.dir, s.nodes, row.nodes, s.edges, row.edges, s.classes, row.classes, s.features,
                           row.features, s.label_ratio, row.ratio));
    gate.detail(fmt::format("label mismatch {:.3f} (published {:.3f}, informational)", s.label_mismatch, row.mismatch));
  }

  band(gate, rep, "C1", "gcn", "cora", 78.4, 83.4);
  band(gate, rep, "C2", "gcn", "citeseer", 66.9, 71.9);
  band(gate, rep, "C3", "gcn", "pubmed", 74.3, 79.3);

  if (rep.dataset("cora")) {
    const double d = rep.pct("dgcn", "cora"), g = rep.pct("gcn", "cora");
    gate.check(d >= 79.6 && d <= 84.6 && d >= g - 0.5, "C4",
               fmt::format("dgcn on cora: {:.2f} in [79.6, 84.6] and >= gcn - 0.5 = {:.2f}", d, g - 0.5));
  } else {
    gate.line(Status::blocked, "C4", "dgcn on cora: dataset missing");
  }

  band(gate, rep, "C5", "convgcn", "cora", 77.6, 82.6);
  if (const auto* cora = rep.dataset("cora")) {
    auto conv = preset_config("convgcn");
    std::get<ConvexActivation>(conv.model.layers[0].activation.value).learnable = false;
    auto plain = conv;
    plain.model.layers[0].activation = ActivationKind::relu6;
    std::vector<RunReport> a(rep.seeds), b(rep.seeds);
    parallel_for(rep.seeds, rep.jobs, [&](std::size_t i) {
      auto tc = conv.train, tp = plain.train;
      tc.seed = tp.seed = i;
      a[i] = train(conv.model, tc, *cora).report;
      b[i] = train(plain.model, tp, *cora).report;
    });
    std::size_t same = 0;
    for (std::size_t i = 0; i < rep.seeds; ++i) same += same_trajectory(a[i], b[i]) ? 1 : 0;
    gate.check(same == rep.seeds, "C5",
               fmt::format("fixed convex(relu6:0.8,relu6:0.2) equals relu6 GCN on cora: {}/{} seeds identical", same,
                           rep.seeds));
  } else {
    gate.line(Status::blocked, "C5", "convex collapse on cora: dataset missing");
  }

  if (rep.dataset("cora") && rep.dataset("citeseer")) {
    const double cc = rep.pct("ccgcn", "cora"), g = rep.pct("gcn", "cora");
    const double cs = rep.pct("ccgcn", "citeseer"), gs = rep.pct("gcn", "citeseer");
    gate.check(g - cc >= 15.0 && cs < gs, "C6",
               fmt::format("ccgcn below gcn: cora gap {:.2f} >= 15, citeseer {:.2f} < {:.2f}", g - cc, cs, gs));
  } else {
    gate.line(Status::blocked, "C6", "ccgcn vs gcn on cora and citeseer: dataset missing");
  }

  band(gate, rep, "C7", "confgcn", "cora", 78.0, 85.0);
  if (rep.dataset("cora")) gate.detail(fmt::format("gap to published 82.0: {:+.2f}", rep.pct("confgcn", "cora") - 82.0));

  if (const auto* pubmed = rep.dataset("pubmed")) {
    double slowest_plain = 0.0, fastest_conf = std::numeric_limits<double>::infinity();
    std::string slow_name, fast_name;
    for (const auto& preset : preset_names()) {
      auto res = replicate(preset, *pubmed, rep.timing_seeds, {});
      const double t = res.aggregate.mean_epoch_seconds;
      gate.detail(fmt::format("{:<12} {:.4f} s/epoch", preset, t));
      if (is_confidence_preset(preset)) {
        if (t < fastest_conf) fastest_conf = t, fast_name = preset;
      } else if (t > slowest_plain) {
        slowest_plain = t, slow_name = preset;
      }
    }
    gate.check(fastest_conf > slowest_plain, "C8",
               fmt::format("pubmed epoch time: fastest confidence {} {:.4f} s > slowest plain {} {:.4f} s", fast_name,
                           fastest_conf, slow_name, slowest_plain));
  } else {
    gate.line(Status::blocked, "C8", "pubmed epoch timing: dataset missing");
  }

  if (rep.out && !rep.table.empty()) {
    std::filesystem::create_directories(*rep.out / "tables");
    std::ofstream(*rep.out / "tables" / "acceptance.csv") << emit_table(rep.table, TableFormat::csv);
    std::ofstream(*rep.out / "tables" / "acceptance.txt") << emit_table(rep.table, TableFormat::text);
  }
  fmt::print("summary: {} failed, {} blocked\n", gate.failed, gate.blocked);
  if (gate.failed) return 1;
  return gate.blocked ? 77 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcnkit acceptance gate"};
  bool props_mode = false, repl_mode = false;
  Replication rep;
  std::string root, out;
  app.add_flag("--properties", props_mode, "run the property criteria");
  app.add_flag("--replication", repl_mode, "run the dataset criteria");
  app.add_option("--data-root", root, "directory holding cora/ citeseer/ pubmed/ cora_ml/");
  app.add_option("--seeds", rep.seeds, "seeds per preset")->check(CLI::Range(2, 1000));
  app.add_option("--timing-seeds", rep.timing_seeds, "seeds per preset for the timing criterion")
      ->check(CLI::Range(2, 1000));
  app.add_option("--jobs", rep.jobs, "worker threads (0 = all cores)")->check(CLI::Range(0u, 1024u));
  app.add_option("--out", out, "write reports and tables here");
  CLI11_PARSE(app, argc, argv);
  if (props_mode == repl_mode) {
    std::cerr << "choose exactly one of --properties or --replication\n";
    return 2;
  }
  try {
    if (props_mode) return properties();
    rep.root = root.empty() ? std::filesystem::path("data") : std::filesystem::path(root);
    if (!out.empty()) rep.out = out;
    if (rep.jobs == 0) rep.jobs = default_jobs();
    return replication(rep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
