#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <set>

#include "gcnkit/experiments/experiments.hpp"
#include "gcnkit/experiments/presets.hpp"
#include "toy_data.hpp"

using namespace gcnkit;

namespace {

AggregateResult row(std::string preset, std::string dataset, double mean, double sd, std::size_t n, double t) {
  AggregateResult a;
  a.preset = std::move(preset);
  a.dataset = std::move(dataset);
  a.mean_accuracy = mean;
  a.std_accuracy = sd;
  a.n = n;
  a.mean_epoch_seconds = t;
  return a;
}

RunReport report(double acc, std::uint64_t seed) {
  RunReport r;
  r.preset = "gcn";
  r.dataset = "toy";
  r.seed = seed;
  r.test_accuracy = acc;
  r.best_val_accuracy = acc / 2;
  r.epochs.push_back({1, 1.0, 1.0, 0.5, 0.25});
  return r;
}

Dataset planted() { return toy::planted_partition(20, 3, 0.3, 0.02, 30, 5); }

}  // namespace

TEST(Presets, TenVariants) {
  const std::vector<std::string> want{"gcn",     "opgcn",     "convgcn",     "ccgcn",     "dgcn",
                                      "confgcn", "opconfgcn", "convconfgcn", "ccconfgcn", "dconfgcn"};
  EXPECT_EQ(preset_names(), want);
  for (const auto& name : want) {
    auto rc = preset_config(name);
    EXPECT_EQ(rc.model.name, name);
    EXPECT_EQ(rc.model.confidence, is_confidence_preset(name)) << name;
    EXPECT_EQ(rc.model.layers.back().out_dim, kClassesDim);
  }
}

TEST(Presets, VariantDetails) {
  EXPECT_EQ(preset_config("ccgcn").model.diag_mode, DiagMode::clustering_coefficients);
  EXPECT_EQ(preset_config("ccconfgcn").model.diag_mode, DiagMode::clustering_coefficients);
  auto conv = preset_config("convgcn").model.layers[0].activation;
  ASSERT_TRUE(conv.is_convex());
  EXPECT_EQ(conv.convex().coefficients, (std::vector<double>{0.8, 0.2}));
  auto dgcn = preset_config("dgcn").model;
  ASSERT_EQ(dgcn.layers.size(), 5u);
  EXPECT_EQ(dgcn.layers[1].kind, LayerKind::dense);
  EXPECT_EQ(dgcn.layers[2].kind, LayerKind::dense);
  EXPECT_EQ(dgcn.layers[3].out_dim, 48u);
  const auto gcn = preset_config("gcn");
  EXPECT_DOUBLE_EQ(gcn.train.learning_rate, 0.01);
  EXPECT_DOUBLE_EQ(gcn.train.weight_decay, 5e-4);
  EXPECT_EQ(gcn.train.max_epochs, 200);
  EXPECT_EQ(gcn.train.patience, 10);
  EXPECT_EQ(gcn.model.layers[0].out_dim, 16u);
  EXPECT_DOUBLE_EQ(gcn.model.layers[0].dropout, 0.5);
}

TEST(Presets, UnknownNameListsAvailable) {
  try {
    preset_config("resnet");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("resnet"), std::string::npos);
    EXPECT_NE(msg.find("dconfgcn"), std::string::npos);
  }
}

TEST(Aggregate, MeanAndSampleStd) {
  auto a = aggregate({report(0.8, 0), report(0.6, 1), report(0.7, 2)});
  EXPECT_NEAR(a.mean_accuracy, 0.7, 1e-15);
  EXPECT_NEAR(a.std_accuracy, 0.1, 1e-15);
  EXPECT_EQ(a.n, 3u);
  EXPECT_NEAR(a.mean_val_accuracy, 0.35, 1e-15);
  EXPECT_DOUBLE_EQ(a.mean_epoch_seconds, 0.25);
  EXPECT_EQ(aggregate({report(0.5, 0)}).std_accuracy, 0.0);
}

TEST(ParallelFor, RunsEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw FormatError("x", 1, "boom");
                            }),
               FormatError);
}

TEST(Replicate, ParallelMatchesSerialAndWritesRuns) {
  auto d = planted();
  auto serial = replicate("gcn", d, 3);
  toy::TempDir tmp;
  auto par = replicate("gcn", d, 3, {3, tmp.path()});
  ASSERT_EQ(par.reports.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(report_text(par.reports[i]), report_text(serial.reports[i]));
    EXPECT_EQ(par.reports[i].seed, i);
    EXPECT_TRUE(std::filesystem::exists(run_report_path(tmp.path(), "gcn", "planted", i)));
  }
  EXPECT_EQ(par.aggregate.mean_accuracy, serial.aggregate.mean_accuracy);
  EXPECT_THROW(replicate("gcn", d, 1), ConfigError);
}

TEST(Grid, ParseAndValidate) {
  auto g = parse_grid("base = gcn\nactivations = relu, elu\nhidden_sizes = 16,64\nloss_variants = softmax_ce\n"
                      "seeds_per_cell = 3\n");
  EXPECT_EQ(g.cell_count(), 4u);
  EXPECT_EQ(g.seeds_per_cell, 3u);
  EXPECT_EQ(g.hidden_sizes, (std::vector<std::size_t>{16, 64}));
  EXPECT_THROW(validate_grid(parse_grid("activations = relu\nhidden_sizes = 17\nloss_variants = softmax_ce\n")),
               ConfigError);
  EXPECT_THROW(validate_grid(parse_grid("activations = none\nhidden_sizes = 16\nloss_variants = softmax_ce\n")),
               ConfigError);
  EXPECT_THROW(validate_grid(parse_grid("activations = relu\nhidden_sizes = 16\nloss_variants = softmax_ce\n"
                                        "seeds_per_cell = 1\n")),
               ConfigError);
  EXPECT_THROW(parse_grid("colour = red\n"), ConfigError);
}

TEST(Grid, SingleCellEqualsReplicate) {
  auto d = planted();
  SweepGrid g;
  g.activations = {ActivationKind::relu};
  g.hidden_sizes = {16};
  g.loss_variants = {LossVariant::softmax_ce_v2};
  auto cells = run_grid(g, preset_config("gcn"), d);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].label, "gcn-relu-h16-softmax_ce_v2");
  auto rep = replicate("gcn", d, 2);
  EXPECT_EQ(cells[0].result.mean_accuracy, rep.aggregate.mean_accuracy);
  EXPECT_EQ(cells[0].result.mean_val_accuracy, rep.aggregate.mean_val_accuracy);
}

TEST(Grid, TwoHiddenSizesRankDeterministically) {
  auto d = toy::two_cliques();
  SweepGrid g;
  g.activations = {ActivationKind::relu};
  g.hidden_sizes = {16, 32};
  g.loss_variants = {LossVariant::softmax_ce};
  GridOptions opt;
  opt.time_tiebreak = false;
  auto a = run_grid(g, preset_config("gcn"), d, opt);
  opt.jobs = 2;
  auto b = run_grid(g, preset_config("gcn"), d, opt);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_FALSE(a[i].failed);
  }
  EXPECT_GE(a[0].result.mean_val_accuracy, a[1].result.mean_val_accuracy);
  std::set<std::string> labels{a[0].label, a[1].label};
  EXPECT_EQ(labels, (std::set<std::string>{"gcn-relu-h16-softmax_ce", "gcn-relu-h32-softmax_ce"}));
}

TEST(Grid, DivergedCellMarkedFailedAndRankedLast) {
  auto d = toy::two_cliques();
  SweepGrid g;
  g.activations = {ActivationKind::relu};
  g.hidden_sizes = {16};
  g.loss_variants = {LossVariant::softmax_ce};
  auto base = preset_config("gcn");
  base.train.learning_rate = std::numeric_limits<double>::infinity();
  auto cells = run_grid(g, base, d);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_TRUE(cells[0].failed);
  EXPECT_NE(cells[0].error.find("diverged"), std::string::npos);

  std::vector<GridCell> mixed(3);
  mixed[0].label = "a";
  mixed[0].failed = true;
  mixed[1].label = "b";
  mixed[1].result.mean_val_accuracy = 0.5;
  mixed[2].label = "c";
  mixed[2].result.mean_val_accuracy = 0.9;
  rank_cells(mixed, false);
  EXPECT_EQ(mixed[0].label, "c");
  EXPECT_EQ(mixed[1].label, "b");
  EXPECT_EQ(mixed[2].label, "a");
}

TEST(GridCellConfig, SetsEveryHiddenLayer) {
  auto rc = grid_cell_config(preset_config("dgcn"), ActivationKind::elu, 64, LossVariant::softmax_ce);
  for (std::size_t i = 0; i + 1 < rc.model.layers.size(); ++i) {
    EXPECT_EQ(rc.model.layers[i].out_dim, 64u);
    EXPECT_EQ(rc.model.layers[i].activation, ActivationSpec(ActivationKind::elu));
  }
  EXPECT_EQ(rc.model.layers.back().out_dim, kClassesDim);
  EXPECT_EQ(rc.train.loss, LossVariant::softmax_ce);
}

TEST(EmitTable, CsvExample) {
  auto csv = emit_table({row("gcn", "cora", 0.8123456789, 0.01, 10, 0.5)}, TableFormat::csv);
  EXPECT_EQ(csv, "preset,dataset,mean,std,n,epoch_time\r\ngcn,cora,0.812346,0.010000,10,0.500000\r\n");
}

TEST(EmitTable, SortedAndQuoted) {
  auto csv = emit_table({row("gcn", "pubmed", 0.7, 0, 2, 0), row("a,b", "x\"y", 0.1, 0, 2, 0),
                         row("gcn", "cora", 0.8, 0, 2, 0)},
                        TableFormat::csv);
  auto rows = parse_csv(csv);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1][0], "a,b");
  EXPECT_EQ(rows[1][1], "x\"y");
  EXPECT_EQ(rows[2][1], "cora");
  EXPECT_EQ(rows[3][1], "pubmed");
  EXPECT_NE(csv.find("\"a,b\",\"x\"\"y\""), std::string::npos);
}

TEST(EmitTable, TextAligned) {
  auto text = emit_table({row("gcn", "cora", 0.8, 0.01, 10, 0.5), row("convgcn", "citeseer", 0.7, 0.02, 10, 0.25)},
                         TableFormat::text);
  EXPECT_EQ(text,
            "preset   dataset       mean       std   n  epoch_time\n"
            "convgcn  citeseer  0.700000  0.020000  10    0.250000\n"
            "gcn      cora      0.800000  0.010000  10    0.500000\n");
}

TEST(EmitTable, CsvRoundTrip) {
  std::vector<AggregateResult> in{row("gcn", "cora", 0.812346, 0.004, 10, 0.031), row("dgcn", "cora", 0.83, 0.01, 10, 0.05)};
  auto back = parse_table_csv(emit_table(in, TableFormat::csv));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].preset, "dgcn");
  EXPECT_DOUBLE_EQ(back[1].mean_accuracy, 0.812346);
  EXPECT_EQ(back[1].n, 10u);
  EXPECT_EQ(emit_table(back, TableFormat::csv), emit_table(in, TableFormat::csv));
}

TEST(EmitTable, FormatNamesAndEmptyInput) {
  EXPECT_EQ(parse_table_format("text"), TableFormat::text);
  EXPECT_THROW(parse_table_format("xlsx"), ConfigError);
  EXPECT_THROW(emit_table({}, TableFormat::csv), ContractViolation);
}

TEST(AggregateRuns, GroupsReportsFromDisk) {
  toy::TempDir tmp;
  for (std::uint64_t s = 0; s < 3; ++s) write_report(report(0.5 + 0.1 * s, s), run_report_path(tmp.path(), "gcn", "toy", s));
  auto other = report(0.9, 0);
  other.preset = "dgcn";
  write_report(other, run_report_path(tmp.path(), "dgcn", "toy", 0));
  auto rows = aggregate_runs(tmp.path());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].preset, "dgcn");
  EXPECT_EQ(rows[1].n, 3u);
  EXPECT_NEAR(rows[1].mean_accuracy, 0.6, 1e-12);
  EXPECT_DOUBLE_EQ(rows[1].mean_epoch_seconds, 0.25);
}
