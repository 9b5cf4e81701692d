#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvlrr/experiment.hpp"

using namespace mvlrr;
namespace fs = std::filesystem;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.source = SyntheticSource{30, 3, 2, {6, 8}, 0.05};
  spec.solver.max_iter = 80;
  spec.solver.record_objective = false;
  return spec;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(SolverConfigText, RoundTrip) {
  SolverConfig cfg;
  cfg.lambda1 = 0.1 + 0.2;
  cfg.beta = 1e-300;
  cfg.max_iter = 17;
  cfg.view_sweep = ViewSweep::gauss_seidel;
  cfg.sigma_mode = GlobalSigma{0.75};
  cfg.threads = 2;
  std::istringstream in(format_solver_config(cfg));
  const auto back = parse_solver_config(in);
  EXPECT_EQ(back.lambda1, cfg.lambda1);
  EXPECT_EQ(back.beta, cfg.beta);
  EXPECT_EQ(back.max_iter, 17);
  EXPECT_EQ(back.view_sweep, ViewSweep::gauss_seidel);
  ASSERT_TRUE(std::holds_alternative<GlobalSigma>(back.sigma_mode));
  EXPECT_EQ(std::get<GlobalSigma>(back.sigma_mode).sigma, 0.75);
  EXPECT_EQ(format_solver_config(back), format_solver_config(cfg));
}

TEST(SolverConfigText, AcceptsExperimentDumpAndRejectsJunk) {
  ExperimentSpec spec = small_spec();
  spec.solver.lambda3 = 3.5;
  std::istringstream dump(format_experiment(spec));
  EXPECT_EQ(parse_solver_config(dump).lambda3, 3.5);

  std::istringstream unknown("# comment\n\nlambda9=1\n");
  EXPECT_THROW(parse_solver_config(unknown), Error);
  std::istringstream bad_value("rho=abc\n");
  EXPECT_THROW(parse_solver_config(bad_value), Error);
  std::istringstream invalid("rho=0.5\n");
  EXPECT_THROW(parse_solver_config(invalid), Error);
  EXPECT_THROW(parse_sigma_mode("gaussian:2"), Error);
  EXPECT_THROW(parse_view_sweep("random"), Error);
}

TEST(RunSingle, RepeatRowsAndMeanRow) {
  ExperimentSpec spec = small_spec();
  spec.repeat = 10;
  spec.solver.max_iter = 20;
  const auto r = run_single(spec);
  ASSERT_EQ(r.trials.size(), 10u);
  const auto csv = format_results_csv(r);
  EXPECT_EQ(count_lines(csv), 12u);
  EXPECT_NE(csv.find("proposed," + r.dataset + ",mean,"), std::string::npos);
  double mean = 0;
  for (const auto& t : r.trials) mean += t.acc / 10.0;
  EXPECT_NEAR(r.acc_mean, mean, 1e-12);
  // trials draw different data
  EXPECT_NE(r.trials[0].seed, r.trials[1].seed);
}

TEST(RunSingle, DeterministicForSeed) {
  ExperimentSpec spec = small_spec();
  spec.repeat = 2;
  spec.seed = 5;
  spec.corruption = Corruption{0.2, -1, 1};
  const auto a = run_single(spec), b = run_single(spec);
  for (int t = 0; t < 2; ++t) EXPECT_EQ(a.trials[t].labels, b.trials[t].labels);
  EXPECT_EQ(format_results_csv(a), format_results_csv(b));
}

TEST(RunSweep, SingleCellEqualsRunSingle) {
  ExperimentSpec spec = small_spec();
  spec.sweep_lambda3 = {0.5};
  spec.sweep_beta = {0.1};
  const auto cells = run_sweep(spec);
  ASSERT_EQ(cells.size(), 1u);
  ExperimentSpec plain = small_spec();
  plain.solver.lambda3 = 0.5;
  plain.solver.beta = 0.1;
  const auto single = run_single(plain);
  EXPECT_EQ(format_results_csv(cells[0].report), format_results_csv(single));
}

TEST(RunSweep, GridShapeAndOrder) {
  ExperimentSpec spec = small_spec();
  spec.source = SyntheticSource{18, 2, 2, {4, 4}, 0.05};
  spec.solver.max_iter = 15;
  spec.sweep_lambda3 = {0.001, 0.1, 10};
  spec.sweep_beta = {0.001, 0.1, 10};
  const auto cells = run_sweep(spec);
  ASSERT_EQ(cells.size(), 9u);
  EXPECT_EQ(cells[1].lambda3, 0.001);
  EXPECT_EQ(cells[1].beta, 0.1);
  EXPECT_EQ(cells[3].lambda3, 0.1);
  EXPECT_EQ(count_lines(format_sweep_csv(cells)), 10u);
  spec.sweep_beta.clear();
  EXPECT_THROW(run_sweep(spec), PipelineError);
}

TEST(RunSweep, RegularizedCellBeatsUnregularizedOnCorruptedData) {
  ExperimentSpec spec;
  spec.solver.record_objective = false;
  spec.corruption = Corruption{0.2, -2, 2};
  spec.seed = 3;
  spec.repeat = 2;
  spec.sweep_lambda3 = {0.0, 0.5};
  spec.sweep_beta = {0.0, 0.1};
  const auto cells = run_sweep(spec);
  double best = 0;
  for (const auto& c : cells) best = std::max(best, c.report.acc_mean);
  EXPECT_GT(best, cells[0].report.acc_mean);
}

TEST(RunBaseline, SameSchema) {
  ExperimentSpec spec = small_spec();
  spec.repeat = 2;
  const auto b = run_baseline(spec);
  EXPECT_EQ(b.method, Method::shared_lrr);
  const auto csv = format_results_csv(b);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kResultsHeader);
  EXPECT_EQ(count_lines(csv), 4u);
  EXPECT_NE(csv.find("shared_lrr,"), std::string::npos);
}

TEST(Pipeline, ErrorsNameTheStage) {
  ExperimentSpec spec = small_spec();
  spec.source = fs::path("/nonexistent/mvlrr_dataset");
  try {
    run_single(spec);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_EQ(std::string(e.what()).rfind("[load] ", 0), 0u);
  }
  spec = small_spec();
  spec.repeat = 0;
  try {
    run_single(spec);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  spec = small_spec();
  spec.corruption = Corruption{1.5, -1, 1};
  try {
    run_single(spec);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "corrupt");
  }
}

TEST(Pipeline, WritesReportFiles) {
  const auto dir = fs::temp_directory_path() / "mvlrr_test_report";
  fs::remove_all(dir);
  ExperimentSpec spec = small_spec();
  spec.solver.max_iter = 10;
  spec.repeat = 2;
  spec.trace = true;
  spec.dump_graphs = true;
  spec.dump_affinity = true;
  spec.out_dir = dir;
  const auto r = run_single(spec);
  write_report(spec, r);
  for (const char* f : {"proposed_results.csv", "proposed_labels_trial1.txt", "proposed_trace_trial0.csv",
                        "graph_view1_trial0.csv", "proposed_affinity_trial1.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream trace(dir / "proposed_trace_trial0.csv");
  std::string header;
  std::getline(trace, header);
  EXPECT_EQ(header, "iteration,residual,objective,mu,xi_0,xi_1");
  EXPECT_EQ(r.trials[0].residual_trace.size(), 10u);
}

TEST(Pipeline, LoadsDirectoryDatasets) {
  const auto dir = fs::temp_directory_path() / "mvlrr_test_dirsource";
  fs::remove_all(dir);
  save_dataset(synthesize_multiview(24, 2, 2, std::vector<int>{4, 5}, 0.05, 9), dir);
  ExperimentSpec spec = small_spec();
  spec.source = dir;
  spec.repeat = 2;
  const auto r = run_single(spec);
  EXPECT_EQ(r.dataset, "mvlrr_test_dirsource");
  // same data each trial without corruption
  EXPECT_EQ(r.trials[0].labels.size(), 24u);
  EXPECT_GE(r.acc_mean, 0.9);
}
