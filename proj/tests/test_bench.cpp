#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "polarflow/bench.hpp"
#include "polarflow/geometry.hpp"
#include "polarflow/io.hpp"
#include "polarflow/polar.hpp"

namespace polarflow::bench {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n = 2;
  c.count = 5;
  c.seed = 42;
  c.h = 0.1;
  c.steps = 50;
  return c;
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({3.0}, 0.1), 3.0);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 0.9), 9.0);
  EXPECT_TRUE(std::isnan(percentile({}, 0.5)));
}

TEST(GenerateEnsemble, DeterministicAndFiltered) {
  ExperimentConfig c = small_config();
  c.count = 1000;
  const auto first = generate_ensemble(c);
  const auto second = generate_ensemble(c);
  ASSERT_EQ(first.size(), 1000u);
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_TRUE(first[i].isApprox(second[i], 0.0));
    const double det = first[i].determinant();
    EXPECT_GT(det, c.invertibility_threshold * std::pow(first[i].norm() / std::sqrt(2.0), 2));
    EXPECT_GT(det, 0.0);
  }
  c.seed = 43;
  EXPECT_FALSE(generate_ensemble(c)[0].isApprox(first[0], 0.0));
}

TEST(GenerateEnsemble, DiscardedDrawsAreReplacedByLaterOnes) {
  ExperimentConfig c = small_config();
  c.count = 50;
  c.allow_negative_det = true;
  const auto all = generate_ensemble(c);
  c.allow_negative_det = false;
  const auto positive = generate_ensemble(c);
  // With the sign filter, output is the positive-det subsequence of the draws.
  std::size_t j = 0;
  for (const auto& m : all) {
    if (j < positive.size() && m.determinant() > 0) {
      EXPECT_TRUE(m.isApprox(positive[j], 0.0));
      ++j;
    }
  }
  EXPECT_GT(j, 10u);
  bool has_negative = false;
  for (const auto& m : all) has_negative |= m.determinant() < 0;
  EXPECT_TRUE(has_negative);
}

TEST(GenerateEnsemble, ExhaustsOnImpossibleThreshold) {
  ExperimentConfig c = small_config();
  c.invertibility_threshold = 1e300;
  try {
    generate_ensemble(c);
    FAIL() << "expected ExhaustedDraws";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ExhaustedDraws);
  }
}

TEST(RunExperiment, SpdStartStaysAtReference) {
  // With n = 1 every accepted draw is a positive scalar, hence SPD.
  ExperimentConfig c = small_config();
  c.n = 1;
  c.count = 1;
  const auto report = run_experiment(c);
  ASSERT_EQ(report.per_trajectory.size(), 1u);
  for (double d : report.per_trajectory[0].sq_dist) EXPECT_LE(d, 1e-12);
}

TEST(RunExperiment, AggregateShapeAndOrdering) {
  ExperimentConfig c = small_config();
  c.count = 50;
  c.steps = 100;
  c.record_every = 7;
  const auto report = run_experiment(c);
  EXPECT_EQ(report.failed_count, 0);
  ASSERT_EQ(report.aggregate.size(), report.recorded_steps.size());
  EXPECT_EQ(report.recorded_steps.front(), 0);
  EXPECT_EQ(report.recorded_steps.back(), 100);
  for (const auto& row : report.aggregate) {
    EXPECT_LE(row.p10, row.median);
    EXPECT_LE(row.median, row.p90);
  }

  // Step 0 is computable from the ensemble alone.
  const auto ensemble = generate_ensemble(c);
  std::vector<double> initial;
  for (const auto& a : ensemble) {
    const auto inst = MongeInstanceXd::create(a);
    initial.push_back(squared_distance(a, polar_oracle(inst).p.matrix(), inst.sigma0()));
  }
  EXPECT_NEAR(report.aggregate[0].median, percentile(initial, 0.5), 1e-14);
  EXPECT_NEAR(report.aggregate[0].p10, percentile(initial, 0.1), 1e-14);
  EXPECT_NEAR(report.aggregate[0].p90, percentile(initial, 0.9), 1e-14);
}

TEST(RunExperiment, LogMedianDecreasesOverSecondHalf) {
  ExperimentConfig c = small_config();
  c.count = 50;
  c.steps = 300;
  const auto report = run_experiment(c);
  // Least-squares slope of log(median) against time over steps 150..300.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (const auto& row : report.aggregate) {
    if (row.step < 150) continue;
    const double y = std::log(row.median);
    sx += row.time;
    sy += y;
    sxx += row.time * row.time;
    sxy += row.time * y;
    m += 1;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  EXPECT_LT(slope, 0.0);
}

TEST(RunExperiment, IndependentOfWorkerCount) {
  ExperimentConfig c = small_config();
  c.count = 40;
  const auto one = run_experiment(c, 1);
  const auto four = run_experiment(c, 4);
  EXPECT_EQ(trajectory_csv(one), trajectory_csv(four));
  EXPECT_EQ(aggregate_csv(one), aggregate_csv(four));
}

TEST(RunExperiment, FailedTrajectoriesAreFlagged) {
  // A config whose sigma0 is not SPD fails before any trajectory runs.
  ExperimentConfig c = small_config();
  c.sigma0 = MatrixXd::Identity(2, 2) * -1.0;
  EXPECT_THROW(run_experiment(c), Error);

  // Failed rows are excluded from percentiles and written as NaN.
  ExperimentReport report;
  report.config = small_config();
  report.recorded_steps = {0, 1};
  TrajectoryResult ok;
  ok.id = 0;
  ok.sq_dist = {2.0, 1.0};
  TrajectoryResult bad;
  bad.id = 1;
  bad.failed = true;
  bad.sq_dist = {NAN, NAN};
  report.per_trajectory = {ok, bad};
  report.aggregate = aggregate(report);
  EXPECT_DOUBLE_EQ(report.aggregate[1].median, 1.0);
  EXPECT_DOUBLE_EQ(report.aggregate[1].p10, 1.0);
  EXPECT_DOUBLE_EQ(report.aggregate[1].p90, 1.0);
  const std::string csv = trajectory_csv(report);
  EXPECT_NE(csv.find("1,1,0.1,NaN\n"), std::string::npos);
}

TEST(EmitCsv, RowCountsAndFormat) {
  ExperimentConfig c = small_config();
  c.count = 2;
  c.steps = 2;
  const auto report = run_experiment(c);
  const std::string traj = trajectory_csv(report);
  const std::string agg = aggregate_csv(report);
  EXPECT_EQ(count_lines(traj), 1u + 6u);
  EXPECT_EQ(count_lines(agg), 1u + 3u);
  EXPECT_EQ(traj.rfind("trajectory_id,step,time,sq_dist\n", 0), 0u);
  EXPECT_EQ(agg.rfind("step,time,median,p10,p90\n", 0), 0u);
  EXPECT_EQ(traj.find('\r'), std::string::npos);
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_EQ(io::format_double(2.0), "2");
  EXPECT_EQ(io::format_double(NAN), "NaN");
}

TEST(EmitCsv, SingleTrajectoryPercentilesCoincide) {
  ExperimentConfig c = small_config();
  c.count = 1;
  const auto report = run_experiment(c);
  for (std::size_t k = 0; k < report.aggregate.size(); ++k) {
    const auto& row = report.aggregate[k];
    EXPECT_EQ(row.median, report.per_trajectory[0].sq_dist[k]);
    EXPECT_EQ(row.p10, row.median);
    EXPECT_EQ(row.p90, row.median);
  }
}

TEST(EmitCsv, GoldenRunIsByteIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "polarflow_bench_golden";
  std::filesystem::remove_all(dir);
  const auto c = small_config();
  write_outputs(run_experiment(c), dir / "a");
  write_outputs(run_experiment(c), dir / "b");
  EXPECT_EQ(slurp(dir / "a" / "trajectories.csv"), slurp(dir / "b" / "trajectories.csv"));
  EXPECT_EQ(slurp(dir / "a" / "aggregate.csv"), slurp(dir / "b" / "aggregate.csv"));
  EXPECT_EQ(count_lines(slurp(dir / "a" / "trajectories.csv")), 1u + 5u * 51u);
  const auto meta = nlohmann::json::parse(slurp(dir / "a" / "metadata.json"));
  EXPECT_EQ(meta["config"]["seed"], 42);
  std::filesystem::remove_all(dir);
}

TEST(EmitCsv, UnwritablePathIsIoError) {
  ExperimentConfig c = small_config();
  c.count = 1;
  c.steps = 1;
  try {
    emit_csv(run_experiment(c), "/nonexistent-dir/t.csv", "/nonexistent-dir/a.csv");
    FAIL() << "expected IoError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Config, ParsesAndRejectsUnknownKeys) {
  const auto c = config_from_json(nlohmann::json::parse(
      R"({"n": 2, "count": 10, "seed": 7, "h": 0.05, "steps": 20, "sigma0": "identity",
          "record_every": 2, "allow_negative_det": true, "invertibility_threshold": 1e-6})"));
  EXPECT_EQ(c.count, 10);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_DOUBLE_EQ(c.h, 0.05);
  EXPECT_FALSE(c.sigma0.has_value());
  EXPECT_TRUE(c.allow_negative_det);

  const auto m = config_from_json(nlohmann::json::parse(R"({"n": 2, "sigma0": [[2,0],[0,1]]})"));
  ASSERT_TRUE(m.sigma0.has_value());
  EXPECT_EQ((*m.sigma0)(0, 0), 2.0);

  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"n": 2, "workers": 3})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"count": 0})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"sigma0": "diag"})")), Error);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"n": 3, "sigma0": [[1,0],[0,1]]})")), Error);

  const auto round = config_from_json(config_to_json(c));
  EXPECT_EQ(round.steps, c.steps);
  EXPECT_EQ(round.record_every, c.record_every);
}

}  // namespace
}  // namespace polarflow::bench
