#pragma once

// Ensemble experiment: random invertible matrices, Lie-Euler flow runs, and
// percentile curves of the squared distance to each matrix's polar factor.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "polarflow/matcore.hpp"

namespace polarflow::bench {

struct ExperimentConfig {
  std::int64_t n = 2;
  std::int64_t count = 1000;
  std::uint64_t seed = 0;
  double h = 0.1;
  std::int64_t steps = 300;
  std::optional<MatrixXd> sigma0;  // nullopt means identity
  std::int64_t record_every = 1;
  bool allow_negative_det = false;
  /// Draws with |det| <= threshold * (||A||_F / sqrt(n))^n are discarded.
  double invertibility_threshold = 1e-8;

  void validate() const;
  SpdMatrixXd sigma0_matrix() const;
};

/// Parses a config object; keys must match the field names above and
/// "identity" is accepted for sigma0. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

struct TrajectoryResult {
  std::int64_t id = 0;
  bool failed = false;
  std::string failure;
  std::vector<double> sq_dist;  // one entry per recorded step
  double max_fiber_residual = 0;
  double max_skew_defect = 0;
  double max_cost_increase = 0;
  /// sq_dist non-increasing (tolerance 1e-8) over recorded steps >= 5.
  bool monotone_after_transient = true;
};

struct AggregateRow {
  std::int64_t step = 0;
  double time = 0;
  double median = 0;
  double p10 = 0;
  double p90 = 0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<std::int64_t> recorded_steps;
  std::vector<TrajectoryResult> per_trajectory;
  std::vector<AggregateRow> aggregate;

  double wall_time_seconds = 0;
  std::int64_t workers = 1;
  std::int64_t failed_count = 0;
  std::vector<std::int64_t> non_monotone_ids;
  double max_fiber_residual = 0;
  double max_skew_defect = 0;

  double time_of(std::size_t recorded_index) const {
    return static_cast<double>(recorded_steps[recorded_index]) * config.h;
  }
};

/// Linear interpolation between order statistics at position q (n - 1),
/// q in [0, 1]. NaN for an empty sample.
double percentile(std::vector<double> values, double q);

/// Exactly config.count matrices with i.i.d. standard normal entries. Draw j
/// uses the stream derive_seed(config.seed, j); rejected draws are skipped.
std::vector<MatrixXd> generate_ensemble(const ExperimentConfig& config);

/// Runs every trajectory (optionally on `workers` threads; results do not
/// depend on the worker count) and aggregates the percentile curves.
ExperimentReport run_experiment(const ExperimentConfig& config, std::int64_t workers = 1);

/// Aggregate rows recomputed from per-trajectory results.
std::vector<AggregateRow> aggregate(const ExperimentReport& report);

std::string trajectory_csv(const ExperimentReport& report);
std::string aggregate_csv(const ExperimentReport& report);
nlohmann::json metadata_json(const ExperimentReport& report);

void emit_csv(const ExperimentReport& report, const std::filesystem::path& trajectory_path,
              const std::filesystem::path& aggregate_path);

/// trajectories.csv, aggregate.csv and metadata.json under `dir`.
void write_outputs(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace polarflow::bench
