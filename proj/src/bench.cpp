#include "polarflow/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include "polarflow/flow.hpp"
#include "polarflow/geometry.hpp"
#include "polarflow/io.hpp"
#include "polarflow/polar.hpp"
#include "polarflow/random.hpp"

namespace polarflow::bench {

namespace {

constexpr double kMonotoneTol = 1e-8;
constexpr std::int64_t kTransientSteps = 5;
constexpr std::int64_t kDrawBudgetFactor = 100;

std::vector<std::int64_t> recorded_step_grid(const ExperimentConfig& config) {
  std::vector<std::int64_t> steps;
  for (std::int64_t k = 0; k <= config.steps; ++k)
    if (k % config.record_every == 0 || k == config.steps) steps.push_back(k);
  return steps;
}

TrajectoryResult run_trajectory(const ExperimentConfig& config, const SpdMatrixXd& sigma0,
                                const MatrixXd& a, std::int64_t id,
                                const std::vector<std::int64_t>& grid) {
  TrajectoryResult result;
  result.id = id;
  try {
    const auto inst = MongeInstanceXd::create(sigma0, a, config.allow_negative_det);
    const MatrixXd p = polar_oracle(inst).p.matrix();

    FlowOptions opts;
    opts.h = config.h;
    opts.max_steps = config.steps;
    opts.record_every = config.record_every;
    opts.stop_early = false;
    const auto trace = integrate(inst, opts, std::optional<MatrixXd>(p));

    result.sq_dist = trace.dist_to_ref_sq;
    result.max_fiber_residual = trace.max_fiber_residual;
    result.max_skew_defect = trace.max_skew_defect;
    result.max_cost_increase = trace.max_cost_increase;
    for (std::size_t i = 1; i < result.sq_dist.size(); ++i) {
      if (grid[i - 1] < kTransientSteps) continue;
      if (result.sq_dist[i] > result.sq_dist[i - 1] + kMonotoneTol) {
        result.monotone_after_transient = false;
        break;
      }
    }
  } catch (const Error& e) {
    result.failed = true;
    result.failure = e.what();
    result.sq_dist.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be >= 1");
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "h must be positive");
  if (record_every < 1) throw Error(ErrorCode::InvalidArgument, "record_every must be >= 1");
  if (!(invertibility_threshold >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "invertibility_threshold must be non-negative");
  if (sigma0 && (sigma0->rows() != n || sigma0->cols() != n))
    throw Error(ErrorCode::DimensionMismatch, "sigma0 must be n x n");
}

SpdMatrixXd ExperimentConfig::sigma0_matrix() const {
  return sigma0 ? SpdMatrixXd::validated(*sigma0) : SpdMatrixXd::identity(n);
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  static const std::set<std::string> known{"n",     "count",        "seed",
                                           "h",     "steps",        "sigma0",
                                           "record_every", "allow_negative_det",
                                           "invertibility_threshold"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
  }

  ExperimentConfig c;
  auto get_int = [&](const char* key, std::int64_t& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be an integer");
    out = j[key].get<std::int64_t>();
  };
  auto get_real = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a number");
    out = j[key].get<double>();
  };

  get_int("n", c.n);
  get_int("count", c.count);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw Error(ErrorCode::InvalidArgument, "seed must be an integer");
    c.seed = j["seed"].is_number_unsigned() ? j["seed"].get<std::uint64_t>()
                                            : static_cast<std::uint64_t>(j["seed"].get<std::int64_t>());
  }
  get_real("h", c.h);
  get_int("steps", c.steps);
  get_int("record_every", c.record_every);
  get_real("invertibility_threshold", c.invertibility_threshold);
  if (j.contains("allow_negative_det")) {
    if (!j["allow_negative_det"].is_boolean())
      throw Error(ErrorCode::InvalidArgument, "allow_negative_det must be a boolean");
    c.allow_negative_det = j["allow_negative_det"].get<bool>();
  }
  if (j.contains("sigma0")) {
    const auto& s = j["sigma0"];
    if (s.is_string()) {
      if (s.get<std::string>() != "identity")
        throw Error(ErrorCode::InvalidArgument, "sigma0 must be \"identity\" or a matrix");
    } else {
      c.sigma0 = io::matrix_from_json(s);
    }
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["count"] = c.count;
  j["seed"] = c.seed;
  j["h"] = c.h;
  j["steps"] = c.steps;
  j["sigma0"] = c.sigma0 ? io::matrix_to_json(*c.sigma0) : nlohmann::json("identity");
  j["record_every"] = c.record_every;
  j["allow_negative_det"] = c.allow_negative_det;
  j["invertibility_threshold"] = c.invertibility_threshold;
  return j;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<MatrixXd> generate_ensemble(const ExperimentConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(config.n);
  const std::int64_t budget = kDrawBudgetFactor * config.count;

  std::vector<MatrixXd> out;
  out.reserve(static_cast<std::size_t>(config.count));
  for (std::int64_t draw = 0; static_cast<std::int64_t>(out.size()) < config.count; ++draw) {
    if (draw == budget) {
      throw Error(ErrorCode::ExhaustedDraws, "only " + std::to_string(out.size()) + " of " +
                                                 std::to_string(config.count) +
                                                 " matrices accepted after " +
                                                 std::to_string(budget) + " draws");
    }
    NormalStream normal(derive_seed(config.seed, static_cast<std::uint64_t>(draw)));
    MatrixXd a(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) a(r, c) = normal();

    const double det = a.partialPivLu().determinant();
    const double scale = std::pow(a.norm() / std::sqrt(double(n)), double(n));
    if (!(std::abs(det) > config.invertibility_threshold * scale)) continue;
    if (!config.allow_negative_det && !(det > 0.0)) continue;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<AggregateRow> aggregate(const ExperimentReport& report) {
  std::vector<AggregateRow> rows;
  rows.reserve(report.recorded_steps.size());
  std::vector<double> sample;
  for (std::size_t k = 0; k < report.recorded_steps.size(); ++k) {
    sample.clear();
    for (const auto& t : report.per_trajectory)
      if (!t.failed) sample.push_back(t.sq_dist[k]);
    rows.push_back({report.recorded_steps[k], report.time_of(k), percentile(sample, 0.5),
                    percentile(sample, 0.1), percentile(sample, 0.9)});
  }
  return rows;
}

ExperimentReport run_experiment(const ExperimentConfig& config, std::int64_t workers) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  const auto sigma0 = config.sigma0_matrix();
  const auto ensemble = generate_ensemble(config);

  ExperimentReport report;
  report.config = config;
  report.recorded_steps = recorded_step_grid(config);
  report.workers = std::max<std::int64_t>(1, workers);
  report.per_trajectory.resize(ensemble.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < ensemble.size(); i = next++) {
      report.per_trajectory[i] = run_trajectory(config, sigma0, ensemble[i],
                                                static_cast<std::int64_t>(i), report.recorded_steps);
    }
  };
  if (report.workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::int64_t w = 0; w < report.workers; ++w) pool.emplace_back(work);
  }

  for (const auto& t : report.per_trajectory) {
    if (t.failed) {
      ++report.failed_count;
      continue;
    }
    if (!t.monotone_after_transient) report.non_monotone_ids.push_back(t.id);
    report.max_fiber_residual = std::max(report.max_fiber_residual, t.max_fiber_residual);
    report.max_skew_defect = std::max(report.max_skew_defect, t.max_skew_defect);
  }
  report.aggregate = aggregate(report);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string trajectory_csv(const ExperimentReport& report) {
  std::string out = "trajectory_id,step,time,sq_dist\n";
  for (const auto& t : report.per_trajectory) {
    for (std::size_t k = 0; k < report.recorded_steps.size(); ++k) {
      out += std::to_string(t.id);
      out += ',';
      out += std::to_string(report.recorded_steps[k]);
      out += ',';
      out += io::format_double(report.time_of(k));
      out += ',';
      out += t.failed ? std::string("NaN") : io::format_double(t.sq_dist[k]);
      out += '\n';
    }
  }
  return out;
}

std::string aggregate_csv(const ExperimentReport& report) {
  std::string out = "step,time,median,p10,p90\n";
  for (const auto& row : report.aggregate) {
    out += std::to_string(row.step);
    for (double v : {row.time, row.median, row.p10, row.p90}) {
      out += ',';
      out += io::format_double(v);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json metadata_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["config"] = config_to_json(report.config);
  j["wall_time_seconds"] = report.wall_time_seconds;
  j["workers"] = report.workers;
  j["trajectories"] = report.per_trajectory.size();
  j["recorded_steps"] = report.recorded_steps.size();
  j["failed_count"] = report.failed_count;
  j["non_monotone_ids"] = report.non_monotone_ids;
  j["max_fiber_residual"] = report.max_fiber_residual;
  j["max_skew_defect"] = report.max_skew_defect;
  j["percentile_method"] = "linear interpolation between order statistics";
  auto failures = nlohmann::json::array();
  for (const auto& t : report.per_trajectory)
    if (t.failed) failures.push_back({{"trajectory_id", t.id}, {"error", t.failure}});
  j["failures"] = std::move(failures);
  return j;
}

void emit_csv(const ExperimentReport& report, const std::filesystem::path& trajectory_path,
              const std::filesystem::path& aggregate_path) {
  io::write_text_file(trajectory_path, trajectory_csv(report));
  io::write_text_file(aggregate_path, aggregate_csv(report));
}

void write_outputs(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  emit_csv(report, dir / "trajectories.csv", dir / "aggregate.csv");
  io::write_text_file(dir / "metadata.json", metadata_json(report).dump(2) + "\n");
}

}  // namespace polarflow::bench
