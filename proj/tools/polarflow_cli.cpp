// polarflow: polar factors via the vertical gradient flow, single-trajectory
// traces, and the ensemble convergence experiment.
//
// Exit codes: 0 success, 1 usage/parse error, 2 numerical failure, 3 I/O error.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "polarflow/bench.hpp"
#include "polarflow/flow.hpp"
#include "polarflow/geometry.hpp"
#include "polarflow/io.hpp"
#include "polarflow/polar.hpp"

namespace {

using namespace polarflow;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return kExitIo;
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NotSymmetric: return kExitUsage;
    default: return kExitNumerical;
  }
}

SpdMatrixXd load_sigma0(const std::string& path, Eigen::Index n) {
  if (path.empty()) return SpdMatrixXd::identity(n);
  const MatrixXd s = io::read_matrix_file(path);
  require_same_size(s, MatrixXd(n, n), "sigma0");
  return SpdMatrixXd::validated(s);
}

nlohmann::json report_to_json(const DecompositionReport& r) {
  return {{"reconstructs", r.reconstructs},
          {"p_symmetric", r.p_symmetric},
          {"p_positive_definite", r.p_positive_definite},
          {"q_isotropy", r.q_isotropy},
          {"p_on_fiber", r.p_on_fiber},
          {"all", r.all()}};
}

struct PolarArgs {
  std::string input, sigma0, method = "flow", output;
  double h = 0.1;
  std::int64_t max_steps = 300;
  double tol = 1e-10;
};

int run_polar(const PolarArgs& args) {
  const MatrixXd a = io::read_matrix_file(args.input);
  require_square(a, "input matrix");
  const auto inst = MongeInstanceXd::create(load_sigma0(args.sigma0, a.rows()), a);

  PolarFactors<double> factors = [&] {
    if (args.method == "oracle") return polar_oracle(inst);
    FlowOptions opts;
    opts.h = args.h;
    opts.max_steps = args.max_steps;
    opts.omega_tol = args.tol;
    return polar_via_flow(inst, opts);
  }();

  const auto report = verify_decomposition(a, factors, inst.sigma0(), 1e-8);
  nlohmann::json out{{"method", std::string(to_string(factors.method))},
                     {"p", io::matrix_to_json(factors.p.matrix())},
                     {"q", io::matrix_to_json(factors.q)},
                     {"verification", report_to_json(report)}};
  if (factors.method == PolarMethod::flow) {
    out["steps"] = factors.steps;
    out["final_omega_norm"] = factors.final_omega_norm;
  }
  io::write_text_file(args.output, out.dump(2) + "\n");
  return kExitOk;
}

struct FlowArgs {
  std::string input, sigma0, trace;
  double h = 0.1;
  std::int64_t steps = 300;
};

int run_flow(const FlowArgs& args) {
  const MatrixXd a = io::read_matrix_file(args.input);
  require_square(a, "input matrix");
  const auto inst = MongeInstanceXd::create(load_sigma0(args.sigma0, a.rows()), a);
  const MatrixXd p = polar_oracle(inst).p.matrix();

  FlowOptions opts;
  opts.h = args.h;
  opts.max_steps = args.steps;
  opts.stop_early = false;
  const auto trace = integrate(inst, opts, std::optional<MatrixXd>(p));

  std::string csv = "step,time,cost_j,omega_norm,fiber_residual,sq_dist_to_p\n";
  for (std::size_t k = 0; k < trace.size(); ++k) {
    csv += std::to_string(trace.states[k].step_index);
    for (double v : {trace.states[k].time, trace.cost[k], trace.omega_norm[k], trace.fiber_res[k],
                     trace.dist_to_ref_sq[k]}) {
      csv += ',';
      csv += io::format_double(v);
    }
    csv += '\n';
  }
  io::write_text_file(args.trace, csv);
  return kExitOk;
}

struct ExperimentArgs {
  std::string config, out_dir;
  std::int64_t workers = 1;
};

int run_experiment_cmd(const ExperimentArgs& args) {
  const auto config = bench::config_from_json(io::read_json_file(args.config));
  const auto report = bench::run_experiment(config, args.workers);
  bench::write_outputs(report, args.out_dir);
  const auto& last = report.aggregate.back();
  std::cout << "trajectories: " << report.per_trajectory.size() << " (failed "
            << report.failed_count << ")\n"
            << "final median sq-dist: " << io::format_double(last.median) << "\n"
            << "max fiber residual: " << io::format_double(report.max_fiber_residual) << "\n"
            << "wall time: " << report.wall_time_seconds << " s\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polar decomposition as the limit of the vertical gradient flow"};
  // "--h" is the step size, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  PolarArgs polar;
  auto* polar_cmd = app.add_subcommand("polar", "Compute polar factors P, Q of a matrix");
  polar_cmd->add_option("--input", polar.input, "Matrix file (JSON array of rows)")->required();
  polar_cmd->add_option("--sigma0", polar.sigma0, "Source covariance matrix file (default identity)");
  polar_cmd->add_option("--method", polar.method, "flow or oracle")
      ->check(CLI::IsMember({"flow", "oracle"}));
  polar_cmd->add_option("--h", polar.h, "Lie-Euler step size");
  polar_cmd->add_option("--max-steps", polar.max_steps, "Step cap");
  polar_cmd->add_option("--tol", polar.tol, "Stop once ||Omega||_F <= tol");
  polar_cmd->add_option("--output", polar.output, "Output JSON file")->required();

  FlowArgs flow;
  auto* flow_cmd = app.add_subcommand("flow", "Write a single-trajectory trace");
  flow_cmd->add_option("--input", flow.input, "Matrix file (JSON array of rows)")->required();
  flow_cmd->add_option("--sigma0", flow.sigma0, "Source covariance matrix file (default identity)");
  flow_cmd->add_option("--h", flow.h, "Lie-Euler step size");
  flow_cmd->add_option("--steps", flow.steps, "Number of steps");
  flow_cmd->add_option("--trace", flow.trace, "Output CSV file")->required();

  ExperimentArgs experiment;
  auto* exp_cmd = app.add_subcommand("experiment", "Run the ensemble convergence study");
  exp_cmd->add_option("--config", experiment.config, "Experiment config JSON")->required();
  exp_cmd->add_option("--out-dir", experiment.out_dir, "Output directory")->required();
  exp_cmd->add_option("--workers", experiment.workers, "Worker threads")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*polar_cmd) return run_polar(polar);
    if (*flow_cmd) return run_flow(flow);
    if (*exp_cmd) return run_experiment_cmd(experiment);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
