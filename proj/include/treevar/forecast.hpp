#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "treevar/gibbs.hpp"

namespace treevar {

// Per-draw predictive law at each horizon, in standardized units: the
// conditional Gaussian (mean, covariance) given the draw's simulated path,
// and the realized simulated point that feeds the next horizon's lag vector.
struct ForecastResult {
  int h_max = 0;
  std::vector<std::vector<Eigen::VectorXd>> means;  // [h-1][draw]
  std::vector<std::vector<Eigen::MatrixXd>> covs;
  std::vector<std::vector<Eigen::VectorXd>> paths;
  int skipped_draws = 0;

  int num_draws() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
};

// Recursive simulation from every posterior draw: volatilities advance by the
// log-variance recursion (held fixed in homoskedastic mode), the simulated
// y is pushed into the lag vector. Draws with a non-finite or non-PD
// covariance are dropped and counted.
ForecastResult simulate_forecast_paths(const ChainOutput& chain, const Eigen::VectorXd& x_last,
                                       int h_max, Rng& rng);

double mvn_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov);

// Log of the draw-averaged Gaussian mixture density at y_obs, stabilized by
// log-sum-exp. Inputs are in whatever units the moments are expressed in.
double lpds_joint(const Eigen::VectorXd& y_obs, const std::vector<Eigen::VectorXd>& means,
                  const std::vector<Eigen::MatrixXd>& covs);

double lpds_marginal(double y_obs_i, int i, const std::vector<Eigen::VectorXd>& means,
                     const std::vector<Eigen::MatrixXd>& covs);

// RMSE(model)/RMSE(benchmark) over an aligned evaluation set.
double rmspe_ratio(const std::vector<double>& model_forecasts, const std::vector<double>& actuals,
                   const std::vector<double>& benchmark_forecasts);

// Posterior inclusion probabilities: fraction of saved draws with at least
// one split on the predictor, per equation (rows) and predictor (columns).
Eigen::MatrixXd pip(const ChainOutput& chain);

// De-standardized moments for one draw.
Eigen::VectorXd destandardize_mean(const Eigen::VectorXd& mean,
                                   const std::vector<TimeSeriesPanel::Scaling>& sc);
Eigen::MatrixXd destandardize_cov(const Eigen::MatrixXd& cov,
                                  const std::vector<TimeSeriesPanel::Scaling>& sc);

struct EvalConfig {
  int t0 = 0;          // training length at the first origin
  int h_max = 1;
  int refit_stride = 1;
  std::string benchmark_csv;  // empty: RMSPE against the benchmark is skipped
  bool compute_rmspe = false;
};

struct EvaluationReport {
  std::vector<int> origins;
  std::vector<std::string> names;
  int h_max = 1;
  int refit_stride = 1;
  // Per-origin log scores in original units; NaN marks horizons beyond the
  // sample end.
  std::vector<std::vector<double>> joint_lpds;                  // [h-1][origin]
  std::vector<std::vector<std::vector<double>>> marginal_lpds;  // [h-1][var][origin]
  std::vector<std::vector<std::vector<double>>> point_forecasts;  // original units
  std::vector<std::vector<std::vector<double>>> actuals;
  std::optional<std::vector<std::vector<double>>> rmspe;  // [h-1][var]
  Eigen::MatrixXd pip_first_fit;  // n x k, from the first origin's chain
  int skipped_draws = 0;

  std::vector<double> cumulative_joint_lpds(int h) const;
};

// Expanding-window evaluation over the transformed panel: fit on rows [0, t),
// forecast h = 1..h_max, score at the realized values, advance.
EvaluationReport expanding_window(const SamplerConfig& cfg, const EvalConfig& eval,
                                  const TimeSeriesPanel& panel);

// Per-origin stream derivations used by expanding_window; public so an
// origin-by-origin rerun can reproduce the report exactly.
std::uint64_t origin_fit_seed(std::uint64_t base_seed, int origin);
Rng origin_gap_rng(std::uint64_t base_seed, int origin);
Rng origin_forecast_rng(std::uint64_t base_seed, int origin);

void write_report_csv(const EvaluationReport& report, const std::string& dir);
void write_report_json(const EvaluationReport& report, const std::string& path);

// Benchmark point forecasts keyed by (origin, horizon, variable name).
struct BenchmarkForecasts {
  // benchmark[origin][h-1][var] = mean, NaN when absent
  std::vector<std::string> names;
  std::vector<int> origins;
  std::vector<std::vector<std::vector<double>>> values;

  double lookup(int origin, int h, int var) const;
};
BenchmarkForecasts load_benchmark_csv(const std::string& path,
                                      const std::vector<std::string>& names,
                                      const std::vector<int>& origins, int h_max);

}  // namespace treevar
