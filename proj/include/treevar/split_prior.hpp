#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "treevar/panel.hpp"
#include "treevar/rng.hpp"

namespace treevar {

enum class SplitRegime { Uniform, Sparse, Minnesota };

SplitRegime parse_regime(const std::string& name);
std::string regime_name(SplitRegime r);

// Per-equation split-probability state. counts mirrors the number of internal
// split rules per predictor in the equation's current forest.
struct SplitPriorState {
  SplitRegime regime = SplitRegime::Uniform;
  Eigen::VectorXd s;       // length k, sums to 1
  Eigen::VectorXd phi;     // Dirichlet scales, length k
  double lambda = 1.0;     // sparse-regime concentration
  double lambda1 = 1.0;    // Minnesota own-lag scale
  double lambda2 = 0.5;    // Minnesota cross-lag scale
  Eigen::VectorXi counts;  // length k
};

// Residual variance of a least-squares AR(p) fit with intercept, per column.
Eigen::VectorXd ar_residual_variances(const TimeSeriesPanel& panel, int p);

// phi_q = lambda1/l^2 on own lags, lambda2*(sigma2_i/sigma2_j)/l^2 on cross
// lags, columns ordered lag-major as in DesignPair.
Eigen::VectorXd minnesota_scales(int equation, int n, int p, double lambda1, double lambda2,
                                 const Eigen::VectorXd& sigma2);

Eigen::VectorXd sparse_scales(int k, double lambda);

// The uniform regime is the symmetric large-concentration limit; s then stays
// within O(1e-3) of 1/k while the update keeps a single conjugate code path.
Eigen::VectorXd uniform_scales(int k);

Eigen::VectorXd dirichlet_posterior_params(const Eigen::VectorXd& phi, const Eigen::VectorXi& counts);
Eigen::VectorXd update_split_probs(const Eigen::VectorXd& phi, const Eigen::VectorXi& counts, Rng& rng);

// Draws lambda with likelihood contribution log_lik(lambda) and the
// Beta(0.5, 1) prior on u = lambda/(lambda+k), discretized on a uniform grid
// over u in (0,1).
double sample_lambda_grid(const std::function<double(double)>& log_lik, int k, Rng& rng,
                          int grid_points = 1000);

// Full conditional of the sparse-regime lambda given the current s.
double update_lambda(const Eigen::VectorXd& s, int k, Rng& rng);

// Poisson approximation to the expected number of distinct predictors used:
// lambda * sum_{i=0}^{B-1} 1/(lambda+i).
double expected_active_predictors(double lambda, int branches);

Eigen::MatrixXd dirichlet_draws(const Eigen::VectorXd& alpha, int m, Rng& rng);

SplitPriorState make_split_prior_state(SplitRegime regime, int equation, int n, int p,
                                       double lambda1, double lambda2, double lambda_init,
                                       const Eigen::VectorXd& ar_sigma2);

}  // namespace treevar
