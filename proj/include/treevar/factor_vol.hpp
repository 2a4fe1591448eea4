#pragma once

#include <Eigen/Dense>
#include <vector>

#include "treevar/rng.hpp"

namespace treevar {

struct SvParams {
  double mu = 0.0;
  double phi = 0.9;
  double sigma2 = 0.05;
};

// Hyperpriors for the log-variance recursion: mu Gaussian, (phi+1)/2 Beta,
// sigma2 Gamma (on the variance itself).
struct SvPriors {
  double mu_mean = 0.0;
  double mu_var = 100.0;
  double phi_a = 5.0;
  double phi_b = 1.5;
  double sigma2_shape = 0.5;
  double sigma2_rate = 0.5;
};

// Local/global inverse-gamma auxiliaries for the horseshoe on each loading
// column.
struct HorseshoeState {
  Eigen::MatrixXd lambda2;  // n x r local scales
  Eigen::MatrixXd nu;       // n x r auxiliaries
  Eigen::VectorXd tau2;     // per-column global scales
  Eigen::VectorXd xi;       // per-column auxiliaries

  void init(int n, int r);
  // Prior variance of loading (i, j) is tau2[j] * lambda2(i, j).
  Eigen::VectorXd row_prior_variances(int i) const;
};

// Error-covariance block: loadings, latent factors, log-variance paths for
// the n idiosyncratic series followed by the r factors, and per-series SV
// parameters. In homoskedastic mode the h paths are constant: log sigma_i^2
// for the idiosyncratic rows and 0 for the factor rows.
struct FactorVolState {
  Eigen::MatrixXd Lambda;   // n x r
  Eigen::MatrixXd F;        // T x r
  Eigen::MatrixXd h;        // (n+r) x T
  std::vector<SvParams> sv; // n+r
  HorseshoeState hs;
  bool sv_enabled = true;

  void init(int n, int r, int T, bool with_sv, const Eigen::VectorXd& init_log_var);
  int n() const { return static_cast<int>(Lambda.rows()); }
  int r() const { return static_cast<int>(Lambda.cols()); }
  int T() const { return static_cast<int>(F.rows()); }

  // Sigma_t = Lambda H_t Lambda' + Omega_t.
  Eigen::MatrixXd covariance_at(int t) const;
  Eigen::VectorXd idio_precisions(int i) const;  // e^{-h_{i,t}} over t
};

// Gaussian full conditional of one loadings row given volatility-normalized
// regressors and targets; prior_var holds the horseshoe variances (diagonal
// W_i). resid_i is y_i - g_i(x) over t.
Eigen::RowVectorXd sample_loadings_row(const Eigen::VectorXd& resid_i, const Eigen::MatrixXd& F,
                                       const Eigen::VectorXd& h_i,
                                       const Eigen::VectorXd& prior_var, Rng& rng);

// Inverse-gamma auxiliary sweep for column j of Lambda.
void sample_horseshoe_column(int j, const Eigen::MatrixXd& Lambda, HorseshoeState& hs, Rng& rng);

// f_t ~ N(B_t Lambda' Omega_t^{-1} resid_t, B_t), B_t = (H_t^{-1} +
// Lambda' Omega_t^{-1} Lambda)^{-1}.
Eigen::VectorXd sample_factors_t(const Eigen::MatrixXd& Lambda, const Eigen::VectorXd& omega_diag,
                                 const Eigen::VectorXd& hfac_diag, const Eigen::VectorXd& resid_t,
                                 Rng& rng);

// Full log-volatility path via the 10-component mixture approximation to
// log chi^2_1 and forward-filter backward-sampling; shocks enter as
// log(shock^2 + 1e-6). h_current is the path from the previous sweep, used
// for the indicator draw.
Eigen::VectorXd sample_sv_path(const Eigen::VectorXd& shocks, const Eigen::VectorXd& h_current,
                               const SvParams& params, Rng& rng);

// mu conjugate, sigma2 by slice sampling its exact full conditional, phi by
// an independence MH step that keeps |phi| < 1 and accounts for the
// stationary initial condition.
SvParams sample_sv_hyper(const Eigen::VectorXd& h, const SvParams& current, const SvPriors& priors,
                         Rng& rng);

double sample_sigma2_homoskedastic(const Eigen::VectorXd& residuals, double prior_shape,
                                   double prior_scale, Rng& rng);

namespace sv_mixture {
// Omori-Chib-Shephard-Nakajima mixture for log chi^2_1.
constexpr int kComponents = 10;
extern const double prob[kComponents];
extern const double mean[kComponents];
extern const double var[kComponents];
constexpr double kOffset = 1e-6;
}  // namespace sv_mixture

}  // namespace treevar
