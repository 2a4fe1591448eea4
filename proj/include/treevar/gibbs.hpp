#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "treevar/bart.hpp"
#include "treevar/factor_vol.hpp"
#include "treevar/panel.hpp"
#include "treevar/split_prior.hpp"

namespace treevar {

enum class Volatility { SV, Homoskedastic };

Volatility parse_volatility(const std::string& name);
std::string volatility_name(Volatility v);

struct SamplerConfig {
  int num_trees = 200;
  int lags = 1;
  int factors = -1;  // -1 resolves to min(4, n-1)
  SplitRegime regime = SplitRegime::Uniform;
  double lambda1 = 1.0;
  double lambda2 = 0.5;
  double lambda_init = 1.0;
  bool update_lambda_hyper = true;
  Volatility volatility = Volatility::SV;
  int n_burn = 1000;
  int n_save = 1000;
  int thin = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double tree_gamma = 0.95;
  double tree_beta = 0.2;
  // Leaf-variance calibration: tau2 = (range/4)^2 / M on the standardized
  // response unless sigma_mu overrides the range/4 factor.
  std::optional<double> sigma_mu;
  MoveProbs moves;
  SvPriors sv_priors;
  double homo_shape = 3.0;  // homoskedastic IG(shape, 0.5 * var(y_j))
  int threads = 1;
  int cache_refresh_every = 100;
  int checkpoint_every = 0;
  std::string checkpoint_path;

  int resolved_factors(int n) const { return factors < 0 ? std::min(4, n - 1) : factors; }
  void validate() const;
};

// Everything the sampler mutates between sweeps.
struct ModelState {
  DesignPair design;
  std::vector<EquationForest> forests;
  std::vector<SplitPriorState> split;
  std::vector<TreePriorParams> tree_prior;  // tau2 differs per equation
  FactorVolState fv;
  Eigen::VectorXd homo_scale;  // IG scale parameter per equation
  long sweep = 0;

  int n() const { return static_cast<int>(design.Y.cols()); }
  int T() const { return static_cast<int>(design.Y.rows()); }
  int k() const { return design.k(); }
};

struct DrawRecord {
  std::vector<std::vector<RegressionTree>> forests;  // [equation][tree]
  Eigen::MatrixXd Lambda;
  std::vector<SvParams> sv;
  Eigen::VectorXd h_last;  // h_{., T} (length n + r)
  std::vector<Eigen::VectorXd> s;
  std::vector<double> lambda;
  std::vector<Eigen::VectorXi> counts;
};

struct ChainOutput {
  std::vector<DrawRecord> draws;
  std::vector<std::string> names;
  std::vector<TimeSeriesPanel::Scaling> scaling;
  int n = 0, k = 0, lags = 0, num_trees = 0, factors = 0;
  SplitRegime regime = SplitRegime::Uniform;
  Volatility volatility = Volatility::SV;
  std::uint64_t seed = 0;
  Eigen::VectorXd last_lags;  // lag vector at the end of the sample, standardized
  std::vector<Eigen::VectorXd> final_phi;  // Dirichlet scales at the last sweep
  Eigen::MatrixXd final_h;                 // (n+r) x T log-variance paths at the last sweep
};

ModelState init_state(const DesignPair& design, const TimeSeriesPanel& panel_std,
                      const SamplerConfig& cfg);

// One full update in fixed order: (1) per equation, all M trees against the
// partial residuals, then the split-count refresh, the conjugate s draw and
// the sparse-regime lambda draw; (2) loadings rows and horseshoe scales;
// (3) factors t by t; (4) log-volatility paths and their parameters, or the
// homoskedastic variance draw. Equations are conditionally independent given
// (F, Lambda, h), so step (1) may run across threads.
void gibbs_sweep(ModelState& state, const SamplerConfig& cfg, Rng& rng);

// Burn-in plus thinned saved sweeps over the transformed panel; the panel is
// standardized internally and the scaling recorded in the output. resume_from
// restores a checkpoint written by a previous run with the same config.
ChainOutput run_chain(const SamplerConfig& cfg, const TimeSeriesPanel& panel,
                      const std::string& resume_from = {});

nlohmann::json chain_to_json(const ChainOutput& chain);
ChainOutput chain_from_json(const nlohmann::json& j);
void save_chain(const ChainOutput& chain, const std::string& path);
ChainOutput load_chain(const std::string& path);

}  // namespace treevar
