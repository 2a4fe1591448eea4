#include "treevar/split_prior.hpp"

#include <cmath>
#include <stdexcept>

namespace treevar {

SplitRegime parse_regime(const std::string& name) {
  if (name == "uniform") return SplitRegime::Uniform;
  if (name == "sparse") return SplitRegime::Sparse;
  if (name == "minnesota") return SplitRegime::Minnesota;
  throw std::invalid_argument("unknown split prior regime '" + name +
                              "' (expected uniform, sparse or minnesota)");
}

std::string regime_name(SplitRegime r) {
  switch (r) {
    case SplitRegime::Uniform: return "uniform";
    case SplitRegime::Sparse: return "sparse";
    case SplitRegime::Minnesota: return "minnesota";
  }
  return "?";
}

Eigen::VectorXd ar_residual_variances(const TimeSeriesPanel& panel, int p) {
  const int T = static_cast<int>(panel.rows());
  const int n = static_cast<int>(panel.cols());
  if (T <= p + 2) throw std::length_error("ar_residual_variances: sample too short for AR(p)");
  const int rows = T - p;
  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j) {
    Eigen::MatrixXd Z(rows, p + 1);
    Eigen::VectorXd y(rows);
    for (int t = 0; t < rows; ++t) {
      Z(t, 0) = 1.0;
      for (int l = 1; l <= p; ++l) Z(t, l) = panel.values(t + p - l, j);
      y[t] = panel.values(t + p, j);
    }
    Eigen::MatrixXd ZtZ = Z.transpose() * Z;
    Eigen::LDLT<Eigen::MatrixXd> solver(ZtZ);
    if (solver.info() != Eigen::Success || !solver.isPositive()) {
      throw std::domain_error("ar_residual_variances: degenerate regression for " + panel.names[j]);
    }
    Eigen::VectorXd beta = solver.solve(Z.transpose() * y);
    const double ssr = (y - Z * beta).squaredNorm();
    const int dof = rows - (p + 1);
    if (dof < 1) throw std::length_error("ar_residual_variances: no degrees of freedom");
    const double v = ssr / dof;
    if (!(v > 0.0)) {
      throw std::domain_error("ar_residual_variances: zero residual variance for " + panel.names[j]);
    }
    out[j] = v;
  }
  return out;
}

Eigen::VectorXd minnesota_scales(int equation, int n, int p, double lambda1, double lambda2,
                                 const Eigen::VectorXd& sigma2) {
  if ((sigma2.array() <= 0.0).any()) {
    throw std::invalid_argument("minnesota_scales: sigma2 must be strictly positive");
  }
  Eigen::VectorXd phi(n * p);
  for (int q = 0; q < n * p; ++q) {
    const int lag = q / n + 1;
    const int var = q % n;
    const double l2 = static_cast<double>(lag) * lag;
    phi[q] = (var == equation) ? lambda1 / l2
                               : lambda2 * (sigma2[equation] / sigma2[var]) / l2;
  }
  return phi;
}

Eigen::VectorXd sparse_scales(int k, double lambda) {
  if (!(lambda > 0.0) || k < 1) throw std::invalid_argument("sparse_scales: need lambda > 0, k >= 1");
  return Eigen::VectorXd::Constant(k, lambda / k);
}

Eigen::VectorXd uniform_scales(int k) { return Eigen::VectorXd::Constant(k, 1e6); }

Eigen::VectorXd dirichlet_posterior_params(const Eigen::VectorXd& phi, const Eigen::VectorXi& counts) {
  return phi + counts.cast<double>();
}

Eigen::VectorXd update_split_probs(const Eigen::VectorXd& phi, const Eigen::VectorXi& counts,
                                   Rng& rng) {
  if ((phi.array() <= 0.0).any()) {
    throw std::invalid_argument("update_split_probs: phi must be strictly positive");
  }
  return rng.dirichlet(dirichlet_posterior_params(phi, counts));
}

double sample_lambda_grid(const std::function<double(double)>& log_lik, int k, Rng& rng,
                          int grid_points) {
  Eigen::VectorXd logw(grid_points);
  Eigen::VectorXd lambdas(grid_points);
  for (int g = 0; g < grid_points; ++g) {
    const double u = (g + 0.5) / grid_points;
    const double lambda = k * u / (1.0 - u);
    lambdas[g] = lambda;
    // Beta(0.5, 1) density in u; uniform grid spacing cancels.
    logw[g] = -0.5 * std::log(u) + log_lik(lambda);
  }
  return lambdas[rng.categorical_logw(logw)];
}

double update_lambda(const Eigen::VectorXd& s, int k, Rng& rng) {
  Eigen::VectorXd log_s = s.array().max(1e-300).log();
  const double sum_log_s = log_s.sum();
  auto log_lik = [&](double lambda) {
    return std::lgamma(lambda) - k * std::lgamma(lambda / k) + (lambda / k - 1.0) * sum_log_s;
  };
  return sample_lambda_grid(log_lik, k, rng);
}

double expected_active_predictors(double lambda, int branches) {
  if (!(lambda > 0.0) || branches < 1) {
    throw std::invalid_argument("expected_active_predictors: need lambda > 0, branches >= 1");
  }
  double acc = 0.0;
  for (int i = 0; i < branches; ++i) acc += 1.0 / (lambda + i);
  return lambda * acc;
}

Eigen::MatrixXd dirichlet_draws(const Eigen::VectorXd& alpha, int m, Rng& rng) {
  Eigen::MatrixXd out(m, alpha.size());
  for (int i = 0; i < m; ++i) out.row(i) = rng.dirichlet(alpha).transpose();
  return out;
}

SplitPriorState make_split_prior_state(SplitRegime regime, int equation, int n, int p,
                                       double lambda1, double lambda2, double lambda_init,
                                       const Eigen::VectorXd& ar_sigma2) {
  SplitPriorState st;
  st.regime = regime;
  st.lambda = lambda_init;
  st.lambda1 = lambda1;
  st.lambda2 = lambda2;
  const int k = n * p;
  switch (regime) {
    case SplitRegime::Uniform: st.phi = uniform_scales(k); break;
    case SplitRegime::Sparse: st.phi = sparse_scales(k, lambda_init); break;
    case SplitRegime::Minnesota:
      st.phi = minnesota_scales(equation, n, p, lambda1, lambda2, ar_sigma2);
      break;
  }
  st.s = Eigen::VectorXd::Constant(k, 1.0 / k);
  st.counts = Eigen::VectorXi::Zero(k);
  return st;
}

}  // namespace treevar
