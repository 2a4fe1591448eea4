#include "treevar/factor_vol.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace treevar {

namespace sv_mixture {
const double prob[kComponents] = {0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                                  0.18842, 0.12047, 0.05591, 0.01575, 0.00115};
const double mean[kComponents] = {1.92677, 1.34744, 0.73504,  0.02266,  -0.85173,
                                  -1.97278, -3.46788, -5.55246, -8.68384, -14.65000};
const double var[kComponents] = {0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                                 0.98583, 1.57469, 2.54498, 4.16591, 7.33342};
}  // namespace sv_mixture

void HorseshoeState::init(int n, int r) {
  lambda2 = Eigen::MatrixXd::Ones(n, r);
  nu = Eigen::MatrixXd::Ones(n, r);
  tau2 = Eigen::VectorXd::Ones(r);
  xi = Eigen::VectorXd::Ones(r);
}

Eigen::VectorXd HorseshoeState::row_prior_variances(int i) const {
  return (lambda2.row(i).transpose().array() * tau2.array()).matrix();
}

void FactorVolState::init(int n, int r, int T, bool with_sv,
                          const Eigen::VectorXd& init_log_var) {
  Lambda = Eigen::MatrixXd::Zero(n, r);
  F = Eigen::MatrixXd::Zero(T, r);
  h.resize(n + r, T);
  sv.assign(n + r, SvParams{});
  hs.init(n, r);
  sv_enabled = with_sv;
  for (int i = 0; i < n + r; ++i) {
    const double lv = i < n ? init_log_var[i] : 0.0;
    h.row(i).setConstant(lv);
    sv[i].mu = lv;
  }
}

Eigen::MatrixXd FactorVolState::covariance_at(int t) const {
  const int nn = n();
  Eigen::MatrixXd sigma =
      h.col(t).head(nn).array().exp().matrix().asDiagonal().toDenseMatrix();
  if (r() > 0) {
    Eigen::VectorXd hf = h.col(t).tail(r()).array().exp();
    sigma += Lambda * hf.asDiagonal() * Lambda.transpose();
  }
  return sigma;
}

Eigen::VectorXd FactorVolState::idio_precisions(int i) const {
  return (-h.row(i).transpose().array()).exp();
}

Eigen::RowVectorXd sample_loadings_row(const Eigen::VectorXd& resid_i, const Eigen::MatrixXd& F,
                                       const Eigen::VectorXd& h_i,
                                       const Eigen::VectorXd& prior_var, Rng& rng) {
  const int r = static_cast<int>(F.cols());
  Eigen::ArrayXd inv_sd = (-0.5 * h_i.array()).exp();
  Eigen::MatrixXd Fn = F.array().colwise() * inv_sd;
  Eigen::VectorXd yn = resid_i.array() * inv_sd;
  if (!Fn.allFinite() || !yn.allFinite()) {
    throw std::domain_error("sample_loadings_row: non-finite normalized inputs");
  }
  Eigen::MatrixXd prec = Fn.transpose() * Fn;
  prec += prior_var.cwiseInverse().asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("sample_loadings_row: posterior precision not positive definite");
  }
  Eigen::VectorXd mean = llt.solve(Fn.transpose() * yn);
  // draw = mean + L^{-T} z
  Eigen::VectorXd z = rng.std_normal_vector(r);
  Eigen::VectorXd draw = mean + llt.matrixU().solve(z);
  return draw.transpose();
}

void sample_horseshoe_column(int j, const Eigen::MatrixXd& Lambda, HorseshoeState& hs, Rng& rng) {
  const int n = static_cast<int>(Lambda.rows());
  // Rates floored against underflow when a column sits at numerical zero.
  constexpr double kMinRate = 1e-280;
  double sum_ratio = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lam = Lambda(i, j);
    hs.lambda2(i, j) = rng.inv_gamma(
        1.0, std::max(1.0 / hs.nu(i, j) + lam * lam / (2.0 * hs.tau2[j]), kMinRate));
    hs.nu(i, j) = rng.inv_gamma(1.0, 1.0 + 1.0 / hs.lambda2(i, j));
    sum_ratio += lam * lam / hs.lambda2(i, j);
  }
  hs.tau2[j] =
      rng.inv_gamma(0.5 * (n + 1), std::max(1.0 / hs.xi[j] + 0.5 * sum_ratio, kMinRate));
  hs.xi[j] = rng.inv_gamma(1.0, 1.0 + 1.0 / hs.tau2[j]);
}

Eigen::VectorXd sample_factors_t(const Eigen::MatrixXd& Lambda, const Eigen::VectorXd& omega_diag,
                                 const Eigen::VectorXd& hfac_diag, const Eigen::VectorXd& resid_t,
                                 Rng& rng) {
  const int r = static_cast<int>(Lambda.cols());
  Eigen::VectorXd omega_inv = omega_diag.cwiseInverse();
  Eigen::MatrixXd prec = Lambda.transpose() * omega_inv.asDiagonal() * Lambda;
  prec += hfac_diag.cwiseInverse().asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("sample_factors_t: precision not positive definite");
  }
  Eigen::VectorXd mean = llt.solve(Lambda.transpose() * (omega_inv.asDiagonal() * resid_t));
  Eigen::VectorXd z = rng.std_normal_vector(r);
  return mean + llt.matrixU().solve(z);
}

Eigen::VectorXd sample_sv_path(const Eigen::VectorXd& shocks, const Eigen::VectorXd& h_current,
                               const SvParams& params, Rng& rng) {
  using namespace sv_mixture;
  const int T = static_cast<int>(shocks.size());
  const double mu = params.mu, phi = params.phi, sigma2 = params.sigma2;
  if (!(std::abs(phi) < 1.0)) throw std::domain_error("sample_sv_path: |phi| must be < 1");
  if (h_current.size() != T) throw std::invalid_argument("sample_sv_path: path length mismatch");

  Eigen::VectorXd ystar = (shocks.array().square() + kOffset).log();

  // Mixture indicators given the current path, then the path given the
  // indicators.
  std::vector<int> comp(T);
  Eigen::VectorXd logw(kComponents);
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < kComponents; ++c) {
      const double d = ystar[t] - h_current[t] - mean[c];
      logw[c] = std::log(prob[c]) - 0.5 * std::log(var[c]) - 0.5 * d * d / var[c];
    }
    comp[t] = rng.categorical_logw(logw);
  }

  // Forward filter on h_t = mu + phi (h_{t-1} - mu) + eta, observation
  // ystar_t = h_t + m_c + N(0, v2_c).
  Eigen::VectorXd filt_mean(T), filt_var(T), pred_mean(T), pred_var(T);
  double a = mu;
  double P = sigma2 / (1.0 - phi * phi);
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      a = mu + phi * (filt_mean[t - 1] - mu);
      P = phi * phi * filt_var[t - 1] + sigma2;
    }
    pred_mean[t] = a;
    pred_var[t] = P;
    const double v2 = var[comp[t]];
    const double e = ystar[t] - mean[comp[t]] - a;
    const double S = P + v2;
    const double K = P / S;
    filt_mean[t] = a + K * e;
    filt_var[t] = (1.0 - K) * P;
  }

  Eigen::VectorXd h(T);
  h[T - 1] = rng.normal(filt_mean[T - 1], std::sqrt(filt_var[T - 1]));
  for (int t = T - 2; t >= 0; --t) {
    const double Pnext = phi * phi * filt_var[t] + sigma2;
    const double J = filt_var[t] * phi / Pnext;
    const double m = filt_mean[t] + J * (h[t + 1] - (mu + phi * (filt_mean[t] - mu)));
    const double v = filt_var[t] * (1.0 - J * phi);
    h[t] = rng.normal(m, std::sqrt(std::max(v, 0.0)));
  }
  return h;
}

namespace {

// Log joint of the h path under its AR(1) law, as a function of the
// parameters (stationary initial condition included).
double sv_path_loglik(const Eigen::VectorXd& h, double mu, double phi, double sigma2) {
  const int T = static_cast<int>(h.size());
  const double one_m_phi2 = 1.0 - phi * phi;
  double ll = 0.5 * std::log(one_m_phi2) - 0.5 * std::log(sigma2) -
              0.5 * one_m_phi2 * (h[0] - mu) * (h[0] - mu) / sigma2;
  double ssr = 0.0;
  for (int t = 1; t < T; ++t) {
    const double e = h[t] - mu - phi * (h[t - 1] - mu);
    ssr += e * e;
  }
  ll += -0.5 * (T - 1) * std::log(sigma2) - 0.5 * ssr / sigma2;
  return ll;
}

double slice_sample_1d(double x0, const std::function<double(double)>& logf, double width,
                       int max_steps, Rng& rng) {
  const double ly = logf(x0) + std::log(rng.uniform_pos());
  double lo = x0 - width * rng.uniform();
  double hi = lo + width;
  for (int i = 0; i < max_steps && logf(lo) > ly; ++i) lo -= width;
  for (int i = 0; i < max_steps && logf(hi) > ly; ++i) hi += width;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(lo, hi);
    if (logf(x) > ly) return x;
    (x < x0 ? lo : hi) = x;
  }
  return x0;
}

}  // namespace

SvParams sample_sv_hyper(const Eigen::VectorXd& h, const SvParams& current, const SvPriors& priors,
                         Rng& rng) {
  const int T = static_cast<int>(h.size());
  SvParams out = current;

  // mu | phi, sigma2: Gaussian.
  {
    const double phi = out.phi, sigma2 = out.sigma2;
    const double one_m_phi2 = 1.0 - phi * phi;
    double prec = 1.0 / priors.mu_var + one_m_phi2 / sigma2;
    double mean_acc = priors.mu_mean / priors.mu_var + one_m_phi2 * h[0] / sigma2;
    const double c = (1.0 - phi) / sigma2;
    for (int t = 1; t < T; ++t) {
      prec += c * (1.0 - phi);
      mean_acc += c * (h[t] - phi * h[t - 1]);
    }
    out.mu = rng.normal(mean_acc / prec, std::sqrt(1.0 / prec));
  }

  // phi | mu, sigma2: independence MH with the conditional least-squares
  // proposal; the stationary-init term and the Beta prior enter the ratio.
  {
    const double mu = out.mu, sigma2 = out.sigma2;
    double sxx = 0.0, sxy = 0.0;
    for (int t = 1; t < T; ++t) {
      sxx += (h[t - 1] - mu) * (h[t - 1] - mu);
      sxy += (h[t - 1] - mu) * (h[t] - mu);
    }
    if (sxx > 0.0) {
      const double phat = sxy / sxx;
      const double psd = std::sqrt(sigma2 / sxx);
      const double prop = rng.normal(phat, psd);
      if (std::abs(prop) < 1.0) {
        auto log_target = [&](double phi) {
          return sv_path_loglik(h, mu, phi, sigma2) +
                 (priors.phi_a - 1.0) * std::log1p(phi) + (priors.phi_b - 1.0) * std::log1p(-phi);
        };
        auto log_q = [&](double phi) {
          const double z = (phi - phat) / psd;
          return -0.5 * z * z;
        };
        const double log_acc =
            log_target(prop) - log_target(out.phi) + log_q(out.phi) - log_q(prop);
        if (std::log(rng.uniform_pos()) < log_acc) out.phi = prop;
      }
    }
  }

  // sigma2 | mu, phi: Gamma(shape, rate) prior on the variance; the full
  // conditional is generalized inverse Gaussian, drawn exactly by slice
  // sampling on log sigma2.
  {
    const double mu = out.mu, phi = out.phi;
    const double one_m_phi2 = 1.0 - phi * phi;
    double ssr = one_m_phi2 * (h[0] - mu) * (h[0] - mu);
    for (int t = 1; t < T; ++t) {
      const double e = h[t] - mu - phi * (h[t - 1] - mu);
      ssr += e * e;
    }
    auto logf = [&](double ls) {
      const double s2 = std::exp(ls);
      return (priors.sigma2_shape - 1.0) * ls - priors.sigma2_rate * s2 -
             0.5 * T * ls - 0.5 * ssr / s2 + ls;  // + ls: Jacobian of log scale
    };
    const double ls = slice_sample_1d(std::log(out.sigma2), logf, 1.0, 50, rng);
    out.sigma2 = std::exp(ls);
  }

  return out;
}

double sample_sigma2_homoskedastic(const Eigen::VectorXd& residuals, double prior_shape,
                                   double prior_scale, Rng& rng) {
  const double shape = prior_shape + 0.5 * residuals.size();
  const double scale = prior_scale + 0.5 * residuals.squaredNorm();
  return rng.inv_gamma(shape, scale);
}

}  // namespace treevar
