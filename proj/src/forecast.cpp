#include "treevar/forecast.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "treevar/csv.hpp"

namespace treevar {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

ForecastResult simulate_forecast_paths(const ChainOutput& chain, const Eigen::VectorXd& x_last,
                                       int h_max, Rng& rng) {
  if (h_max < 1) throw std::invalid_argument("simulate_forecast_paths: h_max must be >= 1");
  if (x_last.size() != chain.k) {
    throw std::invalid_argument("simulate_forecast_paths: lag vector has wrong length");
  }
  const int n = chain.n;
  const int r = chain.factors;
  ForecastResult out;
  out.h_max = h_max;
  out.means.resize(h_max);
  out.covs.resize(h_max);
  out.paths.resize(h_max);

  for (const auto& draw : chain.draws) {
    Eigen::VectorXd x = x_last;
    Eigen::VectorXd h_state = draw.h_last;
    std::vector<Eigen::VectorXd> means, paths;
    std::vector<Eigen::MatrixXd> covs;
    bool ok = true;
    for (int h = 1; h <= h_max && ok; ++h) {
      if (chain.volatility == Volatility::SV) {
        for (int i = 0; i < n + r; ++i) {
          const auto& p = draw.sv[i];
          h_state[i] = rng.normal(p.mu + p.phi * (h_state[i] - p.mu), std::sqrt(p.sigma2));
        }
      }
      Eigen::VectorXd mean(n);
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (const auto& tree : draw.forests[j]) acc += tree.evaluate_point(x);
        mean[j] = acc;
      }
      Eigen::MatrixXd cov =
          h_state.head(n).array().exp().matrix().asDiagonal().toDenseMatrix();
      if (r > 0) {
        Eigen::VectorXd hf = h_state.tail(r).array().exp();
        cov += draw.Lambda * hf.asDiagonal() * draw.Lambda.transpose();
      }
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (!cov.allFinite() || !mean.allFinite() || llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      Eigen::VectorXd y = mean + llt.matrixL() * rng.std_normal_vector(n);
      // Shift the lag vector: y becomes lag 1.
      Eigen::VectorXd x_next(chain.k);
      x_next.head(n) = y;
      if (chain.k > n) x_next.tail(chain.k - n) = x.head(chain.k - n);
      x = x_next;
      means.push_back(std::move(mean));
      covs.push_back(std::move(cov));
      paths.push_back(std::move(y));
    }
    if (!ok) {
      ++out.skipped_draws;
      continue;
    }
    for (int h = 0; h < h_max; ++h) {
      out.means[h].push_back(std::move(means[h]));
      out.covs[h].push_back(std::move(covs[h]));
      out.paths[h].push_back(std::move(paths[h]));
    }
  }
  return out;
}

double mvn_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
  const int n = static_cast<int>(y.size());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("mvn_logpdf: covariance not positive definite");
  }
  Eigen::VectorXd d = y - mean;
  Eigen::VectorXd z = llt.matrixL().solve(d);
  double log_det = 0.0;
  for (int i = 0; i < n; ++i) log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * n * kLog2Pi - log_det - 0.5 * z.squaredNorm();
}

double lpds_joint(const Eigen::VectorXd& y_obs, const std::vector<Eigen::VectorXd>& means,
                  const std::vector<Eigen::MatrixXd>& covs) {
  const int m = static_cast<int>(means.size());
  if (m == 0) throw std::invalid_argument("lpds_joint: no predictive draws");
  Eigen::VectorXd logp(m);
  for (int i = 0; i < m; ++i) logp[i] = mvn_logpdf(y_obs, means[i], covs[i]);
  const double mx = logp.maxCoeff();
  return mx + std::log((logp.array() - mx).exp().mean());
}

double lpds_marginal(double y_obs_i, int i, const std::vector<Eigen::VectorXd>& means,
                     const std::vector<Eigen::MatrixXd>& covs) {
  const int m = static_cast<int>(means.size());
  if (m == 0) throw std::invalid_argument("lpds_marginal: no predictive draws");
  Eigen::VectorXd logp(m);
  for (int d = 0; d < m; ++d) {
    const double var = covs[d](i, i);
    const double diff = y_obs_i - means[d][i];
    logp[d] = -0.5 * kLog2Pi - 0.5 * std::log(var) - 0.5 * diff * diff / var;
  }
  const double mx = logp.maxCoeff();
  return mx + std::log((logp.array() - mx).exp().mean());
}

double rmspe_ratio(const std::vector<double>& model_forecasts, const std::vector<double>& actuals,
                   const std::vector<double>& benchmark_forecasts) {
  const std::size_t m = model_forecasts.size();
  if (m == 0 || actuals.size() != m || benchmark_forecasts.size() != m) {
    throw std::invalid_argument("rmspe_ratio: aligned non-empty inputs required");
  }
  double se_model = 0.0, se_bench = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    se_model += (model_forecasts[i] - actuals[i]) * (model_forecasts[i] - actuals[i]);
    se_bench += (benchmark_forecasts[i] - actuals[i]) * (benchmark_forecasts[i] - actuals[i]);
  }
  if (se_bench == 0.0) throw std::domain_error("rmspe_ratio: benchmark RMSE is zero");
  return std::sqrt(se_model / m) / std::sqrt(se_bench / m);
}

Eigen::MatrixXd pip(const ChainOutput& chain) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(chain.n, chain.k);
  if (chain.draws.empty()) return out;
  for (const auto& d : chain.draws) {
    for (int j = 0; j < chain.n; ++j) {
      for (int q = 0; q < chain.k; ++q) {
        if (d.counts[j][q] >= 1) out(j, q) += 1.0;
      }
    }
  }
  return out / static_cast<double>(chain.draws.size());
}

Eigen::VectorXd destandardize_mean(const Eigen::VectorXd& mean,
                                   const std::vector<TimeSeriesPanel::Scaling>& sc) {
  Eigen::VectorXd out(mean.size());
  for (int i = 0; i < mean.size(); ++i) out[i] = sc[i].center + sc[i].scale * mean[i];
  return out;
}

Eigen::MatrixXd destandardize_cov(const Eigen::MatrixXd& cov,
                                  const std::vector<TimeSeriesPanel::Scaling>& sc) {
  Eigen::VectorXd scale(cov.rows());
  for (int i = 0; i < cov.rows(); ++i) scale[i] = sc[i].scale;
  return scale.asDiagonal() * cov * scale.asDiagonal();
}

std::vector<double> EvaluationReport::cumulative_joint_lpds(int h) const {
  std::vector<double> out;
  double acc = 0.0;
  for (double v : joint_lpds[h - 1]) {
    if (!std::isnan(v)) acc += v;
    out.push_back(acc);
  }
  return out;
}

double BenchmarkForecasts::lookup(int origin, int h, int var) const {
  for (std::size_t i = 0; i < origins.size(); ++i) {
    if (origins[i] == origin) return values[i][h - 1][var];
  }
  return kNaN;
}

BenchmarkForecasts load_benchmark_csv(const std::string& path,
                                      const std::vector<std::string>& names,
                                      const std::vector<int>& origins, int h_max) {
  auto table = csv::read_file(path);
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < table.header.size(); ++i) col[table.header[i]] = static_cast<int>(i);
  for (const char* required : {"origin", "horizon", "variable", "mean"}) {
    if (!col.count(required)) {
      throw std::runtime_error("benchmark csv: missing column '" + std::string(required) + "'");
    }
  }
  std::map<std::string, int> var_index;
  for (std::size_t j = 0; j < names.size(); ++j) var_index[names[j]] = static_cast<int>(j);

  BenchmarkForecasts b;
  b.names = names;
  b.origins = origins;
  b.values.assign(origins.size(),
                  std::vector<std::vector<double>>(h_max, std::vector<double>(names.size(), kNaN)));
  std::map<int, int> origin_index;
  for (std::size_t i = 0; i < origins.size(); ++i) origin_index[origins[i]] = static_cast<int>(i);

  for (const auto& row : table.rows) {
    const int origin = static_cast<int>(csv::to_double(row[col["origin"]], path));
    const int h = static_cast<int>(csv::to_double(row[col["horizon"]], path));
    const std::string& var = row[col["variable"]];
    if (!origin_index.count(origin) || h < 1 || h > h_max || !var_index.count(var)) continue;
    b.values[origin_index[origin]][h - 1][var_index[var]] = csv::to_double(row[col["mean"]], path);
  }
  return b;
}

std::uint64_t origin_fit_seed(std::uint64_t base_seed, int origin) {
  return Rng(base_seed).substream(1000 + origin).seed();
}

Rng origin_gap_rng(std::uint64_t base_seed, int origin) {
  return Rng(base_seed).substream(2000 + origin, 7);
}

Rng origin_forecast_rng(std::uint64_t base_seed, int origin) {
  return Rng(base_seed).substream(3000 + origin, 11);
}

EvaluationReport expanding_window(const SamplerConfig& cfg, const EvalConfig& eval,
                                  const TimeSeriesPanel& panel) {
  const int T = static_cast<int>(panel.rows());
  const int n = static_cast<int>(panel.cols());
  if (eval.t0 >= T) throw std::invalid_argument("expanding_window: t0 must be < T");
  if (eval.t0 <= cfg.lags + 2) throw std::invalid_argument("expanding_window: t0 too small");
  if (eval.compute_rmspe && eval.benchmark_csv.empty()) {
    throw std::invalid_argument("expanding_window: RMSPE requested but no benchmark csv given");
  }

  EvaluationReport rep;
  rep.names = panel.names;
  rep.h_max = eval.h_max;
  rep.refit_stride = eval.refit_stride;
  for (int t = eval.t0; t < T; ++t) rep.origins.push_back(t);
  const int n_origins = static_cast<int>(rep.origins.size());
  rep.joint_lpds.assign(eval.h_max, std::vector<double>(n_origins, kNaN));
  rep.marginal_lpds.assign(
      eval.h_max, std::vector<std::vector<double>>(n, std::vector<double>(n_origins, kNaN)));
  rep.point_forecasts = rep.marginal_lpds;
  rep.actuals = rep.marginal_lpds;

  ChainOutput chain;
  TimeSeriesPanel fit_panel;
  int fit_t = -1;

  for (int oi = 0; oi < n_origins; ++oi) {
    const int t = rep.origins[oi];
    const bool refit = fit_t < 0 || (t - eval.t0) % eval.refit_stride == 0;
    if (refit) {
      TimeSeriesPanel train = panel;
      train.values = panel.values.topRows(t);
      train.dates.assign(panel.dates.begin(), panel.dates.begin() + t);
      SamplerConfig cfg_t = cfg;
      cfg_t.seed = origin_fit_seed(cfg.seed, t);
      fit_panel = standardize(train);
      chain = run_chain(cfg_t, fit_panel);
      fit_t = t;
      if (oi == 0) rep.pip_first_fit = pip(chain);
    }

    // Lag vector at the current origin, in the fit's standardized units.
    Eigen::VectorXd x_last(chain.k);
    for (int l = 1; l <= chain.lags; ++l) {
      for (int j = 0; j < n; ++j) {
        x_last[(l - 1) * n + j] =
            (panel.values(t - l, j) - chain.scaling[j].center) / chain.scaling[j].scale;
      }
    }

    ChainOutput chain_t = chain;
    if (chain.volatility == Volatility::SV && t > fit_t) {
      // Between refits, advance the terminal volatilities over the gap.
      Rng gap_rng = origin_gap_rng(cfg.seed, t);
      for (auto& d : chain_t.draws) {
        for (int g = 0; g < t - fit_t; ++g) {
          for (int i = 0; i < chain.n + chain.factors; ++i) {
            const auto& p = d.sv[i];
            d.h_last[i] =
                gap_rng.normal(p.mu + p.phi * (d.h_last[i] - p.mu), std::sqrt(p.sigma2));
          }
        }
      }
    }

    const int h_avail = std::min(eval.h_max, T - t);
    Rng fc_rng = origin_forecast_rng(cfg.seed, t);
    ForecastResult fc = simulate_forecast_paths(chain_t, x_last, h_avail, fc_rng);
    rep.skipped_draws += fc.skipped_draws;
    if (fc.num_draws() == 0) {
      throw std::domain_error("expanding_window: all predictive draws invalid at origin " +
                              std::to_string(t));
    }

    for (int h = 1; h <= h_avail; ++h) {
      Eigen::VectorXd y_obs = panel.values.row(t + h - 1).transpose();
      std::vector<Eigen::VectorXd> means_o(fc.means[h - 1].size());
      std::vector<Eigen::MatrixXd> covs_o(fc.covs[h - 1].size());
      Eigen::VectorXd point = Eigen::VectorXd::Zero(n);
      for (std::size_t m = 0; m < means_o.size(); ++m) {
        means_o[m] = destandardize_mean(fc.means[h - 1][m], chain.scaling);
        covs_o[m] = destandardize_cov(fc.covs[h - 1][m], chain.scaling);
        point += means_o[m];
      }
      point /= static_cast<double>(means_o.size());
      rep.joint_lpds[h - 1][oi] = lpds_joint(y_obs, means_o, covs_o);
      for (int j = 0; j < n; ++j) {
        rep.marginal_lpds[h - 1][j][oi] = lpds_marginal(y_obs[j], j, means_o, covs_o);
        rep.point_forecasts[h - 1][j][oi] = point[j];
        rep.actuals[h - 1][j][oi] = y_obs[j];
      }
    }
  }

  if (eval.compute_rmspe) {
    auto bench = load_benchmark_csv(eval.benchmark_csv, panel.names, rep.origins, eval.h_max);
    std::vector<std::vector<double>> ratios(eval.h_max, std::vector<double>(n, kNaN));
    for (int h = 1; h <= eval.h_max; ++h) {
      for (int j = 0; j < n; ++j) {
        std::vector<double> fc_model, fc_bench, actual;
        for (int oi = 0; oi < n_origins; ++oi) {
          const double b = bench.lookup(rep.origins[oi], h, j);
          const double f = rep.point_forecasts[h - 1][j][oi];
          if (std::isnan(b) || std::isnan(f)) continue;
          fc_model.push_back(f);
          fc_bench.push_back(b);
          actual.push_back(rep.actuals[h - 1][j][oi]);
        }
        if (!fc_model.empty()) ratios[h - 1][j] = rmspe_ratio(fc_model, actual, fc_bench);
      }
    }
    rep.rmspe = std::move(ratios);
  }
  return rep;
}

void write_report_csv(const EvaluationReport& rep, const std::string& dir) {
  const int n = static_cast<int>(rep.names.size());
  {
    csv::Table t;
    t.header = {"origin", "horizon", "lpds", "cumulative"};
    for (int h = 1; h <= rep.h_max; ++h) {
      double acc = 0.0;
      for (std::size_t oi = 0; oi < rep.origins.size(); ++oi) {
        const double v = rep.joint_lpds[h - 1][oi];
        if (std::isnan(v)) continue;
        acc += v;
        std::ostringstream v1, v2;
        v1.precision(12);
        v2.precision(12);
        v1 << v;
        v2 << acc;
        t.rows.push_back({std::to_string(rep.origins[oi]), std::to_string(h), v1.str(), v2.str()});
      }
    }
    csv::write_file(dir + "/lpds_joint.csv", t);
  }
  {
    csv::Table t;
    t.header = {"origin", "horizon", "variable", "lpds", "cumulative"};
    for (int h = 1; h <= rep.h_max; ++h) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t oi = 0; oi < rep.origins.size(); ++oi) {
          const double v = rep.marginal_lpds[h - 1][j][oi];
          if (std::isnan(v)) continue;
          acc += v;
          std::ostringstream v1, v2;
          v1.precision(12);
          v2.precision(12);
          v1 << v;
          v2 << acc;
          t.rows.push_back({std::to_string(rep.origins[oi]), std::to_string(h), rep.names[j],
                            v1.str(), v2.str()});
        }
      }
    }
    csv::write_file(dir + "/lpds_marginal.csv", t);
  }
  if (rep.rmspe) {
    csv::Table t;
    t.header = {"horizon", "variable", "rmspe_ratio"};
    for (int h = 1; h <= rep.h_max; ++h) {
      for (int j = 0; j < n; ++j) {
        const double v = (*rep.rmspe)[h - 1][j];
        if (std::isnan(v)) continue;
        std::ostringstream os;
        os.precision(12);
        os << v;
        t.rows.push_back({std::to_string(h), rep.names[j], os.str()});
      }
    }
    csv::write_file(dir + "/rmspe.csv", t);
  }
  if (rep.pip_first_fit.size() > 0) {
    csv::Table t;
    t.header = {"equation", "variable", "lag", "pip"};
    const int k = static_cast<int>(rep.pip_first_fit.cols());
    for (int j = 0; j < n; ++j) {
      for (int q = 0; q < k; ++q) {
        std::ostringstream os;
        os.precision(12);
        os << rep.pip_first_fit(j, q);
        t.rows.push_back({rep.names[j], rep.names[q % n], std::to_string(q / n + 1), os.str()});
      }
    }
    csv::write_file(dir + "/pip.csv", t);
  }
}

void write_report_json(const EvaluationReport& rep, const std::string& path) {
  nlohmann::json j;
  j["names"] = rep.names;
  j["origins"] = rep.origins;
  j["h_max"] = rep.h_max;
  j["refit_stride"] = rep.refit_stride;
  j["skipped_draws"] = rep.skipped_draws;
  j["joint_lpds"] = rep.joint_lpds;
  j["marginal_lpds"] = rep.marginal_lpds;
  j["point_forecasts"] = rep.point_forecasts;
  j["actuals"] = rep.actuals;
  if (rep.rmspe) j["rmspe"] = *rep.rmspe;
  if (rep.pip_first_fit.size() > 0) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < rep.pip_first_fit.rows(); ++i) {
      std::vector<double> r(rep.pip_first_fit.cols());
      for (int c = 0; c < rep.pip_first_fit.cols(); ++c) r[c] = rep.pip_first_fit(i, c);
      rows.push_back(std::move(r));
    }
    j["pip_first_fit"] = rows;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_report_json: cannot open " + path);
  f << j.dump(2);
}

}  // namespace treevar
