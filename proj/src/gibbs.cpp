#include "treevar/gibbs.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace treevar {

using nlohmann::json;

Volatility parse_volatility(const std::string& name) {
  if (name == "sv") return Volatility::SV;
  if (name == "homoskedastic") return Volatility::Homoskedastic;
  throw std::invalid_argument("unknown volatility '" + name + "' (expected sv or homoskedastic)");
}

std::string volatility_name(Volatility v) {
  return v == Volatility::SV ? "sv" : "homoskedastic";
}

void SamplerConfig::validate() const {
  if (!seed_set) throw std::invalid_argument("config: mcmc.seed is required");
  if (num_trees < 1) throw std::invalid_argument("config: trees must be >= 1");
  if (lags < 1) throw std::invalid_argument("config: lags must be >= 1");
  if (n_burn < 0) throw std::invalid_argument("config: burn must be >= 0");
  if (n_save < 1) throw std::invalid_argument("config: save must be >= 1");
  if (thin < 1) throw std::invalid_argument("config: thin must be >= 1");
  if (!(tree_gamma > 0.0 && tree_gamma < 1.0)) {
    throw std::invalid_argument("config: tree gamma must lie in (0,1)");
  }
  if (tree_beta < 0.0) throw std::invalid_argument("config: tree beta must be >= 0");
  if (!(lambda1 > 0.0)) throw std::invalid_argument("config: lambda1 must be > 0");
  if (!(lambda2 > 0.0)) throw std::invalid_argument("config: lambda2 must be > 0");
  if (!(lambda_init > 0.0)) throw std::invalid_argument("config: lambda must be > 0");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
}

ModelState init_state(const DesignPair& design, const TimeSeriesPanel& panel_std,
                      const SamplerConfig& cfg) {
  ModelState st;
  st.design = design;
  const int n = st.n();
  const int T = st.T();
  const int r = cfg.resolved_factors(n);

  Eigen::VectorXd ar_sigma2;
  if (cfg.regime == SplitRegime::Minnesota) {
    ar_sigma2 = ar_residual_variances(panel_std, cfg.lags);
  }

  st.forests.resize(n);
  st.split.reserve(n);
  st.tree_prior.resize(n);
  st.homo_scale.resize(n);
  for (int j = 0; j < n; ++j) {
    st.forests[j].init(cfg.num_trees, T, j);
    st.split.push_back(make_split_prior_state(cfg.regime, j, n, cfg.lags, cfg.lambda1,
                                              cfg.lambda2, cfg.lambda_init, ar_sigma2));
    const double range = design.Y.col(j).maxCoeff() - design.Y.col(j).minCoeff();
    const double sigma_mu = cfg.sigma_mu ? *cfg.sigma_mu : std::max(range, 1e-8) / 4.0;
    st.tree_prior[j] = {cfg.tree_gamma, cfg.tree_beta, sigma_mu * sigma_mu / cfg.num_trees};
    const double var_j =
        (design.Y.col(j).array() - design.Y.col(j).mean()).square().sum() / (T - 1);
    st.homo_scale[j] = 0.5 * var_j;
  }

  Eigen::VectorXd init_log_var(n);
  for (int j = 0; j < n; ++j) {
    const double var_j =
        (design.Y.col(j).array() - design.Y.col(j).mean()).square().sum() / (T - 1);
    init_log_var[j] = std::log(std::max(var_j, 1e-8));
  }
  st.fv.init(n, r, T, cfg.volatility == Volatility::SV, init_log_var);
  return st;
}

namespace {

void refresh_all_caches(ModelState& st) {
  for (auto& forest : st.forests) forest.refresh_cache(st.design.X);
}

}  // namespace

namespace {

void update_equation(ModelState& st, int j, const SamplerConfig& cfg, Rng& rng) {
  auto& forest = st.forests[j];
  auto& split = st.split[j];
  const Eigen::MatrixXd& X = st.design.X;
  const Eigen::VectorXd prec = st.fv.idio_precisions(j);
  const Eigen::RowVectorXd lambda_row =
      st.fv.r() > 0 ? Eigen::RowVectorXd(st.fv.Lambda.row(j)) : Eigen::RowVectorXd();

  for (int m = 0; m < cfg.num_trees; ++m) {
    const Eigen::VectorXd fit_old = forest.trees[m].evaluate(X);
    Eigen::VectorXd R = st.design.Y.col(j) - forest.fit_cache + fit_old;
    if (st.fv.r() > 0) R -= st.fv.F * lambda_row.transpose();
    mh_step_tree(forest, m, R, prec, st.tree_prior[j], split.s, cfg.moves, X, rng);
    forest.fit_cache += forest.trees[m].evaluate(X) - fit_old;
  }
  if (cfg.cache_refresh_every > 0 && st.sweep % cfg.cache_refresh_every == 0) {
    forest.refresh_cache(X);
  }

  split.counts = count_splits(forest, st.k());
  split.s = update_split_probs(split.phi, split.counts, rng);
  if (split.regime == SplitRegime::Sparse && cfg.update_lambda_hyper) {
    split.lambda = update_lambda(split.s, st.k(), rng);
    split.phi = sparse_scales(st.k(), split.lambda);
  }
}

void update_covariance_block(ModelState& st, const SamplerConfig& cfg, Rng& rng) {
  const int n = st.n();
  const int T = st.T();
  const int r = st.fv.r();

  // Residuals net of the tree fits.
  Eigen::MatrixXd resid(T, n);
  for (int j = 0; j < n; ++j) resid.col(j) = st.design.Y.col(j) - st.forests[j].fit_cache;

  if (r > 0) {
    for (int i = 0; i < n; ++i) {
      st.fv.Lambda.row(i) = sample_loadings_row(resid.col(i), st.fv.F, st.fv.h.row(i).transpose(),
                                                st.fv.hs.row_prior_variances(i), rng);
    }
    for (int jcol = 0; jcol < r; ++jcol) sample_horseshoe_column(jcol, st.fv.Lambda, st.fv.hs, rng);
    for (int t = 0; t < T; ++t) {
      const Eigen::VectorXd omega = st.fv.h.col(t).head(n).array().exp();
      const Eigen::VectorXd hfac = st.fv.h.col(t).tail(r).array().exp();
      st.fv.F.row(t) = sample_factors_t(st.fv.Lambda, omega, hfac, resid.row(t).transpose(), rng);
    }
  }

  if (cfg.volatility == Volatility::SV) {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd shocks = resid.col(i);
      if (r > 0) shocks -= st.fv.F * st.fv.Lambda.row(i).transpose();
      st.fv.h.row(i) =
          sample_sv_path(shocks, st.fv.h.row(i).transpose(), st.fv.sv[i], rng).transpose();
      st.fv.sv[i] = sample_sv_hyper(st.fv.h.row(i).transpose(), st.fv.sv[i], cfg.sv_priors, rng);
    }
    for (int jf = 0; jf < r; ++jf) {
      const int row = n + jf;
      st.fv.h.row(row) =
          sample_sv_path(st.fv.F.col(jf), st.fv.h.row(row).transpose(), st.fv.sv[row], rng)
              .transpose();
      st.fv.sv[row] =
          sample_sv_hyper(st.fv.h.row(row).transpose(), st.fv.sv[row], cfg.sv_priors, rng);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd shocks = resid.col(i);
      if (r > 0) shocks -= st.fv.F * st.fv.Lambda.row(i).transpose();
      const double s2 = sample_sigma2_homoskedastic(shocks, cfg.homo_shape, st.homo_scale[i], rng);
      st.fv.h.row(i).setConstant(std::log(s2));
      st.fv.sv[i].mu = std::log(s2);
      st.fv.sv[i].phi = 0.0;
      st.fv.sv[i].sigma2 = 0.0;
    }
    // Factor rows stay at h = 0 (unit variance normalization).
  }
}

}  // namespace

void gibbs_sweep(ModelState& state, const SamplerConfig& cfg, Rng& rng) {
  const int n = state.n();
  if (cfg.threads <= 1 || n == 1) {
    for (int j = 0; j < n; ++j) update_equation(state, j, cfg, rng);
  } else {
    // Equations are conditionally independent given (F, Lambda, h); each gets
    // a stream keyed by (sweep, equation) so results do not depend on
    // scheduling.
    std::vector<Rng> streams;
    streams.reserve(n);
    for (int j = 0; j < n; ++j) {
      streams.push_back(rng.substream(static_cast<std::uint64_t>(state.sweep) + 1, j + 1));
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int workers = std::min(cfg.threads, n);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const int j = next.fetch_add(1);
          if (j >= n) break;
          update_equation(state, j, cfg, streams[j]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  update_covariance_block(state, cfg, rng);
  ++state.sweep;
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json veci_to_json(const Eigen::VectorXi& v) {
  return json(std::vector<int>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const json& j) {
  auto v = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXi veci_from_json(const json& j) {
  auto v = j.get<std::vector<int>>();
  return Eigen::Map<Eigen::VectorXi>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (int c = 0; c < m.cols(); ++c) r[c] = m(i, c);
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json draw_to_json(const DrawRecord& d) {
  json jf = json::array();
  for (const auto& forest : d.forests) {
    json trees = json::array();
    for (const auto& t : forest) trees.push_back(t.to_json());
    jf.push_back(std::move(trees));
  }
  json jsv = json::array();
  for (const auto& p : d.sv) jsv.push_back({{"mu", p.mu}, {"phi", p.phi}, {"sigma2", p.sigma2}});
  json js = json::array();
  for (const auto& s : d.s) js.push_back(vec_to_json(s));
  json jc = json::array();
  for (const auto& c : d.counts) jc.push_back(veci_to_json(c));
  return {{"forests", std::move(jf)}, {"lambda_mat", mat_to_json(d.Lambda)},
          {"sv", std::move(jsv)},     {"h_last", vec_to_json(d.h_last)},
          {"s", std::move(js)},       {"lambda", d.lambda},
          {"counts", std::move(jc)}};
}

DrawRecord draw_from_json(const json& j) {
  DrawRecord d;
  for (const auto& forest : j.at("forests")) {
    std::vector<RegressionTree> trees;
    for (const auto& t : forest) trees.push_back(RegressionTree::from_json(t));
    d.forests.push_back(std::move(trees));
  }
  d.Lambda = mat_from_json(j.at("lambda_mat"));
  for (const auto& p : j.at("sv")) {
    d.sv.push_back({p.at("mu").get<double>(), p.at("phi").get<double>(),
                    p.at("sigma2").get<double>()});
  }
  d.h_last = vec_from_json(j.at("h_last"));
  for (const auto& s : j.at("s")) d.s.push_back(vec_from_json(s));
  d.lambda = j.at("lambda").get<std::vector<double>>();
  for (const auto& c : j.at("counts")) d.counts.push_back(veci_from_json(c));
  return d;
}

DrawRecord record_draw(const ModelState& st) {
  DrawRecord d;
  const int n = st.n();
  d.forests.reserve(n);
  for (int j = 0; j < n; ++j) d.forests.push_back(st.forests[j].trees);
  d.Lambda = st.fv.Lambda;
  d.sv = st.fv.sv;
  d.h_last = st.fv.h.col(st.T() - 1);
  for (int j = 0; j < n; ++j) {
    d.s.push_back(st.split[j].s);
    d.lambda.push_back(st.split[j].lambda);
    d.counts.push_back(st.split[j].counts);
  }
  return d;
}

json state_to_json(const ModelState& st) {
  json jf = json::array();
  for (const auto& forest : st.forests) {
    json trees = json::array();
    for (const auto& t : forest.trees) trees.push_back(t.to_json());
    jf.push_back(std::move(trees));
  }
  json jsplit = json::array();
  for (const auto& sp : st.split) {
    jsplit.push_back({{"regime", regime_name(sp.regime)},
                      {"s", vec_to_json(sp.s)},
                      {"phi", vec_to_json(sp.phi)},
                      {"lambda", sp.lambda},
                      {"lambda1", sp.lambda1},
                      {"lambda2", sp.lambda2},
                      {"counts", veci_to_json(sp.counts)}});
  }
  json jtp = json::array();
  for (const auto& tp : st.tree_prior) {
    jtp.push_back({{"gamma", tp.gamma}, {"beta", tp.beta}, {"tau2", tp.tau2}});
  }
  json jsv = json::array();
  for (const auto& p : st.fv.sv) jsv.push_back({{"mu", p.mu}, {"phi", p.phi}, {"sigma2", p.sigma2}});
  return {{"sweep", st.sweep},
          {"forests", std::move(jf)},
          {"split", std::move(jsplit)},
          {"tree_prior", std::move(jtp)},
          {"fv",
           {{"Lambda", mat_to_json(st.fv.Lambda)},
            {"F", mat_to_json(st.fv.F)},
            {"h", mat_to_json(st.fv.h)},
            {"sv", std::move(jsv)},
            {"sv_enabled", st.fv.sv_enabled},
            {"hs",
             {{"lambda2", mat_to_json(st.fv.hs.lambda2)},
              {"nu", mat_to_json(st.fv.hs.nu)},
              {"tau2", vec_to_json(st.fv.hs.tau2)},
              {"xi", vec_to_json(st.fv.hs.xi)}}}}},
          {"homo_scale", vec_to_json(st.homo_scale)}};
}

void state_from_json(const json& j, ModelState& st) {
  st.sweep = j.at("sweep").get<long>();
  const auto& jf = j.at("forests");
  for (std::size_t eq = 0; eq < jf.size(); ++eq) {
    auto& forest = st.forests[eq];
    forest.trees.clear();
    for (const auto& t : jf[eq]) forest.trees.push_back(RegressionTree::from_json(t));
    forest.refresh_cache(st.design.X);
  }
  const auto& jsplit = j.at("split");
  for (std::size_t eq = 0; eq < jsplit.size(); ++eq) {
    auto& sp = st.split[eq];
    sp.regime = parse_regime(jsplit[eq].at("regime").get<std::string>());
    sp.s = vec_from_json(jsplit[eq].at("s"));
    sp.phi = vec_from_json(jsplit[eq].at("phi"));
    sp.lambda = jsplit[eq].at("lambda").get<double>();
    sp.lambda1 = jsplit[eq].at("lambda1").get<double>();
    sp.lambda2 = jsplit[eq].at("lambda2").get<double>();
    sp.counts = veci_from_json(jsplit[eq].at("counts"));
  }
  const auto& jtp = j.at("tree_prior");
  for (std::size_t eq = 0; eq < jtp.size(); ++eq) {
    st.tree_prior[eq] = {jtp[eq].at("gamma").get<double>(), jtp[eq].at("beta").get<double>(),
                         jtp[eq].at("tau2").get<double>()};
  }
  const auto& jfv = j.at("fv");
  st.fv.Lambda = mat_from_json(jfv.at("Lambda"));
  st.fv.F = mat_from_json(jfv.at("F"));
  st.fv.h = mat_from_json(jfv.at("h"));
  st.fv.sv.clear();
  for (const auto& p : jfv.at("sv")) {
    st.fv.sv.push_back({p.at("mu").get<double>(), p.at("phi").get<double>(),
                        p.at("sigma2").get<double>()});
  }
  st.fv.sv_enabled = jfv.at("sv_enabled").get<bool>();
  st.fv.hs.lambda2 = mat_from_json(jfv.at("hs").at("lambda2"));
  st.fv.hs.nu = mat_from_json(jfv.at("hs").at("nu"));
  st.fv.hs.tau2 = vec_from_json(jfv.at("hs").at("tau2"));
  st.fv.hs.xi = vec_from_json(jfv.at("hs").at("xi"));
  st.homo_scale = vec_from_json(j.at("homo_scale"));
}

constexpr int kCheckpointSchema = 1;

void write_checkpoint(const std::string& path, const ModelState& st, const Rng& rng,
                      const std::vector<DrawRecord>& draws) {
  json j = {{"schema", kCheckpointSchema},
            {"rng_state", rng.save_state()},
            {"state", state_to_json(st)}};
  json jd = json::array();
  for (const auto& d : draws) jd.push_back(draw_to_json(d));
  j["draws"] = std::move(jd);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  f << j.dump();
  f.flush();
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

}  // namespace

ChainOutput run_chain(const SamplerConfig& cfg, const TimeSeriesPanel& panel,
                      const std::string& resume_from) {
  cfg.validate();
  TimeSeriesPanel panel_std = panel.scaling ? panel : standardize(panel);
  DesignPair design = build_design(panel_std, cfg.lags);

  ModelState st = init_state(design, panel_std, cfg);
  Rng rng(cfg.seed);
  std::vector<DrawRecord> draws;

  if (!resume_from.empty()) {
    std::ifstream f(resume_from);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + resume_from);
    json j = json::parse(f);
    if (j.at("schema").get<int>() != kCheckpointSchema) {
      throw std::runtime_error("checkpoint: unsupported schema version");
    }
    state_from_json(j.at("state"), st);
    rng.restore_state(j.at("rng_state").get<std::string>());
    for (const auto& d : j.at("draws")) draws.push_back(draw_from_json(d));
  }

  const long total = static_cast<long>(cfg.n_burn) + static_cast<long>(cfg.n_save) * cfg.thin;
  while (st.sweep < total) {
    gibbs_sweep(st, cfg, rng);
    if (st.sweep > cfg.n_burn && (st.sweep - cfg.n_burn) % cfg.thin == 0) {
      draws.push_back(record_draw(st));
    }
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
        st.sweep % cfg.checkpoint_every == 0 && st.sweep < total) {
      // Caches are recomputed on both sides of a checkpoint so a resumed run
      // continues bit-identically.
      refresh_all_caches(st);
      write_checkpoint(cfg.checkpoint_path, st, rng, draws);
    }
  }

  ChainOutput out;
  out.draws = std::move(draws);
  out.names = panel_std.names;
  out.scaling = panel_std.scaling ? *panel_std.scaling
                                  : std::vector<TimeSeriesPanel::Scaling>(panel_std.cols());
  out.n = st.n();
  out.k = st.k();
  out.lags = cfg.lags;
  out.num_trees = cfg.num_trees;
  out.factors = st.fv.r();
  out.regime = cfg.regime;
  out.volatility = cfg.volatility;
  out.seed = cfg.seed;
  const int T_full = static_cast<int>(panel_std.rows());
  out.last_lags.resize(out.k);
  for (int l = 1; l <= cfg.lags; ++l) {
    out.last_lags.segment((l - 1) * out.n, out.n) = panel_std.values.row(T_full - l);
  }
  for (int j = 0; j < st.n(); ++j) out.final_phi.push_back(st.split[j].phi);
  out.final_h = st.fv.h;
  return out;
}

nlohmann::json chain_to_json(const ChainOutput& chain) {
  json jd = json::array();
  for (const auto& d : chain.draws) jd.push_back(draw_to_json(d));
  json jsc = json::array();
  for (const auto& s : chain.scaling) jsc.push_back({{"center", s.center}, {"scale", s.scale}});
  return {{"schema", 1},
          {"names", chain.names},
          {"scaling", std::move(jsc)},
          {"n", chain.n},
          {"k", chain.k},
          {"lags", chain.lags},
          {"num_trees", chain.num_trees},
          {"factors", chain.factors},
          {"regime", regime_name(chain.regime)},
          {"volatility", volatility_name(chain.volatility)},
          {"seed", chain.seed},
          {"last_lags", vec_to_json(chain.last_lags)},
          {"final_phi", [&] {
             json arr = json::array();
             for (const auto& p : chain.final_phi) arr.push_back(vec_to_json(p));
             return arr;
           }()},
          {"final_h", mat_to_json(chain.final_h)},
          {"draws", std::move(jd)}};
}

ChainOutput chain_from_json(const nlohmann::json& j) {
  ChainOutput c;
  c.names = j.at("names").get<std::vector<std::string>>();
  for (const auto& s : j.at("scaling")) {
    c.scaling.push_back({s.at("center").get<double>(), s.at("scale").get<double>()});
  }
  c.n = j.at("n").get<int>();
  c.k = j.at("k").get<int>();
  c.lags = j.at("lags").get<int>();
  c.num_trees = j.at("num_trees").get<int>();
  c.factors = j.at("factors").get<int>();
  c.regime = parse_regime(j.at("regime").get<std::string>());
  c.volatility = parse_volatility(j.at("volatility").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.last_lags = vec_from_json(j.at("last_lags"));
  for (const auto& p : j.at("final_phi")) c.final_phi.push_back(vec_from_json(p));
  c.final_h = mat_from_json(j.at("final_h"));
  for (const auto& d : j.at("draws")) c.draws.push_back(draw_from_json(d));
  return c;
}

void save_chain(const ChainOutput& chain, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_chain: cannot open " + path);
  f << chain_to_json(chain).dump();
  f.flush();
  if (!f) throw std::runtime_error("save_chain: write failed for " + path);
}

ChainOutput load_chain(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_chain: cannot open " + path);
  return chain_from_json(json::parse(f));
}

}  // namespace treevar
