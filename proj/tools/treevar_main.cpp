#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "treevar/config.hpp"
#include "treevar/csv.hpp"
#include "treevar/forecast.hpp"
#include "treevar/gibbs.hpp"
#include "treevar/panel.hpp"
#include "treevar/split_prior.hpp"

namespace fs = std::filesystem;
using namespace treevar;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

RunConfig load_run_config(const std::string& config_path, const std::string& manifest_path) {
  if (!manifest_path.empty()) return config_from_manifest(manifest_path);
  if (config_path.empty()) throw ConfigError("either --config or --from-manifest is required");
  return parse_config(config_path);
}

TimeSeriesPanel load_transformed_panel(const RunConfig& rc) {
  if (rc.data_csv.empty()) throw ConfigError("config: data.csv is required for this command");
  TimeSeriesPanel raw = load_panel_csv(rc.data_csv);
  std::vector<int> codes = rc.transforms;
  if (codes.empty()) codes.assign(raw.cols(), 1);
  if (static_cast<int>(codes.size()) != raw.cols()) {
    throw ConfigError("config: data.transforms has " + std::to_string(codes.size()) +
                      " codes for " + std::to_string(raw.cols()) + " variables");
  }
  return transform_panel(raw, codes);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void write_phi_csv(const ChainOutput& chain, const std::string& path) {
  csv::Table t;
  t.header = {"equation", "variable", "lag", "phi"};
  for (int j = 0; j < chain.n; ++j) {
    for (int q = 0; q < chain.k; ++q) {
      t.rows.push_back({chain.names[j], chain.names[q % chain.n],
                        std::to_string(q / chain.n + 1), fmt_double(chain.final_phi[j][q])});
    }
  }
  csv::write_file(path, t);
}

void write_volatility_csv(const ChainOutput& chain, const std::string& path) {
  csv::Table t;
  t.header = {"series", "time", "log_variance"};
  const int T = static_cast<int>(chain.final_h.cols());
  for (int i = 0; i < chain.final_h.rows(); ++i) {
    const std::string label =
        i < chain.n ? chain.names[i] : "factor_" + std::to_string(i - chain.n + 1);
    for (int time = 0; time < T; ++time) {
      t.rows.push_back({label, std::to_string(time), fmt_double(chain.final_h(i, time))});
    }
  }
  csv::write_file(path, t);
}

void write_pip_csv(const ChainOutput& chain, const std::string& path) {
  const Eigen::MatrixXd p = pip(chain);
  csv::Table t;
  t.header = {"equation", "variable", "lag", "pip"};
  for (int j = 0; j < chain.n; ++j) {
    for (int q = 0; q < chain.k; ++q) {
      t.rows.push_back({chain.names[j], chain.names[q % chain.n],
                        std::to_string(q / chain.n + 1), fmt_double(p(j, q))});
    }
  }
  csv::write_file(path, t);
}

int cmd_transform(const std::string& config_path, const std::string& manifest_path,
                  const std::string& out_dir) {
  Timer timer;
  RunConfig rc = load_run_config(config_path, manifest_path);
  TimeSeriesPanel panel = load_transformed_panel(rc);
  fs::create_directories(out_dir);
  const std::string out_csv = out_dir + "/transformed_panel.csv";
  write_panel_csv(panel, out_csv);
  write_manifest(out_dir + "/manifest.json", "transform", rc.resolved, {rc.data_csv}, {out_csv},
                 timer.ms());
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_fit(const std::string& config_path, const std::string& manifest_path,
            const std::string& out_dir, const std::string& resume) {
  Timer timer;
  RunConfig rc = load_run_config(config_path, manifest_path);
  TimeSeriesPanel panel = load_transformed_panel(rc);
  fs::create_directories(out_dir);
  SamplerConfig cfg = rc.sampler;
  if (cfg.checkpoint_every > 0 && cfg.checkpoint_path.empty()) {
    cfg.checkpoint_path = out_dir + "/checkpoint.json";
  }
  ChainOutput chain;
  try {
    chain = run_chain(cfg, panel, resume);
  } catch (const std::exception& e) {
    // Record what exists before propagating, so an aborted run still leaves
    // an inspectable manifest.
    std::vector<std::string> partial;
    if (fs::exists(cfg.checkpoint_path)) partial.push_back(cfg.checkpoint_path);
    auto resolved = rc.resolved;
    resolved["error"] = e.what();
    write_manifest(out_dir + "/manifest.json", "fit (aborted)", resolved, {rc.data_csv}, partial,
                   timer.ms());
    throw;
  }
  const std::string chain_path = out_dir + "/chain.json";
  save_chain(chain, chain_path);
  write_phi_csv(chain, out_dir + "/split_scales.csv");
  write_volatility_csv(chain, out_dir + "/volatility.csv");
  std::vector<std::string> outputs = {chain_path, out_dir + "/split_scales.csv",
                                      out_dir + "/volatility.csv"};
  write_manifest(out_dir + "/manifest.json", "fit", rc.resolved, {rc.data_csv}, outputs,
                 timer.ms());
  std::cout << "wrote " << chain_path << " (" << chain.draws.size() << " draws)\n";
  return 0;
}

int cmd_forecast(const std::string& config_path, const std::string& manifest_path,
                 const std::string& chain_path, int horizons, const std::string& out_dir) {
  Timer timer;
  RunConfig rc = load_run_config(config_path, manifest_path);
  if (horizons <= 0) horizons = rc.forecast_horizons;
  ChainOutput chain = load_chain(chain_path);
  Rng rng = Rng(chain.seed).substream(202, 1);
  ForecastResult fc = simulate_forecast_paths(chain, chain.last_lags, horizons, rng);
  if (fc.num_draws() == 0) throw NumericalError("forecast: all predictive draws invalid");

  fs::create_directories(out_dir);
  csv::Table t;
  t.header = {"horizon", "variable", "mean", "sd", "q05", "q50", "q95"};
  for (int h = 1; h <= horizons; ++h) {
    const auto& means = fc.means[h - 1];
    const auto& paths = fc.paths[h - 1];
    const int m = static_cast<int>(means.size());
    for (int j = 0; j < chain.n; ++j) {
      const auto& sc = chain.scaling[j];
      double mean = 0.0;
      std::vector<double> ys(m);
      for (int d = 0; d < m; ++d) {
        mean += sc.center + sc.scale * means[d][j];
        ys[d] = sc.center + sc.scale * paths[d][j];
      }
      mean /= m;
      double var = 0.0;
      for (double y : ys) var += (y - mean) * (y - mean);
      var /= std::max(m - 1, 1);
      std::sort(ys.begin(), ys.end());
      auto quant = [&](double p) { return ys[static_cast<int>(p * (m - 1))]; };
      t.rows.push_back({std::to_string(h), chain.names[j], fmt_double(mean),
                        fmt_double(std::sqrt(var)), fmt_double(quant(0.05)),
                        fmt_double(quant(0.50)), fmt_double(quant(0.95))});
    }
  }
  const std::string out_csv = out_dir + "/forecast.csv";
  csv::write_file(out_csv, t);
  write_manifest(out_dir + "/manifest.json", "forecast", rc.resolved, {chain_path}, {out_csv},
                 timer.ms());
  std::cout << "wrote " << out_csv;
  if (fc.skipped_draws > 0) std::cout << " (skipped " << fc.skipped_draws << " invalid draws)";
  std::cout << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& manifest_path,
                 const std::string& out_dir) {
  Timer timer;
  RunConfig rc = load_run_config(config_path, manifest_path);
  TimeSeriesPanel panel = load_transformed_panel(rc);
  if (rc.eval.t0 <= 0) throw ConfigError("config: eval.t0 is required for evaluate");
  fs::create_directories(out_dir);
  EvaluationReport rep = expanding_window(rc.sampler, rc.eval, panel);
  write_report_csv(rep, out_dir);
  write_report_json(rep, out_dir + "/report.json");
  std::vector<std::string> inputs = {rc.data_csv};
  if (!rc.eval.benchmark_csv.empty()) inputs.push_back(rc.eval.benchmark_csv);
  std::vector<std::string> outputs = {out_dir + "/lpds_joint.csv", out_dir + "/lpds_marginal.csv",
                                      out_dir + "/pip.csv", out_dir + "/report.json"};
  if (rep.rmspe) outputs.push_back(out_dir + "/rmspe.csv");
  write_manifest(out_dir + "/manifest.json", "evaluate", rc.resolved, inputs, outputs, timer.ms());
  std::cout << "wrote " << out_dir << "/report.json over " << rep.origins.size() << " origins\n";
  return 0;
}

int cmd_pip(const std::string& chain_path, const std::string& out_dir) {
  Timer timer;
  ChainOutput chain = load_chain(chain_path);
  fs::create_directories(out_dir);
  const std::string out_csv = out_dir + "/pip.csv";
  write_pip_csv(chain, out_csv);
  write_manifest(out_dir + "/manifest.json", "pip", {}, {chain_path}, {out_csv}, timer.ms());
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

int cmd_prior_draws(const std::string& alpha_str, int draws, std::uint64_t seed, bool seed_set,
                    const std::string& out_dir) {
  Timer timer;
  if (!seed_set) throw ConfigError("prior-draws: --seed is required");
  std::vector<double> alpha;
  std::istringstream is(alpha_str);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      alpha.push_back(std::stod(tok));
    } catch (...) {
      throw ConfigError("prior-draws: bad alpha entry '" + tok + "'");
    }
  }
  if (alpha.empty()) throw ConfigError("prior-draws: --alpha is required");
  for (double a : alpha) {
    if (!(a > 0.0)) throw ConfigError("prior-draws: alpha entries must be positive");
  }
  Eigen::VectorXd av = Eigen::Map<Eigen::VectorXd>(alpha.data(), alpha.size());
  Rng rng(seed);
  Eigen::MatrixXd samples = dirichlet_draws(av, draws, rng);

  fs::create_directories(out_dir);
  csv::Table t;
  for (int j = 0; j < av.size(); ++j) t.header.push_back("s" + std::to_string(j + 1));
  for (int i = 0; i < samples.rows(); ++i) {
    std::vector<std::string> row;
    for (int j = 0; j < samples.cols(); ++j) row.push_back(fmt_double(samples(i, j)));
    t.rows.push_back(std::move(row));
  }
  const std::string out_csv = out_dir + "/dirichlet_draws.csv";
  csv::write_file(out_csv, t);
  std::map<std::string, std::string> resolved = {{"alpha", alpha_str},
                                                 {"draws", std::to_string(draws)},
                                                 {"seed", std::to_string(seed)}};
  write_manifest(out_dir + "/manifest.json", "prior-draws", resolved, {}, {out_csv}, timer.ms());
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric tree-ensemble VAR with structured split priors and factor "
               "stochastic volatility"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, out_dir = "out", chain_path, resume, alpha_str;
  int horizons = 0, draws = 5000;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto* transform = app.add_subcommand("transform", "Apply stationarity transforms, write the panel");
  transform->add_option("--config", config_path, "configuration file");
  transform->add_option("--from-manifest", manifest_path, "rebuild configuration from a manifest");
  transform->add_option("--output-dir", out_dir, "output directory");

  auto* fit = app.add_subcommand("fit", "Run the posterior sampler");
  fit->add_option("--config", config_path, "configuration file");
  fit->add_option("--from-manifest", manifest_path, "rebuild configuration from a manifest");
  fit->add_option("--output-dir", out_dir, "output directory");
  fit->add_option("--resume", resume, "checkpoint file to resume from");

  auto* forecast = app.add_subcommand("forecast", "Simulate predictive paths from a saved chain");
  forecast->add_option("--config", config_path, "configuration file");
  forecast->add_option("--from-manifest", manifest_path, "rebuild configuration from a manifest");
  forecast->add_option("--chain", chain_path, "chain file from fit")->required();
  forecast->add_option("--horizons", horizons, "forecast horizons (default from config)");
  forecast->add_option("--output-dir", out_dir, "output directory");

  auto* evaluate = app.add_subcommand("evaluate", "Expanding-window forecast evaluation");
  evaluate->add_option("--config", config_path, "configuration file");
  evaluate->add_option("--from-manifest", manifest_path, "rebuild configuration from a manifest");
  evaluate->add_option("--output-dir", out_dir, "output directory");

  auto* pip_cmd = app.add_subcommand("pip", "Posterior inclusion probabilities from a chain");
  pip_cmd->add_option("--chain", chain_path, "chain file from fit")->required();
  pip_cmd->add_option("--output-dir", out_dir, "output directory");

  auto* prior = app.add_subcommand("prior-draws", "Sample a Dirichlet prior on the simplex");
  prior->add_option("--alpha", alpha_str, "comma-separated concentration parameters")->required();
  prior->add_option("--draws", draws, "number of draws");
  auto* seed_opt = prior->add_option("--seed", seed, "rng seed");
  prior->add_option("--output-dir", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    if (transform->parsed()) return cmd_transform(config_path, manifest_path, out_dir);
    if (fit->parsed()) return cmd_fit(config_path, manifest_path, out_dir, resume);
    if (forecast->parsed())
      return cmd_forecast(config_path, manifest_path, chain_path, horizons, out_dir);
    if (evaluate->parsed()) return cmd_evaluate(config_path, manifest_path, out_dir);
    if (pip_cmd->parsed()) return cmd_pip(chain_path, out_dir);
    if (prior->parsed()) return cmd_prior_draws(alpha_str, draws, seed, seed_set, out_dir);
  } catch (const ConfigError& e) {
    nlohmann::json err = {{"error", e.what()}, {"kind", "config"}, {"exit_code", 2}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    nlohmann::json err = {{"error", e.what()}, {"kind", "config"}, {"exit_code", 2}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}, {"kind", "numerical"}, {"exit_code", 3}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
  return 0;
}
