#include "treevar/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace treevar {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + v + "'");
  }
}

long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' has non-integer value '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' has non-boolean value '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: " + origin + ":" + std::to_string(line_no) +
                        " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (kv.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
    kv[key] = value;
  }

  RunConfig rc;
  auto& cfg = rc.sampler;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"data.csv", [&](const std::string&, const std::string& v) { rc.data_csv = v; }},
      {"data.transforms",
       [&](const std::string& key, const std::string& v) {
         rc.transforms.clear();
         std::istringstream ts(v);
         std::string tok;
         while (std::getline(ts, tok, ',')) {
           const long code = parse_int(key, trim(tok));
           if (code < 1 || code > 4) throw ConfigError("config: transform codes must be 1..4");
           rc.transforms.push_back(static_cast<int>(code));
         }
       }},
      {"model.lags",
       [&](const std::string& key, const std::string& v) { cfg.lags = static_cast<int>(parse_int(key, v)); }},
      {"model.trees",
       [&](const std::string& key, const std::string& v) { cfg.num_trees = static_cast<int>(parse_int(key, v)); }},
      {"model.factors",
       [&](const std::string& key, const std::string& v) { cfg.factors = static_cast<int>(parse_int(key, v)); }},
      {"model.regime",
       [&](const std::string&, const std::string& v) {
         try {
           cfg.regime = parse_regime(v);
         } catch (const std::exception& e) {
           throw ConfigError(std::string("config: ") + e.what());
         }
       }},
      {"model.lambda1",
       [&](const std::string& key, const std::string& v) { cfg.lambda1 = parse_double(key, v); }},
      {"model.lambda2",
       [&](const std::string& key, const std::string& v) { cfg.lambda2 = parse_double(key, v); }},
      {"model.lambda",
       [&](const std::string& key, const std::string& v) { cfg.lambda_init = parse_double(key, v); }},
      {"model.update_lambda",
       [&](const std::string& key, const std::string& v) { cfg.update_lambda_hyper = parse_bool(key, v); }},
      {"model.volatility",
       [&](const std::string&, const std::string& v) {
         try {
           cfg.volatility = parse_volatility(v);
         } catch (const std::exception& e) {
           throw ConfigError(std::string("config: ") + e.what());
         }
       }},
      {"tree.gamma",
       [&](const std::string& key, const std::string& v) { cfg.tree_gamma = parse_double(key, v); }},
      {"tree.beta",
       [&](const std::string& key, const std::string& v) { cfg.tree_beta = parse_double(key, v); }},
      {"tree.sigma_mu",
       [&](const std::string& key, const std::string& v) { cfg.sigma_mu = parse_double(key, v); }},
      {"tree.grow",
       [&](const std::string& key, const std::string& v) { cfg.moves.grow = parse_double(key, v); }},
      {"tree.prune",
       [&](const std::string& key, const std::string& v) { cfg.moves.prune = parse_double(key, v); }},
      {"tree.change",
       [&](const std::string& key, const std::string& v) { cfg.moves.change = parse_double(key, v); }},
      {"sv.mu_mean",
       [&](const std::string& key, const std::string& v) { cfg.sv_priors.mu_mean = parse_double(key, v); }},
      {"sv.mu_var",
       [&](const std::string& key, const std::string& v) { cfg.sv_priors.mu_var = parse_double(key, v); }},
      {"sv.phi_a",
       [&](const std::string& key, const std::string& v) { cfg.sv_priors.phi_a = parse_double(key, v); }},
      {"sv.phi_b",
       [&](const std::string& key, const std::string& v) { cfg.sv_priors.phi_b = parse_double(key, v); }},
      {"sv.sigma2_shape",
       [&](const std::string& key, const std::string& v) { cfg.sv_priors.sigma2_shape = parse_double(key, v); }},
      {"sv.sigma2_rate",
       [&](const std::string& key, const std::string& v) { cfg.sv_priors.sigma2_rate = parse_double(key, v); }},
      {"mcmc.burn",
       [&](const std::string& key, const std::string& v) { cfg.n_burn = static_cast<int>(parse_int(key, v)); }},
      {"mcmc.save",
       [&](const std::string& key, const std::string& v) { cfg.n_save = static_cast<int>(parse_int(key, v)); }},
      {"mcmc.thin",
       [&](const std::string& key, const std::string& v) { cfg.thin = static_cast<int>(parse_int(key, v)); }},
      {"mcmc.seed",
       [&](const std::string& key, const std::string& v) {
         cfg.seed = static_cast<std::uint64_t>(parse_int(key, v));
         cfg.seed_set = true;
       }},
      {"mcmc.threads",
       [&](const std::string& key, const std::string& v) { cfg.threads = static_cast<int>(parse_int(key, v)); }},
      {"mcmc.checkpoint_every",
       [&](const std::string& key, const std::string& v) { cfg.checkpoint_every = static_cast<int>(parse_int(key, v)); }},
      {"eval.t0",
       [&](const std::string& key, const std::string& v) { rc.eval.t0 = static_cast<int>(parse_int(key, v)); }},
      {"eval.h_max",
       [&](const std::string& key, const std::string& v) { rc.eval.h_max = static_cast<int>(parse_int(key, v)); }},
      {"eval.stride",
       [&](const std::string& key, const std::string& v) { rc.eval.refit_stride = static_cast<int>(parse_int(key, v)); }},
      {"eval.benchmark",
       [&](const std::string&, const std::string& v) {
         rc.eval.benchmark_csv = v;
         rc.eval.compute_rmspe = true;
       }},
      {"eval.rmspe",
       [&](const std::string& key, const std::string& v) { rc.eval.compute_rmspe = parse_bool(key, v); }},
      {"forecast.horizons",
       [&](const std::string& key, const std::string& v) { rc.forecast_horizons = static_cast<int>(parse_int(key, v)); }},
  };

  for (const auto& [key, value] : kv) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second(key, value);
  }

  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (rc.eval.h_max < 1) throw ConfigError("config: eval.h_max must be >= 1");
  if (rc.eval.refit_stride < 1) throw ConfigError("config: eval.stride must be >= 1");
  if (rc.forecast_horizons < 1) throw ConfigError("config: forecast.horizons must be >= 1");
  if (rc.eval.compute_rmspe && rc.eval.benchmark_csv.empty()) {
    throw ConfigError("config: eval.rmspe requested but eval.benchmark not given");
  }

  // Record the full effective configuration, defaults included.
  auto& res = rc.resolved;
  res["data.csv"] = rc.data_csv;
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < rc.transforms.size(); ++i) {
      if (i) os << ',';
      os << rc.transforms[i];
    }
    res["data.transforms"] = os.str();
  }
  res["model.lags"] = std::to_string(cfg.lags);
  res["model.trees"] = std::to_string(cfg.num_trees);
  res["model.factors"] = std::to_string(cfg.factors);
  res["model.regime"] = regime_name(cfg.regime);
  res["model.lambda1"] = fmt(cfg.lambda1);
  res["model.lambda2"] = fmt(cfg.lambda2);
  res["model.lambda"] = fmt(cfg.lambda_init);
  res["model.update_lambda"] = cfg.update_lambda_hyper ? "true" : "false";
  res["model.volatility"] = volatility_name(cfg.volatility);
  res["tree.gamma"] = fmt(cfg.tree_gamma);
  res["tree.beta"] = fmt(cfg.tree_beta);
  if (cfg.sigma_mu) res["tree.sigma_mu"] = fmt(*cfg.sigma_mu);
  res["tree.grow"] = fmt(cfg.moves.grow);
  res["tree.prune"] = fmt(cfg.moves.prune);
  res["tree.change"] = fmt(cfg.moves.change);
  res["sv.mu_mean"] = fmt(cfg.sv_priors.mu_mean);
  res["sv.mu_var"] = fmt(cfg.sv_priors.mu_var);
  res["sv.phi_a"] = fmt(cfg.sv_priors.phi_a);
  res["sv.phi_b"] = fmt(cfg.sv_priors.phi_b);
  res["sv.sigma2_shape"] = fmt(cfg.sv_priors.sigma2_shape);
  res["sv.sigma2_rate"] = fmt(cfg.sv_priors.sigma2_rate);
  res["mcmc.burn"] = std::to_string(cfg.n_burn);
  res["mcmc.save"] = std::to_string(cfg.n_save);
  res["mcmc.thin"] = std::to_string(cfg.thin);
  res["mcmc.seed"] = std::to_string(cfg.seed);
  res["mcmc.threads"] = std::to_string(cfg.threads);
  res["mcmc.checkpoint_every"] = std::to_string(cfg.checkpoint_every);
  res["eval.t0"] = std::to_string(rc.eval.t0);
  res["eval.h_max"] = std::to_string(rc.eval.h_max);
  res["eval.stride"] = std::to_string(rc.eval.refit_stride);
  if (!rc.eval.benchmark_csv.empty()) res["eval.benchmark"] = rc.eval.benchmark_csv;
  res["forecast.horizons"] = std::to_string(rc.forecast_horizons);
  return rc;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), path);
}

RunConfig config_from_manifest(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw ConfigError("manifest: cannot open " + manifest_path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, true, true);
  if (!j.contains("config")) throw ConfigError("manifest: no config section");
  std::ostringstream text;
  for (const auto& [key, value] : j.at("config").items()) {
    const std::string v = value.get<std::string>();
    if (v.empty()) continue;
    text << key << " = " << v << '\n';
  }
  return parse_config_text(text.str(), manifest_path);
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("fnv1a: cannot open " + path);
  std::uint64_t hash = 14695981039346656037ULL;
  char buf[1 << 16];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    const std::streamsize got = f.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ULL;
    }
    if (!f) break;
  }
  return hash;
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::map<std::string, std::string>& resolved,
                    const std::vector<std::string>& input_files,
                    const std::vector<std::string>& output_files, double wall_ms) {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = "0.1.0";
  j["config"] = resolved;
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& p : input_files) {
    std::ostringstream os;
    os << std::hex << fnv1a_file(p);
    inputs[p] = os.str();
  }
  j["inputs_fnv1a64"] = inputs;
  j["outputs"] = output_files;
  j["wall_ms"] = wall_ms;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot write " + path);
  f << j.dump(2) << '\n';
}

}  // namespace treevar
