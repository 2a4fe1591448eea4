#include "treevar/panel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "treevar/csv.hpp"

namespace treevar {

namespace {

int leading_loss(int code) {
  switch (code) {
    case 1: return 0;
    case 2: return 4;
    case 3: return 1;
    case 4: return 1;
    default: throw std::invalid_argument("transform code must be in {1,2,3,4}");
  }
}

}  // namespace

std::vector<double> apply_transform(const std::vector<double>& series, int code) {
  const int drop = leading_loss(code);
  if (static_cast<int>(series.size()) < drop + 1) {
    throw std::length_error("apply_transform: series too short for code " + std::to_string(code));
  }
  if (code == 2 || code == 3) {
    for (double v : series) {
      if (!(v > 0.0)) throw std::domain_error("apply_transform: nonpositive value under log growth code");
    }
  }
  std::vector<double> out;
  out.reserve(series.size() - drop);
  for (std::size_t t = drop; t < series.size(); ++t) {
    switch (code) {
      case 1: out.push_back(series[t]); break;
      case 2: out.push_back(100.0 * (std::log(series[t]) - std::log(series[t - 4]))); break;
      case 3: out.push_back(100.0 * (std::log(series[t]) - std::log(series[t - 1]))); break;
      case 4: out.push_back(100.0 * (series[t] / series[t - 1] - 1.0)); break;
    }
  }
  return out;
}

TimeSeriesPanel transform_panel(const TimeSeriesPanel& raw, const std::vector<int>& codes) {
  const int n = static_cast<int>(raw.cols());
  if (static_cast<int>(codes.size()) != n) {
    throw std::invalid_argument("transform_panel: one code per variable required");
  }
  int common_drop = 0;
  for (int code : codes) common_drop = std::max(common_drop, leading_loss(code));
  const int T_raw = static_cast<int>(raw.rows());
  const int T = T_raw - common_drop;
  if (T < 1) throw std::length_error("transform_panel: panel too short after trimming");

  TimeSeriesPanel out;
  out.names = raw.names;
  out.transform_codes = codes;
  out.values.resize(T, n);
  for (int j = 0; j < n; ++j) {
    std::vector<double> col(raw.values.col(j).data(), raw.values.col(j).data() + T_raw);
    auto tr = apply_transform(col, codes[j]);
    const int skip = static_cast<int>(tr.size()) - T;  // align on the common sample
    for (int t = 0; t < T; ++t) {
      const double v = tr[skip + t];
      if (!std::isfinite(v)) {
        throw std::domain_error("transform_panel: non-finite value in " + raw.names[j]);
      }
      out.values(t, j) = v;
    }
  }
  out.dates.assign(raw.dates.begin() + common_drop, raw.dates.end());
  return out;
}

TimeSeriesPanel standardize(const TimeSeriesPanel& panel) {
  const int T = static_cast<int>(panel.rows());
  const int n = static_cast<int>(panel.cols());
  if (T < 2) throw std::length_error("standardize: need at least 2 observations");

  TimeSeriesPanel out = panel;
  std::vector<TimeSeriesPanel::Scaling> sc(n);
  for (int j = 0; j < n; ++j) {
    const double mean = panel.values.col(j).mean();
    const double ss = (panel.values.col(j).array() - mean).square().sum();
    const double sd = std::sqrt(ss / (T - 1));
    if (!(sd > 0.0)) {
      throw std::domain_error("standardize: constant column " + panel.names[j]);
    }
    out.values.col(j) = (panel.values.col(j).array() - mean) / sd;
    if (panel.scaling) {
      const auto& prev = (*panel.scaling)[j];
      sc[j] = {prev.center + prev.scale * mean, prev.scale * sd};
    } else {
      sc[j] = {mean, sd};
    }
  }
  out.scaling = std::move(sc);
  return out;
}

double destandardize_value(const TimeSeriesPanel& panel, int variable, double v) {
  if (!panel.scaling) return v;
  const auto& s = (*panel.scaling)[variable];
  return s.center + s.scale * v;
}

double standardize_value(const TimeSeriesPanel& panel, int variable, double v) {
  if (!panel.scaling) return v;
  const auto& s = (*panel.scaling)[variable];
  return (v - s.center) / s.scale;
}

Eigen::MatrixXd destandardized_values(const TimeSeriesPanel& panel) {
  Eigen::MatrixXd out = panel.values;
  if (!panel.scaling) return out;
  for (int j = 0; j < out.cols(); ++j) {
    const auto& s = (*panel.scaling)[j];
    out.col(j) = s.center + s.scale * out.col(j).array();
  }
  return out;
}

DesignPair build_design(const TimeSeriesPanel& panel, int p) {
  const int T = static_cast<int>(panel.rows());
  const int n = static_cast<int>(panel.cols());
  if (p < 1) throw std::invalid_argument("build_design: lag order must be positive");
  if (T <= p) throw std::length_error("build_design: need more than p observations");

  DesignPair d;
  d.lag_order = p;
  d.n_vars = n;
  d.Y = panel.values.bottomRows(T - p);
  d.X.resize(T - p, n * p);
  for (int t = 0; t < T - p; ++t) {
    for (int l = 1; l <= p; ++l) {
      d.X.block(t, (l - 1) * n, 1, n) = panel.values.row(t + p - l);
    }
  }
  return d;
}

TimeSeriesPanel load_panel_csv(const std::string& path) {
  auto table = csv::read_file(path);
  if (table.header.size() < 2) {
    throw std::runtime_error("panel csv needs a date column plus at least one variable: " + path);
  }
  TimeSeriesPanel p;
  p.names.assign(table.header.begin() + 1, table.header.end());
  const int n = static_cast<int>(p.names.size());
  const int T = static_cast<int>(table.rows.size());
  if (T == 0) throw std::runtime_error("panel csv has no data rows: " + path);
  p.values.resize(T, n);
  p.dates.resize(T);
  for (int t = 0; t < T; ++t) {
    p.dates[t] = table.rows[t][0];
    for (int j = 0; j < n; ++j) {
      p.values(t, j) = csv::to_double(table.rows[t][j + 1], path + " row " + std::to_string(t + 2));
    }
  }
  p.transform_codes.assign(n, 1);
  return p;
}

void write_panel_csv(const TimeSeriesPanel& panel, const std::string& path) {
  csv::Table t;
  t.header.push_back("date");
  for (const auto& nm : panel.names) t.header.push_back(nm);
  const int T = static_cast<int>(panel.rows());
  const int n = static_cast<int>(panel.cols());
  for (int r = 0; r < T; ++r) {
    std::vector<std::string> row;
    row.push_back(r < static_cast<int>(panel.dates.size()) ? panel.dates[r] : std::to_string(r));
    for (int j = 0; j < n; ++j) {
      std::ostringstream os;
      os.precision(17);
      os << panel.values(r, j);
      row.push_back(os.str());
    }
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

}  // namespace treevar
