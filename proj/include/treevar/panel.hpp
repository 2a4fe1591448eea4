#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace treevar {

// Aligned multivariate quarterly panel. Transform codes follow the FRED-QD
// convention: 1 none, 2 year-on-year growth, 3 quarter-on-quarter growth,
// 4 quarter-on-quarter percentage change.
struct TimeSeriesPanel {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // T x n
  std::vector<int> transform_codes;
  std::vector<std::string> dates;  // length T

  struct Scaling {
    double center = 0.0;
    double scale = 1.0;
  };
  std::optional<std::vector<Scaling>> scaling;  // present once standardized

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// One series through its stationarity transform; leading undefined entries
// are dropped (4 for code 2, 1 for codes 3-4).
std::vector<double> apply_transform(const std::vector<double>& series, int code);

// Applies codes column by column and trims every column to the common sample
// so the panel stays aligned.
TimeSeriesPanel transform_panel(const TimeSeriesPanel& raw, const std::vector<int>& codes);

// Columns centered and scaled to unit sample standard deviation (T-1
// denominator); (center, scale) recorded for back-transformation and composed
// with any scaling already present.
TimeSeriesPanel standardize(const TimeSeriesPanel& panel);

double destandardize_value(const TimeSeriesPanel& panel, int variable, double v);
double standardize_value(const TimeSeriesPanel& panel, int variable, double v);
Eigen::MatrixXd destandardized_values(const TimeSeriesPanel& panel);

// Lagged design. Column q of X maps to lag 1 + q/n of variable q%n, i.e.
// X row t is (y_{t-1}', ..., y_{t-p}').
struct DesignPair {
  Eigen::MatrixXd Y;  // (T-p) x n
  Eigen::MatrixXd X;  // (T-p) x k, k = n*p
  int lag_order = 0;
  int n_vars = 0;

  int k() const { return static_cast<int>(X.cols()); }
  int lag_of_column(int q) const { return q / n_vars + 1; }
  int variable_of_column(int q) const { return q % n_vars; }
};

DesignPair build_design(const TimeSeriesPanel& panel, int p);

// CSV with first column "date" and one column per mnemonic.
TimeSeriesPanel load_panel_csv(const std::string& path);
void write_panel_csv(const TimeSeriesPanel& panel, const std::string& path);

}  // namespace treevar
