#include "treevar/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace treevar {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::substream(std::uint64_t a, std::uint64_t b) const {
  return Rng(splitmix64(splitmix64(seed_ ^ splitmix64(a)) ^ splitmix64(~b)));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
  double u;
  do {
    u = uniform();
  } while (u <= 0.0);
  return u;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  // Rejection from the top to avoid modulo bias.
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int>(x % un);
}

double Rng::normal() {
  // Polar method, spare discarded to keep the draw sequence stateless.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

double Rng::gamma(double shape, double scale) {
  return std::exp(log_gamma(shape)) * scale;
}

double Rng::log_gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("log_gamma: shape must be positive");
  // Marsaglia-Tsang; the shape<1 boost happens on the log scale so sparse
  // Dirichlet draws survive underflow.
  double boost = 0.0;
  if (shape < 1.0) {
    boost = std::log(uniform_pos()) / shape;
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x ||
        std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return std::log(d * v) + boost;
    }
  }
}

double Rng::inv_gamma(double shape, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("inv_gamma: rate must be positive");
  return rate / gamma(shape, 1.0);
}

double Rng::beta(double a, double b) {
  const double lx = log_gamma(a);
  const double ly = log_gamma(b);
  const double m = std::max(lx, ly);
  const double ex = std::exp(lx - m);
  const double ey = std::exp(ly - m);
  return ex / (ex + ey);
}

double Rng::exponential(double rate) {
  return -std::log(uniform_pos()) / rate;
}

int Rng::categorical(const Eigen::VectorXd& probs) {
  const double total = probs.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::invalid_argument("categorical: weights must be positive and finite");
  }
  double u = uniform() * total;
  for (int i = 0; i < probs.size(); ++i) {
    u -= probs[i];
    if (u < 0.0) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

int Rng::categorical_logw(const Eigen::VectorXd& log_weights) {
  const double m = log_weights.maxCoeff();
  Eigen::VectorXd w = (log_weights.array() - m).exp();
  return categorical(w);
}

Eigen::VectorXd Rng::dirichlet(const Eigen::VectorXd& alpha) {
  const int k = static_cast<int>(alpha.size());
  Eigen::VectorXd lg(k);
  for (int i = 0; i < k; ++i) {
    if (!(alpha[i] > 0.0)) throw std::invalid_argument("dirichlet: alpha must be positive");
    lg[i] = log_gamma(alpha[i]);
  }
  const double m = lg.maxCoeff();
  Eigen::VectorXd s = (lg.array() - m).exp();
  return s / s.sum();
}

Eigen::VectorXd Rng::std_normal_vector(int n) {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = normal();
  return z;
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << seed_ << ' ' << engine_;
  return os.str();
}

void Rng::restore_state(const std::string& state) {
  std::istringstream is(state);
  is >> seed_ >> engine_;
  if (is.fail()) throw std::runtime_error("Rng::restore_state: malformed state string");
}

}  // namespace treevar
