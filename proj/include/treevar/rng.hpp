#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>

namespace treevar {

// Random draws for the samplers. All transforms from raw engine output are
// implemented here rather than through <random> distributions, so a chain is
// reproducible from its seed regardless of the standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Derived stream for parallel equation updates; deterministic in
  // (seed, a, b) and independent of scheduling.
  Rng substream(std::uint64_t a, std::uint64_t b = 0) const;

  double uniform();                       // [0, 1)
  double uniform_pos();                   // (0, 1)
  double uniform(double lo, double hi);
  std::uint64_t next_u64() { return engine_(); }
  int uniform_int(int n);                 // {0, ..., n-1}

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape, double scale = 1.0);
  double log_gamma(double shape);         // log of a Gamma(shape, 1) draw
  double inv_gamma(double shape, double rate);
  double beta(double a, double b);
  double exponential(double rate = 1.0);
  double chisq(double df) { return gamma(0.5 * df, 2.0); }

  int categorical(const Eigen::VectorXd& probs);
  int categorical_logw(const Eigen::VectorXd& log_weights);
  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha);
  Eigen::VectorXd std_normal_vector(int n);

  // Engine state as text, for checkpointing.
  std::string save_state() const;
  void restore_state(const std::string& state);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace treevar
