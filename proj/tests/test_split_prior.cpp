#include <doctest.h>

#include <cmath>

#include "stat_helpers.hpp"
#include "treevar/split_prior.hpp"

using namespace treevar;

namespace {

TimeSeriesPanel panel_from(const Eigen::MatrixXd& v) {
  TimeSeriesPanel p;
  p.values = v;
  for (int j = 0; j < v.cols(); ++j) p.names.push_back("v" + std::to_string(j));
  p.transform_codes.assign(v.cols(), 1);
  for (int t = 0; t < v.rows(); ++t) p.dates.push_back(std::to_string(t));
  return p;
}

}  // namespace

TEST_CASE("ar residual variance of white noise approaches the series variance") {
  Rng rng(50);
  const int T = 6000;
  Eigen::MatrixXd v(T, 1);
  for (int t = 0; t < T; ++t) v(t, 0) = rng.normal(0.0, 1.7);
  auto p = panel_from(v);
  const double series_var = (v.col(0).array() - v.col(0).mean()).square().sum() / (T - 1);
  const double est = ar_residual_variances(p, 1)[0];
  CHECK(std::abs(est - series_var) / series_var < 0.05);
}

TEST_CASE("ar residual variance recovers the innovation variance of an AR(1)") {
  Rng rng(51);
  const int T = 5000;
  Eigen::MatrixXd v(T, 1);
  v(0, 0) = 0.0;
  for (int t = 1; t < T; ++t) v(t, 0) = 0.8 * v(t - 1, 0) + rng.normal();
  const double est = ar_residual_variances(panel_from(v), 1)[0];
  CHECK(est > 0.9);
  CHECK(est < 1.1);
}

TEST_CASE("ar residual variance rejects a constant series") {
  Eigen::MatrixXd v = Eigen::MatrixXd::Constant(100, 1, 3.0);
  CHECK_THROWS_AS(ar_residual_variances(panel_from(v), 2), std::domain_error);
}

TEST_CASE("minnesota scales follow the lag-decay cases") {
  const int n = 3, p = 4;
  Eigen::VectorXd sigma2(3);
  sigma2 << 2.0, 1.0, 0.5;
  auto phi = minnesota_scales(0, n, p, 1.0, 0.5, sigma2);
  REQUIRE(phi.size() == n * p);
  // own lag 1 with lambda1 = 1
  CHECK(phi[0] == doctest::Approx(1.0));
  // own lag 2 decays as 1/l^2
  CHECK(phi[n + 0] == doctest::Approx(0.25));
  // cross lag 1 with equal variances would be lambda2; here sigma ratio enters
  auto phi_eq = minnesota_scales(0, n, p, 1.0, 0.5, Eigen::VectorXd::Ones(3));
  CHECK(phi_eq[1] == doctest::Approx(0.5));
  // variance ratio sigma_i^2 / sigma_j^2 scales the cross term
  CHECK(phi[1] == doctest::Approx(0.5 * (2.0 / 1.0)));
  CHECK(phi[2] == doctest::Approx(0.5 * (2.0 / 0.5)));
}

TEST_CASE("minnesota decay is exactly 1/l^2 within own and cross blocks") {
  const int n = 4, p = 6;
  Eigen::VectorXd sigma2(n);
  sigma2 << 0.3, 1.1, 2.2, 0.9;
  for (int eq = 0; eq < n; ++eq) {
    auto phi = minnesota_scales(eq, n, p, 3.0, 1.5, sigma2);
    for (int l = 1; l <= p; ++l) {
      for (int j = 0; j < n; ++j) {
        const double ratio = phi[(l - 1) * n + j] / phi[j];
        CHECK(ratio == doctest::Approx(1.0 / (l * l)).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("sparse scales are a constant lambda/k") {
  CHECK(sparse_scales(4, 1.0) == Eigen::VectorXd::Constant(4, 0.25));
  CHECK(sparse_scales(1, 2.5)[0] == doctest::Approx(2.5));
  CHECK(sparse_scales(10, 20.0) == Eigen::VectorXd::Constant(10, 2.0));
}

TEST_CASE("dirichlet posterior parameters are exactly phi plus counts") {
  Eigen::VectorXd phi(3);
  phi << 0.5, 1.0, 2.0;
  Eigen::VectorXi m(3);
  m << 4, 0, 7;
  Eigen::VectorXd post = dirichlet_posterior_params(phi, m);
  CHECK(post[0] == 4.5);
  CHECK(post[1] == 1.0);
  CHECK(post[2] == 9.0);
  // posterior mean is monotone in the count
  for (int add = 1; add < 5; ++add) {
    Eigen::VectorXi m2 = m;
    m2[1] += add;
    const Eigen::VectorXd a = dirichlet_posterior_params(phi, m2);
    CHECK(a[1] / a.sum() > post[1] / post.sum());
    post = a;
    m = m2;
  }
}

TEST_CASE("update_split_probs draws from the conjugate Dirichlet") {
  Rng rng(52);
  SUBCASE("symmetric prior, no counts") {
    Eigen::VectorXd phi = Eigen::VectorXd::Ones(3);
    Eigen::VectorXi m = Eigen::VectorXi::Zero(3);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd s = update_split_probs(phi, m, rng);
      CHECK(std::abs(s.sum() - 1.0) < 1e-10);
      mean += s;
    }
    mean /= n;
    const double se = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 4.0 / n);  // var = p(1-p)/(a0+1)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(mean[j] - 1.0 / 3.0) < 3.0 * se);
  }
  SUBCASE("Dirichlet(4,1) posterior mean") {
    Eigen::VectorXd phi = Eigen::VectorXd::Ones(2);
    Eigen::VectorXi m(2);
    m << 3, 0;
    double mean0 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) mean0 += update_split_probs(phi, m, rng)[0];
    mean0 /= n;
    const double se = std::sqrt(0.8 * 0.2 / 6.0 / n);
    CHECK(std::abs(mean0 - 0.8) < 3.0 * se);
  }
}

TEST_CASE("uniform regime concentrates s at 1/k") {
  Rng rng(53);
  const int k = 100;
  Eigen::VectorXd phi = uniform_scales(k);
  Eigen::VectorXi m = Eigen::VectorXi::Zero(k);
  m[3] = 40;  // counts barely move a 1e6 prior
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd s = update_split_probs(phi, m, rng);
    CHECK((s.array() - 1.0 / k).abs().maxCoeff() < 0.01);
  }
}

TEST_CASE("lambda grid sampler recovers the Beta(0.5,1) prior without conditioning") {
  Rng rng(54);
  const int k = 15;
  std::vector<double> u;
  for (int i = 0; i < 10000; ++i) {
    const double lambda = sample_lambda_grid([](double) { return 0.0; }, k, rng, 20000);
    u.push_back(lambda / (lambda + k));
  }
  const double d = testutil::ks_statistic(u, [](double x) { return std::sqrt(x); });
  CHECK(testutil::ks_pvalue(d, u.size()) > 0.01);
}

TEST_CASE("concentrated s pulls lambda below its prior, uniform s above") {
  Rng rng(55);
  const int k = 12;
  Eigen::VectorXd s_conc = Eigen::VectorXd::Constant(k, 1e-12);
  s_conc[0] = 1.0 - 11e-12;
  Eigen::VectorXd s_unif = Eigen::VectorXd::Constant(k, 1.0 / k);
  std::vector<double> prior, conc, unif;
  for (int i = 0; i < 4000; ++i) {
    prior.push_back(sample_lambda_grid([](double) { return 0.0; }, k, rng));
    conc.push_back(update_lambda(s_conc, k, rng));
    unif.push_back(update_lambda(s_unif, k, rng));
  }
  CHECK(testutil::median_of(conc) < testutil::median_of(prior));
  CHECK(testutil::median_of(unif) > testutil::median_of(prior));

  // Grid-posterior oracle: recompute the posterior mode directly and compare
  // against the prior mode (the smallest grid point).
  const int G = 1000;
  double best_lambda = 0.0, best_w = -1e300;
  double prior_mode_lambda = 0.0, prior_best = -1e300;
  const double sum_log_s = s_unif.array().log().sum();
  for (int g = 0; g < G; ++g) {
    const double uu = (g + 0.5) / G;
    const double lambda = k * uu / (1.0 - uu);
    const double lp_prior = -0.5 * std::log(uu);
    const double lp_post = lp_prior + std::lgamma(lambda) - k * std::lgamma(lambda / k) +
                           (lambda / k - 1.0) * sum_log_s;
    if (lp_post > best_w) {
      best_w = lp_post;
      best_lambda = lambda;
    }
    if (lp_prior > prior_best) {
      prior_best = lp_prior;
      prior_mode_lambda = lambda;
    }
  }
  CHECK(best_lambda > prior_mode_lambda);
}

TEST_CASE("expected active predictors") {
  CHECK(expected_active_predictors(1.0, 1) == doctest::Approx(1.0));
  CHECK(expected_active_predictors(1.0, 2) == doctest::Approx(1.5));
  // The i = 0 term is lambda/lambda = 1, so the small-lambda limit is a
  // single active predictor, with the excess count vanishing.
  CHECK(expected_active_predictors(1e-8, 50) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(expected_active_predictors(1e-8, 50) - 1.0 > 0.0);
}

TEST_CASE("dirichlet draws: concentration, proportionality, sparsity") {
  Rng rng(56);
  SUBCASE("huge symmetric alpha concentrates at 1/2") {
    Eigen::VectorXd alpha = Eigen::VectorXd::Constant(2, 1e6);
    for (int i = 0; i < 200; ++i) {
      auto s = rng.dirichlet(alpha);
      CHECK(std::abs(s[0] - 0.5) < 0.002);
    }
  }
  SUBCASE("means proportional to alpha for the lag-decay example") {
    Eigen::VectorXd alpha(3);
    alpha << 1.0, 0.25, 1.0 / 9.0;
    const int n = 10000;
    Eigen::MatrixXd draws = dirichlet_draws(alpha, n, rng);
    const double a0 = alpha.sum();
    for (int j = 0; j < 3; ++j) {
      const double expect = alpha[j] / a0;
      const double se = std::sqrt(expect * (1 - expect) / (a0 + 1.0) / n);
      CHECK(std::abs(draws.col(j).mean() - expect) < 3.0 * se);
      CHECK(std::abs(draws.row(j).sum() - 1.0) < 1e-12);
    }
  }
  SUBCASE("tiny symmetric alpha is one-sparse most of the time") {
    Eigen::VectorXd alpha = Eigen::VectorXd::Constant(2, 0.01);
    const int n = 5000;
    int sparse = 0;
    for (int i = 0; i < n; ++i) {
      if (rng.dirichlet(alpha).maxCoeff() > 0.95) ++sparse;
    }
    CHECK(sparse > static_cast<int>(0.9 * n));
  }
}

TEST_CASE("make_split_prior_state wires each regime") {
  Eigen::VectorXd sigma2 = Eigen::VectorXd::Ones(2);
  auto u = make_split_prior_state(SplitRegime::Uniform, 0, 2, 3, 1.0, 0.5, 1.0, sigma2);
  CHECK(u.phi[0] == doctest::Approx(1e6));
  CHECK(std::abs(u.s.sum() - 1.0) < 1e-12);
  auto sp = make_split_prior_state(SplitRegime::Sparse, 0, 2, 3, 1.0, 0.5, 2.0, sigma2);
  CHECK(sp.phi[0] == doctest::Approx(2.0 / 6.0));
  auto mn = make_split_prior_state(SplitRegime::Minnesota, 1, 2, 3, 1.0, 0.5, 1.0, sigma2);
  CHECK(mn.phi[1] == doctest::Approx(1.0));   // own lag 1 of equation 1
  CHECK(mn.phi[0] == doctest::Approx(0.5));   // cross lag 1
  CHECK(mn.counts.sum() == 0);
}

TEST_CASE("regime names round trip") {
  for (auto r : {SplitRegime::Uniform, SplitRegime::Sparse, SplitRegime::Minnesota}) {
    CHECK(parse_regime(regime_name(r)) == r);
  }
  CHECK_THROWS_AS(parse_regime("bogus"), std::invalid_argument);
}
