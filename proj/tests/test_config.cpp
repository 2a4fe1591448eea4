#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "treevar/config.hpp"

using namespace treevar;

TEST_CASE("minimal config fills the documented defaults") {
  auto rc = parse_config_text("mcmc.seed = 42\n", "inline");
  CHECK(rc.sampler.num_trees == 200);
  CHECK(rc.sampler.tree_gamma == doctest::Approx(0.95));
  CHECK(rc.sampler.tree_beta == doctest::Approx(0.2));
  CHECK(rc.sampler.lambda1 == doctest::Approx(1.0));
  CHECK(rc.sampler.lambda2 == doctest::Approx(0.5));
  CHECK(rc.sampler.seed == 42);
  CHECK(rc.sampler.regime == SplitRegime::Uniform);
  CHECK(rc.sampler.volatility == Volatility::SV);
  CHECK(rc.resolved.at("model.trees") == "200");
  CHECK(rc.resolved.at("tree.gamma") == "0.95");
}

TEST_CASE("minnesota regime with the reference shrinkage values is accepted") {
  auto rc = parse_config_text(
      "mcmc.seed = 1\nmodel.regime = minnesota\nmodel.lambda1 = 1\nmodel.lambda2 = 0.5\n",
      "inline");
  CHECK(rc.sampler.regime == SplitRegime::Minnesota);
  CHECK(rc.sampler.lambda1 == 1.0);
  CHECK(rc.sampler.lambda2 == 0.5);
}

TEST_CASE("field-level rejections") {
  CHECK_THROWS_WITH_AS(parse_config_text("mcmc.seed = 1\nmodel.lambda2 = -0.1\n", "inline"),
                       doctest::Contains("lambda2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("mcmc.seed = 1\nmodel.regime = flat\n", "inline"),
                       doctest::Contains("regime"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("model.trees = 10\n", "inline"),
                       doctest::Contains("seed"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("mcmc.seed = 1\nbogus.key = 3\n", "inline"),
                       doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("mcmc.seed = 1\nmcmc.seed = 2\n", "inline"),
                       doctest::Contains("duplicate"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("mcmc.seed = 1\ndata.transforms = 1,7\n", "inline"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("mcmc.seed = 1\nmodel.trees = ten\n", "inline"), ConfigError);
}

TEST_CASE("comments, whitespace and full round trip through a manifest") {
  const std::string text =
      "# a comment\n"
      "mcmc.seed = 7   # trailing comment\n"
      "\n"
      "model.regime = sparse\n"
      "model.lambda = 2.5\n"
      "data.transforms = 2, 1, 3\n"
      "eval.t0 = 80\n";
  auto rc = parse_config_text(text, "inline");
  CHECK(rc.sampler.regime == SplitRegime::Sparse);
  CHECK(rc.sampler.lambda_init == 2.5);
  CHECK(rc.transforms == std::vector<int>{2, 1, 3});
  CHECK(rc.eval.t0 == 80);

  write_manifest("manifest_test.json", "fit", rc.resolved, {}, {"out/chain.json"}, 12.5);
  auto rc2 = config_from_manifest("manifest_test.json");
  CHECK(rc2.resolved == rc.resolved);
  CHECK(rc2.sampler.seed == rc.sampler.seed);
  CHECK(rc2.sampler.lambda_init == rc.sampler.lambda_init);
  CHECK(rc2.transforms == rc.transforms);
  std::remove("manifest_test.json");
}

TEST_CASE("fnv1a digest is stable") {
  {
    std::ofstream f("fnv_test.bin", std::ios::binary);
    f << "treevar";
  }
  CHECK(fnv1a_file("fnv_test.bin") == 0x869984db842ca64eULL);
  std::remove("fnv_test.bin");
}
