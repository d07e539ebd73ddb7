#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "symlab/expansion.hpp"

using namespace symlab;
using expansion::ExpansionConfig;
using expansion::FillSpec;

TEST_CASE("expand_image placement rule") {
  // [[0.1, 0.2], [0.3, 0.4]], K=2, fill 0.5
  Tensor img({2, 2, 1}, {0.1, 0.2, 0.3, 0.4});
  ExpansionConfig cfg;
  cfg.factor = 2;
  cfg.fill = FillSpec::constant(0.5);
  Prng prng(1);
  const Tensor out = expansion::expand_image(img, cfg, prng);
  REQUIRE(out.shape() == std::vector<std::int64_t>{4, 4, 1});
  const double expected[4][4] = {{0.1, 0.5, 0.2, 0.5},
                                 {0.5, 0.5, 0.5, 0.5},
                                 {0.3, 0.5, 0.4, 0.5},
                                 {0.5, 0.5, 0.5, 0.5}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(out.at3(i, j, 0) == expected[i][j]);
}

TEST_CASE("expand_image K=1 is the identity") {
  Prng data(2);
  Tensor img({3, 5, 2});
  for (std::int64_t i = 0; i < img.size(); ++i) img[i] = data.uniform(0, 1);
  ExpansionConfig cfg;
  cfg.factor = 1;
  Prng prng(1);
  const Tensor out = expansion::expand_image(img, cfg, prng);
  CHECK(out.shape() == img.shape());
  CHECK(out.raw() == img.raw());
}

TEST_CASE("expand_image original position count") {
  Prng data(3);
  Tensor img({32, 32, 3});
  for (std::int64_t i = 0; i < img.size(); ++i) img[i] = data.uniform(0.01, 0.99);
  ExpansionConfig cfg;
  cfg.factor = 2;
  cfg.fill = FillSpec::constant(-1.0);  // sentinel outside the data range
  Prng prng(1);
  const Tensor out = expansion::expand_image(img, cfg, prng);
  REQUIRE(out.shape() == std::vector<std::int64_t>{64, 64, 3});
  std::int64_t originals = 0;
  for (std::int64_t i = 0; i < out.size(); ++i)
    if (out[i] != -1.0) ++originals;
  CHECK(originals == 3072);
}

TEST_CASE("losslessness: stride-K gather reconstructs for all K and fills") {
  Prng data(5);
  Tensor img({4, 6, 2});
  for (std::int64_t i = 0; i < img.size(); ++i) img[i] = data.uniform(0, 1);

  std::vector<FillSpec> fills = {FillSpec::constant(0.0), FillSpec::constant(0.25),
                                 FillSpec::constant(0.5), FillSpec::constant(1.0),
                                 FillSpec::random_normal()};
  for (int k = 1; k <= 5; ++k) {
    for (const auto& fill : fills) {
      ExpansionConfig cfg;
      cfg.factor = k;
      cfg.fill = fill;
      Prng prng(7);
      const Tensor out = expansion::expand_image(img, cfg, prng);
      const Tensor back = expansion::gather_original(out, 4, 6, k);
      CHECK(back.raw() == img.raw());
    }
  }
}

TEST_CASE("fill purity for constant fill") {
  Prng data(9);
  Tensor img({3, 3, 1});
  for (std::int64_t i = 0; i < img.size(); ++i) img[i] = data.uniform(0.1, 0.9);
  ExpansionConfig cfg;
  cfg.factor = 3;
  cfg.fill = FillSpec::constant(0.5);
  Prng prng(1);
  const Tensor out = expansion::expand_image(img, cfg, prng);

  std::map<double, int> expected, got;
  for (std::int64_t i = 0; i < img.size(); ++i) ++expected[img[i]];
  expected[0.5] += static_cast<int>(out.size() - img.size());
  for (std::int64_t i = 0; i < out.size(); ++i) ++got[out[i]];
  CHECK(expected == got);
}

TEST_CASE("random fill is deterministic per seed, clamped, and pure") {
  Tensor img({2, 2, 1}, {0.1, 0.2, 0.3, 0.4});
  ExpansionConfig cfg;
  cfg.factor = 3;
  cfg.fill = FillSpec::random_normal();
  Prng p1(42), p2(42), p3(43);
  const Tensor a = expansion::expand_image(img, cfg, p1);
  const Tensor b = expansion::expand_image(img, cfg, p2);
  const Tensor c = expansion::expand_image(img, cfg, p3);
  CHECK(a.raw() == b.raw());
  CHECK(a.raw() != c.raw());
  for (std::int64_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] >= 0.0);
    CHECK(a[i] <= 1.0);
  }
}

TEST_CASE("double expansion shape law") {
  Tensor img({3, 4, 1});
  ExpansionConfig c1, c2;
  c1.factor = 2;
  c2.factor = 3;
  Prng prng(1);
  const Tensor once = expansion::expand_image(img, c1, prng);
  const Tensor twice = expansion::expand_image(once, c2, prng);
  CHECK(twice.shape() == std::vector<std::int64_t>{3 * 6, 4 * 6, 1});
}

TEST_CASE("expand_vector patterns") {
  // PINN pattern: [x, t] + [x_c, t_c] -> [x, x_c, x, x_c, x, t, t_c, t, t_c, t]
  const auto pinn = expansion::expand_vector({1.0, 2.0}, {0.5, 0.6},
                                             expansion::pinn_pattern_2d());
  CHECK(pinn == std::vector<double>{1, 0.5, 1, 0.5, 1, 2, 0.6, 2, 0.6, 2});

  // scalar append: 0.7 with constant 0.5 -> [0.7, 0.5]
  const auto appended = expansion::expand_vector({0.7}, {0.5},
                                                 expansion::append_pattern(1, 1));
  CHECK(appended == std::vector<double>{0.7, 0.5});

  // identity with no constants
  const auto same = expansion::expand_vector({3, 1, 4}, {},
                                             expansion::identity_pattern(3));
  CHECK(same == std::vector<double>{3, 1, 4});

  // bad index
  expansion::Pattern bad = {{expansion::PatternToken::Source::Input, 5}};
  CHECK_THROWS_AS(expansion::expand_vector({1.0}, {}, bad), std::invalid_argument);
  expansion::Pattern bad_const = {{expansion::PatternToken::Source::Constant, 0}};
  CHECK_THROWS_AS(expansion::expand_vector({1.0}, {}, bad_const), std::invalid_argument);
}

TEST_CASE("interleave_zeros") {
  CHECK(expansion::interleave_zeros({1.5, -2.0}) == std::vector<double>{1.5, 0, -2.0, 0});
  CHECK(expansion::interleave_zeros({}).empty());

  Prng prng(11);
  std::vector<double> v(17);
  double sum = 0.0;
  for (auto& x : v) {
    x = prng.uniform(-3, 3);
    sum += x;
  }
  const auto out = expansion::interleave_zeros(v);
  REQUIRE(out.size() == 34);
  double out_sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(out[2 * i] == v[i]);
    CHECK(out[2 * i + 1] == 0.0);
    out_sum += out[2 * i] + out[2 * i + 1];
  }
  CHECK(out_sum == sum);
}

TEST_CASE("validate_factor boundary") {
  auto validity = [](int k, int kernel) {
    ExpansionConfig cfg;
    cfg.factor = k;
    cfg.first_kernel_size = kernel;
    return expansion::validate_factor(cfg);
  };
  CHECK(validity(2, 3) == expansion::FactorValidity::Ok);
  CHECK(validity(5, 3) == expansion::FactorValidity::Warning);
  CHECK(validity(3, 3) == expansion::FactorValidity::Ok);  // "not exceed" is inclusive
}
