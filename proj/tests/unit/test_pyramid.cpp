// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "support/oracles.hpp"
#include "upat/errors.hpp"
#include "upat/pyramid.hpp"

using namespace upat;
using Catch::Approx;

namespace {

PyramidSpec spec_of(std::vector<int> scales, std::vector<double> mults, double radius, bool per_channel) {
  PyramidSpec s;
  s.scales = std::move(scales);
  s.multipliers = std::move(mults);
  s.radius = radius;
  s.step_size = 0.01;
  s.per_channel = per_channel;
  return s;
}

PyramidPerturbation random_state(std::mt19937_64& rng, const PyramidSpec& spec, ImageShape shape, double spread) {
  auto p = init_zeros(spec, shape);
  for (auto& level : p.levels()) testing::fill_uniform(level.values, rng, -spread, spread);
  return p;
}

}  // namespace

TEST_CASE("init_zeros produces ceil-division level shapes", "[pyramid]") {
  auto p = init_zeros(spec_of({2, 1}, {1, 1}, 0.1, false), {4, 4, 1});
  REQUIRE(p.levels().size() == 2);
  CHECK(p.level(0).rows == 2);
  CHECK(p.level(0).cols == 2);
  CHECK(p.level(1).rows == 4);
  CHECK(p.level(1).cols == 4);
  CHECK(p.max_abs() == 0.0);
  for (double v : materialize(p, 0.1)) CHECK(v == 0.0);

  auto big = init_zeros(spec_of({32, 16, 1}, {20, 10, 1}, 6.0 / 255, true), {224, 224, 3});
  CHECK((big.level(0).rows == 7 && big.level(0).cols == 7 && big.level(0).depth == 3));
  CHECK((big.level(1).rows == 14 && big.level(1).cols == 14 && big.level(1).depth == 3));
  CHECK((big.level(2).rows == 224 && big.level(2).cols == 224 && big.level(2).depth == 3));

  auto odd = init_zeros(spec_of({3, 1}, {1, 1}, 0.1, false), {4, 4, 1});
  CHECK(odd.level(0).rows == 2);
  CHECK(odd.level(0).cols == 2);
}

TEST_CASE("init_zeros rejects invalid specs and oversize scales", "[pyramid]") {
  CHECK_THROWS_AS(init_zeros(spec_of({8, 1}, {1, 1}, 0.1, false), {4, 4, 1}), std::invalid_argument);
  // Larger than one dimension only is allowed.
  CHECK_NOTHROW(init_zeros(spec_of({8, 1}, {1, 1}, 0.1, false), {4, 9, 1}));
  CHECK_THROWS_AS(init_zeros(spec_of({2, 2}, {1, 1}, 0.1, false), {4, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(init_zeros(spec_of({4, 2}, {1, 1}, 0.1, false), {4, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(init_zeros(spec_of({2, 1}, {1}, 0.1, false), {4, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(init_zeros(spec_of({2, 1}, {1, 0}, 0.1, false), {4, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(init_zeros(spec_of({2, 1}, {1, 1}, 1.5, false), {4, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(init_zeros(spec_of({1}, {1}, 0.1, false), {0, 4, 1}), std::invalid_argument);
}

TEST_CASE("materialize composes clipped, scaled, tiled levels", "[pyramid]") {
  auto p = init_zeros(spec_of({2, 1}, {2, 1}, 0.5, false), {4, 4, 1});
  p.level(0).values = {0.6, -0.3, 0.2, 0.1};
  const auto delta = materialize(p, 0.5);
  const auto oracle = testing::materialize_per_pixel(p, 0.5);
  // Frozen from the per-pixel oracle: 2*clip(0.6)=1.0, 2*(-0.3), 2*0.2, 2*0.1.
  const double expected_blocks[2][2] = {{1.0, -0.6}, {0.4, 0.2}};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      CHECK(delta[y * 4 + x] == Approx(expected_blocks[y / 2][x / 2]).margin(1e-15));
      CHECK(oracle[y * 4 + x] == Approx(expected_blocks[y / 2][x / 2]).margin(1e-15));
    }
  }
}

TEST_CASE("single-scale pyramid is the identity inside the ball", "[pyramid]") {
  std::mt19937_64 rng(7);
  auto p = init_zeros(spec_of({1}, {1}, 0.25, true), {5, 3, 2});
  testing::fill_uniform(p.level(0).values, rng, -0.25, 0.25);
  CHECK(materialize(p, 0.25) == p.level(0).values);
}

TEST_CASE("zero levels materialize to zero for any multipliers and radius", "[pyramid]") {
  auto p = init_zeros(spec_of({4, 2, 1}, {20, 10, 1}, 1.0, true), {6, 7, 3});
  for (double r : {0.0, 0.1, 1.0}) {
    for (double v : materialize(p, r)) CHECK(v == 0.0);
  }
}

TEST_CASE("materialize rejects shape drift", "[pyramid]") {
  auto p = init_zeros(spec_of({2, 1}, {1, 1}, 0.5, false), {4, 4, 1});
  p.level(0).values.push_back(0.0);
  CHECK_THROWS_AS(materialize(p, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(PyramidPerturbation(p.spec(), {5, 5, 1}, {LevelGrid(2, 2, 1), LevelGrid(4, 4, 1)}),
                  std::invalid_argument);
}

TEST_CASE("project clamps into the ball and is idempotent", "[pyramid]") {
  const double r = 8.0 / 255.0;
  auto p = init_zeros(spec_of({1}, {1}, r, false), {1, 2, 1});
  p.level(0).values = {0.04, -0.01};
  auto q = project(p, r);
  CHECK(q.level(0).values[0] == r);
  CHECK(q.level(0).values[1] == -0.01);
  CHECK(project(q, r) == q);

  auto z = project(p, 0.0);
  for (double v : z.level(0).values) CHECK(v == 0.0);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_state(rng, spec_of({3, 1}, {2, 1}, 0.2, true), {6, 5, 3}, 0.5);
    const double radius = std::uniform_real_distribution<double>(0.0, 0.4)(rng);
    auto once = project(s, radius);
    CHECK(once.max_abs() <= radius);
    CHECK(project(once, radius) == once);
  }
}

TEST_CASE("sign_ascent_update follows gradient signs", "[pyramid]") {
  auto p = init_zeros(spec_of({1}, {1}, 0.1, false), {1, 2, 1});
  LevelGrid g(1, 2, 1);
  g.values = {0.3, -0.2};
  auto q = sign_ascent_update(p, std::span<const LevelGrid>(&g, 1), 0.01, 0.1);
  CHECK(q.level(0).values[0] == 0.01);
  CHECK(q.level(0).values[1] == -0.01);

  LevelGrid scaled = g;
  for (double& v : scaled.values) v *= 1000.0;
  CHECK(sign_ascent_update(p, std::span<const LevelGrid>(&scaled, 1), 0.01, 0.1) == q);

  LevelGrid zero(1, 2, 1);
  CHECK(sign_ascent_update(p, std::span<const LevelGrid>(&zero, 1), 0.01, 0.1) == p);

  p.level(0).values = {0.1, 0.0};
  LevelGrid pos(1, 2, 1);
  pos.values = {1.0, 0.0};
  auto at_edge = sign_ascent_update(p, std::span<const LevelGrid>(&pos, 1), 0.01, 0.1);
  CHECK(at_edge.level(0).values[0] == 0.1);
}

TEST_CASE("sign_ascent_update rejects non-finite gradients by level", "[pyramid]") {
  auto p = init_zeros(spec_of({2, 1}, {1, 1}, 0.1, false), {2, 2, 1});
  std::vector<LevelGrid> g = {LevelGrid(1, 1, 1), LevelGrid(2, 2, 1)};
  g[1].values[3] = std::numeric_limits<double>::quiet_NaN();
  try {
    sign_ascent_update(p, g, 0.01, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("delta_scale_1") != std::string::npos);
  }
  g[1].values[3] = 0.0;
  g[0] = LevelGrid(2, 1, 1);
  CHECK_THROWS_AS(sign_ascent_update(p, g, 0.01, 0.1), std::invalid_argument);
}

TEST_CASE("property: sign updates are invariant to positive gradient scaling", "[pyramid][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos_scale(1e-6, 1e6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = testing::random_spec(rng, 6);
    auto p = random_state(rng, spec, {6, 6, 3}, spec.radius);
    std::vector<LevelGrid> g;
    for (const auto& level : p.levels()) {
      LevelGrid lg(level.rows, level.cols, level.depth);
      testing::fill_uniform(lg.values, rng, -1.0, 1.0);
      g.push_back(std::move(lg));
    }
    auto scaled = g;
    const double k = pos_scale(rng);
    for (auto& lg : scaled) {
      for (double& v : lg.values) v *= k;
    }
    CHECK(sign_ascent_update(p, g, 0.003, spec.radius) == sign_ascent_update(p, scaled, 0.003, spec.radius));
  }
}

TEST_CASE("property: materialization bound and per-pixel oracle agreement", "[pyramid][property]") {
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> side(1, 8);
  std::uniform_int_distribution<int> chans(1, 3);
  for (int trial = 0; trial < 300; ++trial) {
    const ImageShape shape{side(rng), side(rng), chans(rng)};
    const auto spec = testing::random_spec(rng, std::max(shape.height, shape.width));
    auto p = random_state(rng, spec, shape, 2.0 * spec.radius + 0.01);
    const auto delta = materialize(p, spec.radius);
    const auto oracle = testing::materialize_per_pixel(p, spec.radius);
    const double bound = spec.radius * spec.multiplier_sum();
    for (std::size_t i = 0; i < delta.size(); ++i) {
      CHECK(std::abs(delta[i] - oracle[i]) <= 1e-12);
      CHECK(std::abs(delta[i]) <= bound * (1.0 + 1e-15));
    }
  }
}

TEST_CASE("property: level gradients match central differences", "[pyramid][property]") {
  std::mt19937_64 rng(5);
  const ImageShape shape{7, 6, 2};
  const auto spec = spec_of({4, 2, 1}, {3.0, 2.0, 1.0}, 0.3, true);
  // Smooth scalar loss of x + delta with random coefficients.
  std::vector<double> x(shape.size()), a(shape.size()), b(shape.size());
  testing::fill_uniform(x, rng, 0.0, 1.0);
  testing::fill_uniform(a, rng, -1.0, 1.0);
  testing::fill_uniform(b, rng, 0.5, 2.0);
  auto loss = [&](const PyramidPerturbation& p) {
    const auto d = materialize(p, spec.radius);
    double l = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) l += a[i] * std::sin(b[i] * (x[i] + d[i]));
    return l;
  };
  for (int trial = 0; trial < 5; ++trial) {
    // Keep every entry away from the clip boundary by more than h.
    auto p = random_state(rng, spec, shape, 0.5);
    for (auto& level : p.levels()) {
      for (double& v : level.values) {
        if (std::abs(std::abs(v) - spec.radius) < 1e-3) v *= 0.9;
      }
    }
    const auto d = materialize(p, spec.radius);
    std::vector<double> gd(shape.size());
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] = a[i] * b[i] * std::cos(b[i] * (x[i] + d[i]));
    const auto grads = materialize_backward(p, spec.radius, gd);
    for (std::size_t li = 0; li < p.levels().size(); ++li) {
      for (std::size_t j = 0; j < p.level(li).values.size(); ++j) {
        auto f = [&](double v) {
          auto q = p;
          q.level(li).values[j] = v;
          return loss(q);
        };
        const double numeric = testing::central_difference(f, p.level(li).values[j]);
        const double analytic = grads[li].values[j];
        if (std::abs(p.level(li).values[j]) > spec.radius) {
          CHECK(analytic == 0.0);
          CHECK(std::abs(numeric) < 1e-9);
        } else {
          CHECK(testing::relative_error(analytic, numeric) < 1e-4);
        }
      }
    }
  }
}
