#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmr/checkpoint.hpp"
#include "mmr/model.hpp"
#include "mmr/oracle.hpp"
#include "support.hpp"

using mmr::Matrix;

namespace {

mmr::Model linear_model(Matrix w, std::vector<double> b) {
  mmr::Model m;
  m.extractor.input_dim = w.cols();
  m.head = {std::move(w), std::move(b)};
  return m;
}

std::vector<std::size_t> dims(std::initializer_list<std::size_t> d) { return d; }

}  // namespace

TEST_CASE("init_model shapes and bounds") {
  const auto linear = mmr::init_model(dims({2}), 4, 1);
  CHECK(linear.extractor.layers.empty());
  CHECK(linear.head.weight.rows() == 4);
  CHECK(linear.head.weight.cols() == 2);

  const auto mlp = mmr::init_model(dims({2, 8}), 3, 1);
  REQUIRE(mlp.extractor.layers.size() == 1);
  CHECK(mlp.head.weight.rows() == 3);
  CHECK(mlp.head.weight.cols() == 8);
  const double bound = std::sqrt(6.0 / 10.0);
  for (double v : mlp.extractor.layers[0].weight.values()) CHECK(std::abs(v) <= bound);
  for (double v : mlp.extractor.layers[0].bias) CHECK(v == 0.0);
  for (double v : mlp.head.bias) CHECK(v == 0.0);

  CHECK(mmr::flatten(mlp) == mmr::flatten(mmr::init_model(dims({2, 8}), 3, 1)));
  CHECK(mmr::flatten(mlp) != mmr::flatten(mmr::init_model(dims({2, 8}), 3, 2)));
  CHECK(mlp.parameter_count() == 2 * 8 + 8 + 3 * 8 + 3);
}

TEST_CASE("forward") {
  const auto m = linear_model(Matrix::identity(3), {0, 0, 0});
  const Matrix x{{1, -2, 3}, {0.5, 0, -1}};
  CHECK(mmr::forward(m, x).scores == x);
  CHECK_THROWS_AS(mmr::forward(m, Matrix(1, 2)), mmr::DimensionError);

  auto relu = mmr::init_model(dims({2, 4}), 2, 3);
  relu.extractor.layers[0].bias.assign(4, -100.0);
  const auto cache = mmr::forward(relu, Matrix{{1, 1}, {-1, 2}});
  for (double v : cache.features().values()) CHECK(v == 0.0);
}

TEST_CASE("forward is row independent") {
  const auto m = mmr::init_model(dims({3, 7, 5}), 4, 9);
  mmr::Rng rng(2);
  const Matrix x = testing::random_matrix(6, 3, rng);
  const auto all = mmr::forward(m, x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::size_t idx[] = {i};
    const auto one = mmr::forward(m, x.select_rows(idx));
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(one.scores(0, j) - all.scores(i, j)) <= 1e-12);
  }
  const std::vector<std::size_t> perm{5, 2, 0, 4, 1, 3};
  CHECK(mmr::forward(m, x.select_rows(perm)).scores == all.scores.select_rows(perm));
}

TEST_CASE("scores are affine in phi") {
  mmr::Rng rng(4);
  const auto m = linear_model(testing::random_matrix(3, 4, rng), {0.1, -0.2, 0.3});
  const Matrix phi = testing::random_matrix(2, 4, rng);
  const Matrix delta = testing::random_matrix(2, 4, rng);
  Matrix moved = phi;
  for (std::size_t i = 0; i < moved.size(); ++i) moved.values()[i] += delta.values()[i];
  const Matrix diff = mmr::matmul_transposed(delta, m.head.weight);
  const auto a = mmr::forward(m, moved).scores;
  const auto b = mmr::forward(m, phi).scores;
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::abs(a.values()[i] - b.values()[i] - diff.values()[i]) <= 1e-12);
}

TEST_CASE("backward") {
  const auto m = mmr::init_model(dims({2, 5}), 3, 1);
  const Matrix x{{0.3, -0.7}, {1.1, 0.4}};
  const auto cache = mmr::forward(m, x);
  const auto zero = mmr::backward(m, cache, Matrix(2, 3));
  for (double v : mmr::flatten(zero)) CHECK(v == 0.0);
  CHECK_THROWS_AS(mmr::backward(m, cache, Matrix(2, 2)), mmr::DimensionError);
}

TEST_CASE("backward on a quadratic score loss matches the closed form") {
  // L = ½ Σ_i ‖s_i‖², s_i = W x_i + b  ⇒  dL/dW = Σ_i s_i x_iᵀ, dL/db = Σ_i s_i.
  const auto m = linear_model(Matrix{{1, 2}, {-1, 0.5}}, {0.5, -1});
  const Matrix x{{1, 0}, {2, -1}};
  const auto cache = mmr::forward(m, x);
  const auto g = mmr::backward(m, cache, cache.scores);
  // s_0 = (1.5, -2), s_1 = (0.5, -3.5)
  CHECK(g.head_weight == Matrix{{1.5 + 1.0, -0.5}, {-2 - 7.0, 3.5}});
  CHECK(g.head_bias == std::vector<double>{2.0, -5.5});
}

TEST_CASE("backward matches finite differences") {
  mmr::Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = mmr::init_model(dims({3, 6, 4}), 3, 100 + trial);
    for (auto& layer : m.extractor.layers)
      for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
    const Matrix x = testing::random_matrix(4, 3, rng);
    const Matrix target = testing::random_matrix(4, 3, rng);
    const auto cache = mmr::forward(m, x);
    bool near_kink = false;
    for (const auto& z : cache.pre_activations)
      for (double v : z.values()) near_kink |= std::abs(v) < 1e-4;
    if (near_kink) continue;
    // L = Σ target ⊙ scores
    const auto g = mmr::backward(m, cache, target);
    const auto params = mmr::flatten(m);
    const auto f = [&](std::span<const double> p) {
      mmr::Model copy = m;
      mmr::unflatten(p, copy);
      const auto s = mmr::forward(copy, x).scores;
      double acc = 0;
      for (std::size_t i = 0; i < s.size(); ++i) acc += s.values()[i] * target.values()[i];
      return acc;
    };
    const auto report = mmr::oracle::finite_diff_grad(f, params, mmr::flatten(g));
    CHECK(report.max_relative_error < 1e-5);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  testing::ScratchDir dir("ckpt");
  auto m = mmr::init_model(dims({3, 5, 4}), 3, 12);
  m.head.bias = {0.1, 1.0 / 3.0, -2e-17};
  mmr::save_checkpoint(dir / "m.json", m);
  const auto back = mmr::load_checkpoint(dir / "m.json");
  CHECK(mmr::flatten(back) == mmr::flatten(m));
  CHECK(back.extractor.layers.size() == 2);
  CHECK(back.extractor.layers[0].activation == mmr::Activation::relu);

  auto j = mmr::model_to_json(m);
  j["head"]["bias"].push_back(1.0);
  CHECK_THROWS(mmr::model_from_json(j));
  CHECK_THROWS(mmr::load_checkpoint(dir / "nope.json"));
}
