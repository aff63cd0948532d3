#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "mmr/data.hpp"
#include "mmr/margin.hpp"
#include "mmr/trainer.hpp"
#include "support.hpp"

using mmr::Matrix;

namespace {

mmr::Split blobs_split(std::size_t per_class = 100, double sigma = 1.0) {
  const auto d = mmr::gen_blobs(3, 2, per_class, 4.0, sigma, 7);
  return mmr::Split{d, d.subset(std::vector<std::size_t>{0, 150, 299}), {}};
}

mmr::TrainConfig base_config(mmr::PolicyKind kind, std::size_t pool, std::size_t batch) {
  mmr::TrainConfig c;
  c.policy = {kind, pool, batch};
  c.lr = mmr::LrSchedule::constant(0.1);
  c.total_steps = 60;
  c.eval_interval = 10;
  c.seed = 3;
  return c;
}

mmr::Model linear(std::size_t dim = 2, std::uint64_t seed = 1) {
  return mmr::init_model(std::vector<std::size_t>{dim}, 3, seed);
}

}  // namespace

TEST_CASE("lr_at") {
  const auto c10 = mmr::cifar10_early_drop();
  CHECK(mmr::lr_at(c10, 0) == 0.1);
  CHECK(mmr::lr_at(c10, 24991) == 0.1);
  CHECK(mmr::lr_at(c10, 24992) == 0.01);
  CHECK(mmr::lr_at(c10, 25000) == 0.01);
  CHECK(mmr::lr_at(c10, 27335) == 0.001);
  CHECK(mmr::lr_at(c10, 29678) == 0.0001);
  const auto c100 = mmr::cifar100_early_drop();
  CHECK(mmr::lr_at(c100, 43735) == 0.004);
  CHECK(mmr::lr_at(c100, 43736) == 0.0008);

  const auto f = mmr::LrSchedule::from_factors(0.1, {10, 20}, {0.5, 0.1});
  CHECK(mmr::lr_at(f, 9) == 0.1);
  CHECK(mmr::lr_at(f, 10) == 0.05);
  CHECK(mmr::lr_at(f, 20) == doctest::Approx(0.005));
  CHECK_THROWS((mmr::LrSchedule{{0.1, 0.01}, {5, 5}}.validate()));
  CHECK_THROWS((mmr::LrSchedule{{0.1, 0.01}, {}}.validate()));
  CHECK_THROWS((mmr::LrSchedule{{0.1, -0.01}, {5}}.validate()));
}

TEST_CASE("sgd_step") {
  mmr::Model m;
  m.extractor.input_dim = 1;
  m.head = {Matrix{{1}}, {0}};
  auto g = mmr::Gradients::zeros_like(m);
  mmr::sgd_step(m, g, 0.1);
  CHECK(m.head.weight(0, 0) == 1.0);
  g.head_weight(0, 0) = 2.0;
  mmr::sgd_step(m, g, 0.0);
  CHECK(m.head.weight(0, 0) == 1.0);
  mmr::sgd_step(m, g, 0.1);
  CHECK(m.head.weight(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  g.head_bias[0] = NAN;
  CHECK_THROWS(mmr::sgd_step(m, g, 0.1));
  g.head_bias = {0, 0};
  CHECK_THROWS_AS(mmr::sgd_step(m, g, 0.1), mmr::DimensionError);
}

TEST_CASE("evaluate") {
  mmr::Dataset d;
  d.features = Matrix{{1, 0}, {0, 1}, {-1, -1}};
  d.labels = {0, 1, 2};
  d.n_classes = 3;
  mmr::Model m;
  m.extractor.input_dim = 2;
  m.head = {Matrix{{1, 0}, {0, 1}, {-1, -1}}, {0, 0, 0}};
  CHECK(mmr::evaluate(m, d) == 0.0);
  mmr::Model scaled = m;
  for (double& w : scaled.head.weight.values()) w *= 7.5;
  CHECK(mmr::evaluate(scaled, d) == mmr::evaluate(m, d));
  m.head = {Matrix(3, 2), {0, 0, 0}};
  CHECK(mmr::evaluate(m, d) == 1.0);

  const auto bal = mmr::gen_blobs(4, 2, 10, 3, 1, 1);
  mmr::Model flat;
  flat.extractor.input_dim = 2;
  flat.head = {Matrix(4, 2), {1, 1, 1, 1}};
  CHECK(mmr::evaluate(flat, bal) == 1.0);
  CHECK(std::isnan(mmr::evaluate(flat, mmr::Dataset{Matrix(0, 2), {}, 4})));
}

TEST_CASE("train reaches low error on easy blobs") {
  const auto split = blobs_split();
  for (auto kind : {mmr::PolicyKind::random, mmr::PolicyKind::mms}) {
    auto c = base_config(kind, 160, 16);
    c.total_steps = 500;
    c.eval_interval = 50;
    const auto r = mmr::train(c, split, linear());
    CHECK(r.final_train_error < 0.05);
    CHECK(r.metrics.size() == 10);
    CHECK(r.steps_run == 500);
  }
}

TEST_CASE("train logging contract") {
  const auto split = blobs_split();
  auto c = base_config(mmr::PolicyKind::mms, 40, 8);
  c.total_steps = 55;
  const auto r = mmr::train(c, split, linear());
  REQUIRE(r.metrics.size() == 6);
  for (std::size_t i = 0; i < 5; ++i) CHECK(r.metrics[i].step == 10 * (i + 1));
  CHECK(r.metrics.back().step == 55);
  for (const auto& row : r.metrics) {
    CHECK(row.pool_forward == 40);
    CHECK(row.backprop_batch == 8);
    CHECK(row.train_error >= 0.0);
    CHECK(row.train_error <= 1.0);
  }
  auto rc = base_config(mmr::PolicyKind::random, 40, 8);
  for (const auto& row : mmr::train(rc, split, linear()).metrics) {
    CHECK(row.pool_forward == 0);
    CHECK(std::isnan(row.mean_selected_criterion));
  }
}

TEST_CASE("zero steps returns the initial model") {
  auto c = base_config(mmr::PolicyKind::mms, 40, 8);
  c.total_steps = 0;
  const auto m = linear();
  const auto r = mmr::train(c, blobs_split(), m);
  CHECK(r.metrics.empty());
  CHECK(mmr::flatten(r.model) == mmr::flatten(m));
}

TEST_CASE("train is deterministic") {
  const auto split = blobs_split();
  auto c = base_config(mmr::PolicyKind::mms, 40, 8);
  c.mmr_enabled = true;
  c.alpha = {mmr::AlphaSchedule::Mode::constant, 1e-3, 1e-3, 0};
  const auto model = mmr::init_model(std::vector<std::size_t>{2, 6}, 3, 4);
  const auto a = mmr::train(c, split, model);
  mmr::set_thread_count(3);
  const auto b = mmr::train(c, split, model);
  mmr::set_thread_count(0);
  CHECK(mmr::flatten(a.model) == mmr::flatten(b.model));
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].composite == b.metrics[i].composite);
    CHECK(a.metrics[i].validation_error == b.metrics[i].validation_error);
  }
}

TEST_CASE("pool equal to batch reduces every policy to plain minibatch SGD") {
  const auto split = blobs_split();
  const std::size_t b = 16;
  const auto model = linear();

  // Independent minibatch loop: epoch permutation from the trainer's pool
  // stream, contiguous batches, cross-entropy, plain SGD.
  mmr::Model plain = model;
  mmr::Rng stream = mmr::Rng(3).fork(1);
  const std::size_t n = split.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n;
  for (std::size_t t = 0; t < 60; ++t) {
    if (cursor + b > n) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[stream.below(i)]);
      cursor = 0;
    }
    const std::vector<std::size_t> rows(order.begin() + cursor, order.begin() + cursor + b);
    cursor += b;
    std::vector<mmr::ClassIndex> y;
    for (auto r : rows) y.push_back(split.train.labels[r]);
    const auto cache = mmr::forward(plain, split.train.features.select_rows(rows));
    const auto loss = mmr::composite_loss(plain, cache, y, {});
    mmr::sgd_step(plain, loss.gradients, 0.1);
  }

  for (auto kind : {mmr::PolicyKind::random, mmr::PolicyKind::mms, mmr::PolicyKind::hard_negative,
                    mmr::PolicyKind::entropy}) {
    const auto r = mmr::train(base_config(kind, b, b), split, model);
    CHECK(mmr::flatten(r.model) == mmr::flatten(plain));
  }
}

TEST_CASE("target accuracy and early stop") {
  auto c = base_config(mmr::PolicyKind::mms, 40, 8);
  c.target_accuracy = 0.5;
  c.stop_at_target = true;
  c.total_steps = 500;
  const auto r = mmr::train(c, blobs_split(), linear());
  REQUIRE(r.steps_to_target);
  CHECK(r.steps_run == *r.steps_to_target);
  CHECK(1.0 - r.metrics.back().validation_error >= 0.5);
}

TEST_CASE("selection log") {
  auto c = base_config(mmr::PolicyKind::mms, 40, 8);
  c.selection_log = true;
  c.total_steps = 12;
  const auto r = mmr::train(c, blobs_split(), linear());
  REQUIRE(r.selection_log.size() == 12);
  for (const auto& row : r.selection_log) {
    CHECK(row.chosen.count == 8);
    CHECK(row.rejected.count == 32);
    CHECK(row.chosen.max <= row.rejected.min);
  }
}

TEST_CASE("train rejects bad configs and mismatched data") {
  auto c = base_config(mmr::PolicyKind::mms, 8, 16);
  CHECK_THROWS(mmr::train(c, blobs_split(), linear()));
  c = base_config(mmr::PolicyKind::mms, 1000, 16);
  CHECK_THROWS(mmr::train(c, blobs_split(), linear()));
  c = base_config(mmr::PolicyKind::mms, 40, 8);
  CHECK_THROWS_AS(mmr::train(c, blobs_split(), linear(3)), mmr::DimensionError);
}

TEST_CASE("numerical abort keeps the last good model") {
  auto c = base_config(mmr::PolicyKind::random, 40, 8);
  c.lr = mmr::LrSchedule::constant(1e308);
  c.total_steps = 50;
  try {
    mmr::train(c, blobs_split(), linear());
    FAIL("expected an abort");
  } catch (const mmr::NumericalAbort& e) {
    CHECK(mmr::all_finite(mmr::flatten(e.last_good())));
    CHECK(e.step() < 50);
  }
}

TEST_CASE("hinge fit on separable data recovers a positive margin") {
  const auto d = mmr::gen_blobs(2, 2, 15, 4.0, 0.3, 2);
  mmr::HingeFitOptions o;
  o.steps = 3000;
  const auto fit = mmr::fit_hinge_head(d, o);
  CHECK(mmr::evaluate(mmr::Model{{2, {}}, fit.head}, d) == 0.0);
  CHECK(mmr::geometric_margin(fit.head, d) > 0.0);
}
