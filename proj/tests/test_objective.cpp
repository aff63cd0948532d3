#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmr/margin.hpp"
#include "mmr/objective.hpp"
#include "mmr/oracle.hpp"
#include "mmr/verification.hpp"
#include "support.hpp"

using mmr::LinearHead;
using mmr::Matrix;

namespace {

std::vector<mmr::ClassIndex> labels(std::initializer_list<mmr::ClassIndex> l) { return l; }

mmr::Model linear_model(Matrix w, std::vector<double> b) {
  mmr::Model m;
  m.extractor.input_dim = w.cols();
  m.head = {std::move(w), std::move(b)};
  return m;
}

}  // namespace

TEST_CASE("cross_entropy") {
  const auto r = mmr::cross_entropy(Matrix{{0, 0, 0}}, labels({0}));
  CHECK(r.losses[0] == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(r.d_scores(0, 0) == doctest::Approx(1.0 / 3 - 1));
  CHECK(r.d_scores(0, 1) == doctest::Approx(1.0 / 3));
  CHECK(r.d_scores(0, 2) == doctest::Approx(1.0 / 3));

  const auto big = mmr::cross_entropy(Matrix{{1000, 0, 0}}, labels({0}));
  CHECK(std::isfinite(big.losses[0]));
  CHECK(big.losses[0] < 1e-300);

  const auto r3 = mmr::cross_entropy(Matrix{{1, 2, 3}}, labels({2}));
  CHECK(std::abs(r3.losses[0] - 0.4076059644443806) < 1e-14);

  mmr::Rng rng(2);
  const Matrix s = testing::random_matrix(20, 5, rng, -30, 30);
  std::vector<mmr::ClassIndex> y;
  for (int i = 0; i < 20; ++i) y.push_back(rng.below(5));
  const auto g = mmr::cross_entropy(s, y);
  for (std::size_t i = 0; i < 20; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < 5; ++j) row += g.d_scores(i, j);
    CHECK(std::abs(row) <= 1e-12);
  }
  CHECK_THROWS(mmr::cross_entropy(Matrix{{1, 2}}, labels({2})));
}

TEST_CASE("hinge_risk") {
  // features are one-hot rows and W = I, so the score gap is set by hand.
  const LinearHead h{Matrix::identity(2), {0, 0}};
  const auto r = mmr::hinge_risk(h, Matrix{{2, 0}, {0.5, 0}, {1, 0}}, labels({0, 0, 0}));
  CHECK(r.losses[0] == 0.0);
  CHECK(r.losses[1] == 0.5);
  CHECK(r.losses[2] == 0.0);
  // only sample 1 is active: dW row 0 = −x₁, row 1 = +x₁
  CHECK(r.grad_weight == Matrix{{-0.5, 0}, {0.5, 0}});
  CHECK(r.grad_bias == std::vector<double>{-1, 1});

  const auto at_kink = mmr::hinge_risk(h, Matrix{{1, 0}}, labels({0}));
  CHECK(at_kink.losses[0] == 0.0);
  CHECK(at_kink.grad_weight == Matrix(2, 2));
}

TEST_CASE("hinge subgradient matches finite differences away from kinks") {
  mmr::Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const LinearHead h{testing::random_matrix(3, 2, rng), {0.1, -0.2, 0.3}};
    const Matrix x = testing::random_matrix(6, 2, rng);
    std::vector<mmr::ClassIndex> y;
    for (int i = 0; i < 6; ++i) y.push_back(rng.below(3));
    const Matrix scores = mmr::head_scores(h, x);
    bool stable = true;
    for (std::size_t i = 0; i < 6; ++i) {
      const auto s = scores.row(i);
      const auto m = mmr::competitive_class(s, y[i]);
      stable &= std::abs(1.0 - (s[y[i]] - s[m])) > 1e-4;
      for (std::size_t j = 0; j < 3; ++j)
        if (j != y[i] && j != m) stable &= std::abs(s[m] - s[j]) > 1e-4;
    }
    if (!stable) continue;
    ++checked;
    const auto r = mmr::hinge_risk(h, x, y);
    std::vector<double> params(h.weight.values().begin(), h.weight.values().end());
    params.insert(params.end(), h.bias.begin(), h.bias.end());
    std::vector<double> analytic(r.grad_weight.values().begin(), r.grad_weight.values().end());
    analytic.insert(analytic.end(), r.grad_bias.begin(), r.grad_bias.end());
    const auto f = [&](std::span<const double> p) {
      LinearHead q{Matrix(3, 2, std::vector<double>(p.begin(), p.begin() + 6)),
                   std::vector<double>(p.begin() + 6, p.end())};
      const Matrix s = mmr::head_scores(q, x);
      double total = 0;
      for (std::size_t i = 0; i < 6; ++i) {
        double best = -1e300;
        for (std::size_t j = 0; j < 3; ++j)
          if (j != y[i]) best = std::max(best, s(i, j));
        total += std::max(0.0, 1.0 - (s(i, y[i]) - best));
      }
      return total;
    };
    CHECK(mmr::oracle::finite_diff_grad(f, params, analytic).max_relative_error < 1e-5);
  }
  CHECK(checked > 10);
}

TEST_CASE("mmr_term") {
  const LinearHead h{Matrix{{1, 0}, {0, 1}}, {0, 0}};
  const Matrix scores{{2, 1}};
  const auto r = mmr::mmr_term(h, labels({0}), scores, std::sqrt(2.0));
  CHECK(r.per_sample[0] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(r.d_weight(0, 0) == doctest::Approx(4.0));
  CHECK(r.d_weight(0, 1) == doctest::Approx(-4.0));
  CHECK(r.d_weight(1, 0) == doctest::Approx(-4.0));
  CHECK(r.d_weight(1, 1) == doctest::Approx(4.0));

  const LinearHead same{Matrix{{1, 1}, {1, 1}}, {0, 0}};
  const auto z = mmr::mmr_term(same, labels({0}), scores, 3.0);
  CHECK(z.per_sample[0] == 0.0);
  CHECK(z.d_weight == Matrix(2, 2));

  const auto zero = mmr::mmr_term(h, labels({0, 1}), Matrix{{2, 1}, {0, 3}}, 0.0);
  CHECK(zero.per_sample == std::vector<double>{0, 0});
}

TEST_CASE("mmr_term depends only on row differences") {
  mmr::Rng rng(6);
  Matrix w = testing::random_matrix(4, 3, rng);
  const LinearHead h{w, {0, 0, 0, 0}};
  const Matrix scores = testing::random_matrix(5, 4, rng);
  const auto y = labels({0, 3, 2, 1, 1});
  const auto a = mmr::mmr_term(h, y, scores, 1.7);
  const double shift[] = {0.3, -1.2, 2.5};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) w(i, j) += shift[j];
  const auto b = mmr::mmr_term(LinearHead{w, {0, 0, 0, 0}}, y, scores, 1.7);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(a.per_sample[i] - b.per_sample[i]) <= 1e-10);
}

TEST_CASE("alpha_at") {
  const mmr::AlphaSchedule constant{mmr::AlphaSchedule::Mode::constant, 1e-5, 1e-5, 0};
  CHECK(mmr::alpha_at(constant, 0) == 1e-5);
  CHECK(mmr::alpha_at(constant, 123456) == 1e-5);
  const mmr::AlphaSchedule linear{mmr::AlphaSchedule::Mode::linear, 1e-5, 1e-3, 1000};
  CHECK(mmr::alpha_at(linear, 0) == 1e-5);
  CHECK(mmr::alpha_at(linear, 1000) == 1e-3);
  CHECK(mmr::alpha_at(linear, 5000) == 1e-3);
  CHECK(std::abs(mmr::alpha_at(linear, 500) - 5.05e-4) < 1e-18);
  CHECK_THROWS(mmr::alpha_at({mmr::AlphaSchedule::Mode::linear, 1e-5, 1e-3, 0}, 1));
}

TEST_CASE("composite_loss bookkeeping") {
  const auto model = mmr::init_model(std::vector<std::size_t>{2, 6}, 3, 4);
  mmr::Rng rng(8);
  const Matrix x = testing::random_matrix(7, 2, rng);
  const auto y = labels({0, 1, 2, 0, 1, 2, 0});
  const auto cache = mmr::forward(model, x);

  const auto plain = mmr::composite_loss(model, cache, y, {mmr::LossMode::cross_entropy, 0.0, false, false});
  const auto zero = mmr::composite_loss(model, cache, y, {mmr::LossMode::cross_entropy, 0.0, true, false});
  CHECK(zero.breakdown.composite == plain.breakdown.ce_total);
  CHECK(mmr::flatten(zero.gradients) == mmr::flatten(plain.gradients));

  const auto one = mmr::composite_loss(model, cache, y, {mmr::LossMode::cross_entropy, 0.3, true, false});
  const auto two = mmr::composite_loss(model, cache, y, {mmr::LossMode::cross_entropy, 0.6, true, false});
  CHECK(two.breakdown.composite - two.breakdown.ce_total ==
        doctest::Approx(2 * (one.breakdown.composite - one.breakdown.ce_total)).epsilon(1e-14));
  CHECK(std::abs(one.breakdown.composite - (0.3 * one.breakdown.mmr_total + one.breakdown.ce_total)) <= 1e-12);
  double s = 0;
  for (double v : one.breakdown.per_sample_mmr) s += v;
  CHECK(std::abs(s - one.breakdown.mmr_total) <= 1e-10);
  CHECK(one.breakdown.phi_max == mmr::phi_max_norm(cache.features()));

  // With φ_max held constant the extractor sees only the risk gradient.
  const auto frozen = mmr::composite_loss(model, cache, y, {mmr::LossMode::cross_entropy, 0.3, true, false});
  CHECK(frozen.gradients.layer_weight[0] == plain.gradients.layer_weight[0]);
  const auto routed = mmr::composite_loss(model, cache, y, {mmr::LossMode::cross_entropy, 0.3, true, true});
  CHECK(routed.gradients.head_weight == frozen.gradients.head_weight);
  CHECK(routed.gradients.layer_weight[0] != frozen.gradients.layer_weight[0]);
}

TEST_CASE("composite gradient passes finite differences") {
  for (bool feature_grad : {false, true}) {
    for (auto mode : {mmr::LossMode::cross_entropy, mmr::LossMode::hinge}) {
      mmr::verify::GradcheckOptions o;
      o.models = 20;
      o.mode = mode;
      o.feature_grad = feature_grad;
      o.seed = 31;
      const auto s = mmr::verify::gradcheck_sweep(o);
      CHECK(s.models == 20);
      CHECK(s.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("linear hinge head gradient through composite_loss") {
  const auto model = linear_model(Matrix{{1, 0}, {0, 1}}, {0, 0});
  const auto cache = mmr::forward(model, Matrix{{0.5, 0}});
  const auto r = mmr::composite_loss(model, cache, labels({0}), {mmr::LossMode::hinge, 0.0, false, false});
  CHECK(r.breakdown.ce_total == 0.5);
  CHECK(r.gradients.head_weight == Matrix{{-0.5, 0}, {0.5, 0}});
}
