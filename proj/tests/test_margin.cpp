#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmr/margin.hpp"
#include "mmr/oracle.hpp"
#include "mmr/trainer.hpp"
#include "support.hpp"

using mmr::LinearHead;
using mmr::Matrix;

namespace {

LinearHead head(Matrix w, std::vector<double> b) { return {std::move(w), std::move(b)}; }

std::vector<double> v(std::initializer_list<double> x) { return x; }

}  // namespace

TEST_CASE("pair_distance") {
  const auto h = head(Matrix{{1, 0}, {-1, 0}}, {0, 0});
  const auto pq = mmr::PairBoundary::between(h, 0, 1);
  CHECK(pq.w_diff == v({2, 0}));
  CHECK(mmr::pair_distance(pq, v({1.5, 2.0})) == doctest::Approx(1.5).epsilon(1e-15));

  const auto h2 = head(Matrix{{1, 0}, {0, 1}}, {0, 0});
  const auto b2 = mmr::PairBoundary::between(h2, 0, 1);
  CHECK(mmr::pair_distance(b2, v({1, 1})) == 0.0);
  CHECK(std::abs(mmr::pair_distance(b2, v({0, 2})) - -1.4142135623730951) < 1e-15);

  const auto flat = head(Matrix{{1, 1}, {1, 1}}, {0, 1});
  CHECK_THROWS_AS(mmr::pair_distance(mmr::PairBoundary::between(flat, 0, 1), v({1, 1})),
                  mmr::DegenerateBoundary);
  CHECK_THROWS(mmr::PairBoundary::between(h2, 1, 1));
}

TEST_CASE("competitive_class") {
  CHECK(mmr::competitive_class(v({0.3, 0.9, 0.5}), 0) == 1);
  CHECK(mmr::competitive_class(v({0.3, 0.9, 0.5}), 1) == 2);
  CHECK(mmr::competitive_class(v({0.5, 0.5, 0.1}), 2) == 0);
}

TEST_CASE("true_margin") {
  const auto h = head(Matrix{{1, 0}, {0, 1}}, {0, 0});
  CHECK(std::abs(mmr::true_margin(h, v({2, 1}), 0) - 0.7071067811865476) < 1e-15);
  CHECK(mmr::true_margin(h, v({2, 1}), 1) < 0);
  CHECK(mmr::true_margin(h, v({1, 1}), 0) == 0.0);
  CHECK(mmr::true_margin(h, v({5, -3}), 0) > 0);
}

TEST_CASE("mms") {
  const auto h = head(Matrix{{1, 0}, {0, 1}, {-1, -1}}, {0, 0, 0});
  const auto e = mmr::mms(h, v({2, 1}));
  CHECK(e.top_class == 0);
  CHECK(e.runner_up == 1);
  CHECK(std::abs(e.mms - 0.7071067811865476) < 1e-15);

  const auto tie = head(Matrix{{1, 2}, {2, 1}}, {0, 0});
  CHECK(mmr::mms(tie, v({1, 1})).mms == 0.0);
  CHECK(mmr::mms(tie, v({1, 1})).top_class == 0);

  const auto same = head(Matrix{{1, 2}, {1, 2}}, {0.5, 0.5});
  CHECK(mmr::mms(same, v({3, 1})).mms == 0.0);
  const auto offset = head(Matrix{{1, 2}, {1, 2}}, {0.5, 0.0});
  CHECK(mmr::mms(offset, v({3, 1})).mms == mmr::kNoBoundary);
}

TEST_CASE("score_batch parallel path matches the serial reference") {
  mmr::Rng rng(21);
  const auto h = head(testing::random_matrix(5, 4, rng), {0.1, 0.2, -0.3, 0.0, 0.5});
  const Matrix phi = testing::random_matrix(300, 4, rng);
  std::vector<mmr::ClassIndex> labels;
  for (std::size_t i = 0; i < 300; ++i) labels.push_back(rng.below(5));
  for (int threads : {1, 3}) {
    mmr::set_thread_count(threads);
    const auto a = mmr::score_batch(h, phi, labels);
    const auto b = mmr::score_batch_reference(h, phi, labels);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].top_class == b[i].top_class);
      CHECK(a[i].runner_up == b[i].runner_up);
      CHECK(a[i].mms == b[i].mms);
      CHECK(*a[i].true_margin == *b[i].true_margin);
    }
  }
  mmr::set_thread_count(0);
}

TEST_CASE("true_margin sign agrees with correctness") {
  mmr::Rng rng(22);
  const auto h = head(testing::random_matrix(4, 3, rng), {0, 0.5, -0.5, 1});
  const Matrix phi = testing::random_matrix(200, 3, rng);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto y = static_cast<mmr::ClassIndex>(rng.below(4));
    const auto s = h.scores(phi.row(i));
    bool correct = true;
    for (std::size_t j = 0; j < 4; ++j)
      if (j != y && s[j] >= s[y]) correct = false;
    CHECK((mmr::true_margin(h, phi.row(i), y) > 0) == correct);
  }
}

TEST_CASE("mms agrees with the brute-force oracle") {
  mmr::Rng rng(23);
  for (int k = 0; k < 500; ++k) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t d = 2 + rng.below(4);
    const Matrix w = testing::random_matrix(n, d, rng);
    std::vector<double> b(n);
    for (double& x : b) x = rng.uniform(-2, 2);
    std::vector<double> phi(d);
    for (double& x : phi) x = rng.uniform(-2, 2);
    CHECK(std::abs(mmr::mms(head(w, b), phi).mms - mmr::oracle::brute_force_mms(w, b, phi)) <= 1e-9);
  }
}

TEST_CASE("two classes collapse to the score gap formula") {
  mmr::Rng rng(24);
  for (int k = 0; k < 50; ++k) {
    const Matrix w = testing::random_matrix(2, 3, rng);
    const std::vector<double> b{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<double> phi{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    double gap = b[0] - b[1];
    double nn = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      gap += (w(0, j) - w(1, j)) * phi[j];
      nn += std::pow(w(0, j) - w(1, j), 2);
    }
    CHECK(mmr::oracle::brute_force_mms(w, b, phi) == doctest::Approx(std::abs(gap) / std::sqrt(nn)));
  }
}

TEST_CASE("top-ranked class can change before the top-2 boundary is reached") {
  // Moving φ towards the (0,1) boundary lets class 2 overtake class 0 first,
  // so only the pairwise order of the top two is guaranteed to survive.
  const auto h = head(Matrix{{1, 0}, {0, 1}, {-3, -1}}, {0, 0, 7.9});
  const std::vector<double> phi{2, 1};
  const auto e = mmr::mms(h, phi);
  REQUIRE(e.top_class == 0);
  REQUIRE(e.runner_up == 1);
  const double d = e.mms;
  const double u[] = {1 / std::sqrt(2.0), -1 / std::sqrt(2.0)};
  const double eps = 1e-6 * (1 + d);
  const std::vector<double> before{phi[0] - (d - eps) * u[0], phi[1] - (d - eps) * u[1]};
  const std::vector<double> after{phi[0] - (d + eps) * u[0], phi[1] - (d + eps) * u[1]};
  const auto sb = h.scores(before);
  const auto sa = h.scores(after);
  CHECK(sb[0] > sb[1]);
  CHECK(sa[1] > sa[0]);
  CHECK(sb[2] > sb[0]);
}

TEST_CASE("phi_max_norm") {
  CHECK(mmr::phi_max_norm(Matrix{{3, 4}, {1, 0}}) == 5.0);
  CHECK(mmr::phi_max_norm(Matrix{{0, 0}}) == 0.0);
  CHECK(mmr::phi_max_row(Matrix{{1, 0}, {3, 4}, {0, 5}}) == 1);
  CHECK_THROWS(mmr::phi_max_norm(Matrix(0, 2)));
  mmr::Rng rng(25);
  const Matrix m = testing::random_matrix(10, 3, rng);
  Matrix scaled = m;
  for (double& x : scaled.values()) x *= 4.0;
  CHECK(mmr::phi_max_norm(scaled) == 4.0 * mmr::phi_max_norm(m));
}

TEST_CASE("summarize_mms excludes sentinels") {
  std::vector<mmr::MarginEntry> e(4);
  e[0].mms = 0.5;
  e[1].mms = mmr::kNoBoundary;
  e[2].mms = 1.5;
  e[3].mms = 4.0;
  const auto s = mmr::summarize_mms(e);
  CHECK(s.count == 4);
  CHECK(s.sentinels == 1);
  CHECK(s.min == 0.5);
  CHECK(s.median == 1.5);
  CHECK(s.mean == 2.0);
  CHECK(s.max == 4.0);
}
