#include "mmr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mmr::oracle {

double brute_force_mms(const Matrix& weight, std::span<const double> bias,
                       std::span<const double> phi) {
  const std::size_t n = weight.rows();
  const std::size_t d = weight.cols();
  if (n < 2) throw Error("brute_force_mms: need at least 2 classes");
  if (bias.size() != n || phi.size() != d) throw DimensionError("brute_force_mms: shape mismatch");

  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) s[j] = dot(weight.row(j), phi) + bias[j];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  const std::size_t top = order[0];
  const std::size_t second = order[1];

  // Boundary {x : aᵀx + c = 0} between the two leading classes.
  std::vector<double> a(d);
  for (std::size_t k = 0; k < d; ++k) a[k] = weight(top, k) - weight(second, k);
  const double c = bias[top] - bias[second];
  const double a_sq = dot(a, a);
  const double value = dot(a, phi) + c;
  if (std::sqrt(a_sq) <= 1e-12) {
    return std::abs(value) <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
  }

  // Foot of the perpendicular p = φ − (value/‖a‖²)·a; distance ‖φ − p‖.
  const double step = value / a_sq;
  double dist_sq = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double foot = phi[k] - step * a[k];
    const double delta = phi[k] - foot;
    dist_sq += delta * delta;
  }
  return std::sqrt(dist_sq);
}

std::vector<double> central_difference(const ScalarFunction& f, std::span<const double> params,
                                       double epsilon) {
  if (!(epsilon > 0.0)) throw Error("central_difference: epsilon must be positive");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + epsilon;
    const double up = f(p);
    p[i] = saved - epsilon;
    const double down = f(p);
    p[i] = saved;
    grad[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

GradCheckReport finite_diff_grad(const ScalarFunction& f, std::span<const double> params,
                                 std::span<const double> analytic, double epsilon) {
  if (analytic.size() != params.size()) throw DimensionError("finite_diff_grad: length mismatch");
  GradCheckReport r;
  r.epsilon = epsilon;
  r.numeric = central_difference(f, params, epsilon);
  r.relative_errors.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double a = analytic[i];
    const double n = r.numeric[i];
    const double err = std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
    r.relative_errors[i] = err;
    if (i == 0 || err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
      r.analytic_at_worst = a;
      r.numeric_at_worst = n;
    }
  }
  return r;
}

double argmax_stability(const Matrix& scores, std::span<const std::size_t> labels) {
  if (!labels.empty() && labels.size() != scores.rows()) {
    throw DimensionError("argmax_stability: label count mismatch");
  }
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto s = scores.row(i);
    std::vector<double> sorted(s.begin(), s.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double gap = sorted[0] - sorted[1];
    if (!labels.empty()) {
      std::vector<double> others;
      for (std::size_t j = 0; j < s.size(); ++j)
        if (j != labels[i]) others.push_back(s[j]);
      std::sort(others.begin(), others.end(), std::greater<>());
      if (others.size() >= 2) gap = std::min(gap, others[0] - others[1]);
    }
    worst = std::min(worst, gap / std::max(1.0, l2_norm(s)));
  }
  return worst;
}

void require_argmax_stable(const Matrix& scores, std::span<const std::size_t> labels,
                           double epsilon) {
  const double stability = argmax_stability(scores, labels);
  if (!(stability > 10.0 * epsilon)) {
    throw UnstablePoint("evaluation point is within " + std::to_string(stability) +
                        " (relative) of an argmax switch; need > " +
                        std::to_string(10.0 * epsilon));
  }
}

Separator2d max_margin_2d(std::span<const Point2> positive, std::span<const Point2> negative) {
  if (positive.empty() || negative.empty()) throw Error("max_margin_2d: both sets must be nonempty");

  Separator2d best;
  best.margin = -std::numeric_limits<double>::infinity();
  const auto consider = [&](double nx, double ny, double offset) {
    Separator2d cand{{nx, ny}, offset, std::numeric_limits<double>::infinity()};
    for (const auto& p : positive) cand.margin = std::min(cand.margin, cand.signed_distance(p));
    for (const auto& q : negative) cand.margin = std::min(cand.margin, -cand.signed_distance(q));
    if (cand.margin > best.margin) best = cand;
  };

  // One support point per side: normal along p − q, line through the midpoint.
  for (const auto& p : positive) {
    for (const auto& q : negative) {
      const double dx = p[0] - q[0];
      const double dy = p[1] - q[1];
      const double len = std::hypot(dx, dy);
      if (len == 0.0) continue;
      const double nx = dx / len;
      const double ny = dy / len;
      consider(nx, ny, -(nx * (p[0] + q[0]) + ny * (p[1] + q[1])) / 2.0);
    }
  }

  // Two support points on one side, one on the other: line parallel to the
  // pair, halfway to the third point.
  const auto pairs_from = [&](std::span<const Point2> same, std::span<const Point2> other,
                              bool same_is_positive) {
    for (std::size_t i = 0; i < same.size(); ++i) {
      for (std::size_t j = i + 1; j < same.size(); ++j) {
        const double dx = same[j][0] - same[i][0];
        const double dy = same[j][1] - same[i][1];
        const double len = std::hypot(dx, dy);
        if (len == 0.0) continue;
        for (const auto& c : other) {
          double nx = -dy / len;
          double ny = dx / len;
          const double side = nx * (same[i][0] - c[0]) + ny * (same[i][1] - c[1]);
          // Orient the normal toward the positive set.
          if ((side < 0.0) == same_is_positive) {
            nx = -nx;
            ny = -ny;
          }
          const double mid = (nx * (same[i][0] + c[0]) + ny * (same[i][1] + c[1])) / 2.0;
          consider(nx, ny, -mid);
        }
      }
    }
  };
  pairs_from(positive, negative, true);
  pairs_from(negative, positive, false);

  if (!(best.margin > 0.0)) {
    throw NotSeparable("max_margin_2d: point sets are not linearly separable (best margin " +
                       std::to_string(best.margin) + ")");
  }
  return best;
}

}  // namespace mmr::oracle
