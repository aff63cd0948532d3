#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mmr/numeric.hpp"

// Verification routines. They depend only on numeric primitives and closed
// form math, never on the margin/objective/model code they are used to check.

namespace mmr::oracle {

/// Unstable evaluation point (an argmax could flip inside the stencil).
class UnstablePoint : public Error {
 public:
  using Error::Error;
};

class NotSeparable : public Error {
 public:
  using Error::Error;
};

/// Distance from φ to the boundary between its two highest-scoring classes,
/// found by constructing the foot of the perpendicular and measuring the
/// displacement. `weight` is n × d with one row per class.
/// Degenerate pairs follow the margin convention (0 if tied, +inf otherwise).
double brute_force_mms(const Matrix& weight, std::span<const double> bias,
                       std::span<const double> phi);

struct GradCheckReport {
  std::vector<double> relative_errors;  // |a − n| / max(1, |a|, |n|) per coordinate
  std::vector<double> numeric;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  double epsilon = 0.0;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(p + εe_i) − f(p − εe_i)) / 2ε for every coordinate.
std::vector<double> central_difference(const ScalarFunction& f, std::span<const double> params,
                                       double epsilon = 1e-6);

/// Compares `analytic` against central differences of f at `params`.
GradCheckReport finite_diff_grad(const ScalarFunction& f, std::span<const double> params,
                                 std::span<const double> analytic, double epsilon = 1e-6);

/// Smallest score gap that decides a top-1/top-2 choice or a competitive
/// class (label-excluded argmax), relative to the row norm:
///   min_i min(gap_i) / max(1, ‖s_i‖).
/// An empty label span checks only the top-2 order.
double argmax_stability(const Matrix& scores, std::span<const std::size_t> labels);

/// Throws UnstablePoint unless every gap exceeds 10·ε·‖s_i‖.
void require_argmax_stable(const Matrix& scores, std::span<const std::size_t> labels,
                           double epsilon);

using Point2 = std::array<double, 2>;

struct Separator2d {
  Point2 normal{};  // unit, pointing toward the positive set
  double offset = 0.0;
  double margin = 0.0;

  double signed_distance(const Point2& x) const {
    return normal[0] * x[0] + normal[1] * x[1] + offset;
  }
};

/// Exact maximum-margin line between two finite 2-D point sets, by
/// enumerating separators supported by one point of each set or by two
/// points of one set and one of the other. Throws NotSeparable when the best
/// candidate margin is not positive.
Separator2d max_margin_2d(std::span<const Point2> positive, std::span<const Point2> negative);

}  // namespace mmr::oracle
