#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "mmr/data.hpp"
#include "mmr/model.hpp"
#include "mmr/objective.hpp"
#include "mmr/rng.hpp"

// Randomized sweeps that pit the margin, objective and trainer code against
// the independent routines in oracle.hpp. Used by the gradcheck and
// oracle-sweep subcommands and by the acceptance suite.

namespace mmr::verify {

struct OracleSweepOptions {
  std::size_t draws = 10000;
  std::size_t min_classes = 2;
  std::size_t max_classes = 6;
  std::size_t min_dim = 2;
  std::size_t max_dim = 5;
  double entry_range = 2.0;  // entries uniform in [−range, range]
  double tolerance = 1e-9;
  std::uint64_t seed = 2024;
};

struct OracleSweepSummary {
  std::size_t draws = 0;
  std::size_t mismatches = 0;
  double max_abs_difference = 0.0;
  std::size_t crossing_failures = 0;
  double seconds = 0.0;

  bool passed() const { return mismatches == 0 && crossing_failures == 0; }
  nlohmann::json to_json() const;
};

/// mms() against oracle::brute_force_mms, plus the crossing property: moving
/// φ by (d + ε)·u flips the order of the top two classes and (d − ε)·u keeps
/// it, with u the unit normal of their boundary and ε = 1e-6·(1 + d).
OracleSweepSummary oracle_sweep(const OracleSweepOptions& options);

/// Crossing property for one draw. Returns false when it is violated.
bool crossing_holds(const LinearHead& head, std::span<const double> phi);

struct GradcheckOptions {
  std::size_t models = 100;
  std::size_t input_dim = 2;
  std::size_t hidden = 8;
  std::size_t n_classes = 3;
  std::size_t batch = 6;
  double epsilon = 1e-6;
  double tolerance = 1e-4;
  LossMode mode = LossMode::cross_entropy;
  bool mmr_enabled = true;
  // true: φ_max is differentiated through the max-norm row and the finite
  // difference sees the real loss; false: φ_max is frozen at the base point in
  // both the analytic gradient and the finite-difference evaluator.
  bool feature_grad = true;
  std::uint64_t seed = 99;
};

struct GradcheckSummary {
  std::size_t models = 0;
  std::size_t rejected_points = 0;  // draws discarded by the stability screen
  double max_relative_error = 0.0;
  std::size_t worst_model = 0;
  std::size_t worst_parameter = 0;
  double seconds = 0.0;
  double tolerance = 0.0;
  double epsilon = 0.0;

  bool passed() const { return max_relative_error < tolerance; }
  nlohmann::json to_json() const;
};

/// Composite-loss gradients of random input→hidden→classes models against
/// central differences, at points screened for argmax stability, relu kinks
/// and a unique max-norm feature row.
GradcheckSummary gradcheck_sweep(const GradcheckOptions& options);

/// Loss value recomputed from a forward pass with the competitive classes
/// (and, unless `phi_max` < 0, the feature-norm scale) held at given values.
double reference_composite(const Model& model, const Matrix& inputs,
                           std::span<const ClassIndex> labels,
                           std::span<const ClassIndex> competitors, double alpha, LossMode mode,
                           bool mmr_enabled, double phi_max);

struct LineageOptions {
  std::size_t instances = 50;
  std::size_t per_side = 10;
  double min_margin = 0.2;
  std::vector<double> lambda_grid{10.0, 100.0, 1000.0, 10000.0, 100000.0};
  std::size_t steps = 20000;
  double tolerance = 0.05;  // relative
  std::uint64_t seed = 4242;
};

struct LineageInstance {
  double oracle_margin = 0.0;
  double trained_margin = 0.0;
  double best_lambda = 0.0;
  double relative_gap = 0.0;
};

struct LineageSummary {
  std::vector<LineageInstance> instances;
  double worst_relative_gap = 0.0;
  double seconds = 0.0;
  double tolerance = 0.0;

  bool passed() const { return worst_relative_gap <= tolerance; }
};

/// Random separable 2-class point sets in [−2, 2]² whose generating line
/// leaves every point at least `min_margin` away.
Dataset separable_instance(std::size_t per_side, double min_margin, Rng& rng);

/// Fits hinge + pairwise-penalty heads for each λ in the grid, keeps the one
/// with the largest training margin and compares it with the exact 2-D
/// maximum-margin separator.
LineageSummary svm_lineage(const LineageOptions& options);

}  // namespace mmr::verify
