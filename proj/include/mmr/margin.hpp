#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mmr/data.hpp"
#include "mmr/model.hpp"

namespace mmr {

/// Weight-difference norms at or below this are treated as "no boundary".
inline constexpr double kDegenerateNorm = 1e-12;

/// Returned as the MMS of a sample whose top-2 classes share a weight vector
/// but differ in bias: no boundary separates them, so it is never selected.
inline constexpr double kNoBoundary = std::numeric_limits<double>::infinity();

class DegenerateBoundary : public Error {
 public:
  using Error::Error;
};

/// ℓ_{p,q} = {x : w_diffᵀx + b_diff = 0}, with w_diff = w_p − w_q.
struct PairBoundary {
  std::vector<double> w_diff;
  double b_diff = 0.0;
  ClassIndex p = 0;
  ClassIndex q = 0;

  static PairBoundary between(const LinearHead& head, ClassIndex p, ClassIndex q);
};

/// Signed distance (w_diffᵀx + b_diff) / ‖w_diff‖; positive where p outscores q.
/// Throws DegenerateBoundary when ‖w_diff‖ ≤ 1e-12.
double pair_distance(const PairBoundary& boundary, std::span<const double> x);

/// argmax_{j ≠ y} scores[j], lowest index on ties.
ClassIndex competitive_class(std::span<const double> scores, ClassIndex y);

/// Signed distance of φ to the boundary between y and its competitive class.
/// Non-negative iff y is (weakly) top-scored.
double true_margin(const LinearHead& head, std::span<const double> phi, ClassIndex y);

struct MarginEntry {
  ClassIndex top_class = 0;
  ClassIndex runner_up = 0;
  double mms = 0.0;
  std::optional<double> true_margin;
};

/// Top-1/top-2 classes (lowest index on ties) and
///   d = (s_top − s_runner) / ‖w_top − w_runner‖.
/// A degenerate top-2 pair gives 0 when the scores tie and kNoBoundary otherwise.
MarginEntry mms(const LinearHead& head, std::span<const double> phi);

/// Same, from precomputed scores for φ.
MarginEntry mms_from_scores(const LinearHead& head, std::span<const double> scores);

/// Scores every row of `features`. When `labels` is non-empty, the signed
/// true margin is filled in as well (degenerate pairs follow the mms
/// convention with the sign of the score gap). Parallel over samples.
std::vector<MarginEntry> score_batch(const LinearHead& head, const Matrix& features,
                                     std::span<const ClassIndex> labels = {});
std::vector<MarginEntry> score_batch_reference(const LinearHead& head, const Matrix& features,
                                               std::span<const ClassIndex> labels = {});

/// Same, reusing an already computed score matrix (rows aligned with samples).
std::vector<MarginEntry> score_batch_from_scores(const LinearHead& head, const Matrix& scores,
                                                 std::span<const ClassIndex> labels = {});

std::vector<double> mms_values(std::span<const MarginEntry> entries);

/// max_i ‖φ_i‖ over the batch; throws on an empty batch.
double phi_max_norm(const Matrix& features);

/// Row index attaining phi_max_norm (lowest on ties).
std::size_t phi_max_row(const Matrix& features);

struct MmsSummary {
  std::size_t count = 0;
  std::size_t sentinels = 0;  // kNoBoundary entries, excluded from the statistics
  double min = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

MmsSummary summarize_mms(std::span<const MarginEntry> entries);

}  // namespace mmr
