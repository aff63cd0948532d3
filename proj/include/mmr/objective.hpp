#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmr/data.hpp"
#include "mmr/model.hpp"

namespace mmr {

enum class LossMode { cross_entropy, hinge };

std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

struct RiskResult {
  std::vector<double> losses;  // per sample
  Matrix d_scores;             // dΣloss/dscores
};

/// loss_i = logsumexp(s_i) − s_i[y_i]; gradient softmax(s_i) − onehot(y_i).
RiskResult cross_entropy(const Matrix& scores, std::span<const ClassIndex> labels);

/// Multi-class hinge on the (y_i, m_i) pair, m_i the competitive class at
/// the given scores: max(0, 1 − (s_y − s_m)). At exactly 1 the loss and its
/// subgradient are both 0.
RiskResult hinge_from_scores(const Matrix& scores, std::span<const ClassIndex> labels);

struct HingeResult {
  std::vector<double> losses;
  Matrix grad_weight;
  std::vector<double> grad_bias;
};

/// Hinge risk of a linear head applied directly to `features`.
HingeResult hinge_risk(const LinearHead& head, const Matrix& features,
                       std::span<const ClassIndex> labels);

struct MmrResult {
  std::vector<double> per_sample;  // R_i
  Matrix d_weight;                 // dΣR_i/dW with m_i and phi_max held fixed
  double weight_gap_sq_total = 0.0;  // Σ_i ‖w_{y_i} − w_{m_i}‖²
};

/// R_i = ‖w_{y_i} − w_{m_i}‖² · phi_max², m_i taken from `scores`.
MmrResult mmr_term(const LinearHead& head, std::span<const ClassIndex> labels,
                   const Matrix& scores, double phi_max);

struct AlphaSchedule {
  enum class Mode { constant, linear };
  Mode mode = Mode::constant;
  double start = 1e-5;
  double end = 1e-5;
  std::size_t total_steps = 0;
};

/// constant → start; linear → start + (end − start)·min(step/total, 1).
double alpha_at(const AlphaSchedule& schedule, std::size_t step);

struct LossBreakdown {
  double ce_total = 0.0;  // risk total (hinge risk in hinge mode)
  double mmr_total = 0.0;
  double composite = 0.0;  // alpha · mmr_total + ce_total
  double alpha = 0.0;
  double phi_max = 0.0;
  std::vector<double> per_sample_ce;
  std::vector<double> per_sample_mmr;
};

struct CompositeOptions {
  LossMode mode = LossMode::cross_entropy;
  double alpha = 0.0;
  bool mmr_enabled = false;
  // Route d(phi_max²)/dφ into the extractor through the max-norm row.
  bool mmr_feature_grad = false;
};

struct CompositeResult {
  LossBreakdown breakdown;
  Gradients gradients;
};

/// L = α Σ R_i + Σ C_i over the batch in `cache`. The head weight gradient
/// is the risk gradient plus α·dR/dW; the extractor only sees the risk
/// gradient unless `mmr_feature_grad` is set.
CompositeResult composite_loss(const Model& model, const ForwardCache& cache,
                               std::span<const ClassIndex> labels, const CompositeOptions& options);

}  // namespace mmr
