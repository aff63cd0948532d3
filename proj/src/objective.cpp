#include "mmr/objective.hpp"

#include <algorithm>
#include <cmath>

#include "mmr/margin.hpp"

namespace mmr {

namespace {

void check_labels(const Matrix& scores, std::span<const ClassIndex> labels) {
  if (labels.size() != scores.rows()) throw DimensionError("objective: label count mismatch");
  for (auto y : labels)
    if (y >= scores.cols()) throw Error("objective: label out of range");
}

double sum(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

}  // namespace

std::string to_string(LossMode m) { return m == LossMode::cross_entropy ? "ce" : "hinge"; }

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "ce" || s == "cross_entropy") return LossMode::cross_entropy;
  if (s == "hinge") return LossMode::hinge;
  throw Error("unknown loss mode '" + s + "' (expected ce or hinge)");
}

RiskResult cross_entropy(const Matrix& scores, std::span<const ClassIndex> labels) {
  check_labels(scores, labels);
  RiskResult r{std::vector<double>(scores.rows()), Matrix(scores.rows(), scores.cols())};
  const auto n = static_cast<std::ptrdiff_t>(scores.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto s = scores.row(i);
    const double lse = log_sum_exp(s);
    r.losses[i] = lse - s[labels[i]];
    auto g = r.d_scores.row(i);
    for (std::size_t j = 0; j < s.size(); ++j) g[j] = std::exp(s[j] - lse);
    g[labels[i]] -= 1.0;
  }
  return r;
}

RiskResult hinge_from_scores(const Matrix& scores, std::span<const ClassIndex> labels) {
  check_labels(scores, labels);
  RiskResult r{std::vector<double>(scores.rows(), 0.0), Matrix(scores.rows(), scores.cols())};
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto s = scores.row(i);
    const ClassIndex y = labels[i];
    const ClassIndex m = competitive_class(s, y);
    const double slack = 1.0 - (s[y] - s[m]);
    if (slack > 0.0) {
      r.losses[i] = slack;
      r.d_scores(i, y) = -1.0;
      r.d_scores(i, m) = 1.0;
    }
  }
  return r;
}

HingeResult hinge_risk(const LinearHead& head, const Matrix& features,
                       std::span<const ClassIndex> labels) {
  const Matrix scores = head_scores(head, features);
  RiskResult risk = hinge_from_scores(scores, labels);
  HingeResult h;
  h.losses = std::move(risk.losses);
  h.grad_weight = transposed_matmul(risk.d_scores, features);
  h.grad_bias.assign(head.n_classes(), 0.0);
  for (std::size_t i = 0; i < risk.d_scores.rows(); ++i)
    for (std::size_t j = 0; j < risk.d_scores.cols(); ++j) h.grad_bias[j] += risk.d_scores(i, j);
  return h;
}

MmrResult mmr_term(const LinearHead& head, std::span<const ClassIndex> labels,
                   const Matrix& scores, double phi_max) {
  if (!(phi_max >= 0.0)) throw Error("mmr_term: phi_max must be non-negative");
  if (scores.cols() != head.n_classes()) throw DimensionError("mmr_term: score width mismatch");
  check_labels(scores, labels);
  const double scale = phi_max * phi_max;
  MmrResult r{std::vector<double>(scores.rows()), Matrix(head.n_classes(), head.feat_dim()), 0.0};
  std::vector<double> diff(head.feat_dim());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const ClassIndex y = labels[i];
    const ClassIndex m = competitive_class(scores.row(i), y);
    const auto wy = head.weight.row(y);
    const auto wm = head.weight.row(m);
    double gap_sq = 0.0;
    for (std::size_t k = 0; k < diff.size(); ++k) {
      diff[k] = wy[k] - wm[k];
      gap_sq += diff[k] * diff[k];
    }
    r.per_sample[i] = gap_sq * scale;
    r.weight_gap_sq_total += gap_sq;
    auto gy = r.d_weight.row(y);
    auto gm = r.d_weight.row(m);
    for (std::size_t k = 0; k < diff.size(); ++k) {
      const double g = 2.0 * diff[k] * scale;
      gy[k] += g;
      gm[k] -= g;
    }
  }
  return r;
}

double alpha_at(const AlphaSchedule& schedule, std::size_t step) {
  if (schedule.mode == AlphaSchedule::Mode::constant) return schedule.start;
  if (schedule.total_steps == 0) throw Error("alpha_at: linear schedule needs total_steps > 0");
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(schedule.total_steps));
  return schedule.start + (schedule.end - schedule.start) * t;
}

CompositeResult composite_loss(const Model& model, const ForwardCache& cache,
                               std::span<const ClassIndex> labels, const CompositeOptions& options) {
  const Matrix& scores = cache.scores;
  RiskResult risk = options.mode == LossMode::cross_entropy ? cross_entropy(scores, labels)
                                                            : hinge_from_scores(scores, labels);
  CompositeResult out;
  LossBreakdown& b = out.breakdown;
  b.alpha = options.alpha;
  b.phi_max = phi_max_norm(cache.features());
  b.per_sample_ce = std::move(risk.losses);
  b.ce_total = sum(b.per_sample_ce);

  Matrix extra_head;
  Matrix extra_feature;
  if (options.mmr_enabled) {
    MmrResult mmr = mmr_term(model.head, labels, scores, b.phi_max);
    b.per_sample_mmr = std::move(mmr.per_sample);
    b.mmr_total = sum(b.per_sample_mmr);
    if (options.alpha != 0.0) {
      extra_head = std::move(mmr.d_weight);
      for (double& v : extra_head.values()) v *= options.alpha;
      if (options.mmr_feature_grad && b.phi_max > 0.0) {
        // d(α Σ_i gap_i² · ‖φ_k‖²)/dφ_k for the max-norm row k.
        const std::size_t k = phi_max_row(cache.features());
        extra_feature = Matrix(cache.features().rows(), cache.features().cols());
        const double coef = 2.0 * options.alpha * mmr.weight_gap_sq_total;
        const auto phi_k = cache.features().row(k);
        auto g = extra_feature.row(k);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] = coef * phi_k[j];
      }
    }
  } else {
    b.per_sample_mmr.assign(scores.rows(), 0.0);
  }
  b.composite = options.alpha * b.mmr_total + b.ce_total;
  out.gradients = backward(model, cache, risk.d_scores, extra_head, extra_feature);
  return out;
}

}  // namespace mmr
