#include "mmr/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mmr/margin.hpp"
#include "mmr/oracle.hpp"
#include "mmr/rng.hpp"
#include "mmr/trainer.hpp"

namespace mmr::verify {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

LinearHead random_head(std::size_t n, std::size_t d, double range, Rng& rng) {
  LinearHead h{Matrix(n, d), std::vector<double>(n)};
  for (double& v : h.weight.values()) v = rng.uniform(-range, range);
  for (double& v : h.bias) v = rng.uniform(-range, range);
  return h;
}

std::size_t draw_between(std::size_t lo, std::size_t hi, Rng& rng) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

/// Relu pre-activations far enough from 0 that the stencil cannot cross a kink.
bool away_from_kinks(const ForwardCache& cache, const Model& model, double threshold) {
  for (std::size_t l = 0; l < model.extractor.layers.size(); ++l) {
    if (model.extractor.layers[l].activation != Activation::relu) continue;
    for (double z : cache.pre_activations[l].values())
      if (std::abs(z) < threshold) return false;
  }
  return true;
}

/// Largest feature norm leads the runner-up by at least `threshold`.
bool unique_max_norm(const Matrix& features, double threshold) {
  auto norms = row_l2_norms(features);
  if (norms.size() < 2) return true;
  std::sort(norms.begin(), norms.end(), std::greater<>());
  return norms[0] - norms[1] > threshold;
}

}  // namespace

nlohmann::json OracleSweepSummary::to_json() const {
  return {{"check", "oracle-sweep"},
          {"passed", passed()},
          {"draws", draws},
          {"mismatches", mismatches},
          {"max_abs_difference", max_abs_difference},
          {"crossing_failures", crossing_failures},
          {"seconds", seconds}};
}

bool crossing_holds(const LinearHead& head, std::span<const double> phi) {
  const MarginEntry e = mms(head, phi);
  if (!std::isfinite(e.mms)) return true;
  const PairBoundary pb = PairBoundary::between(head, e.top_class, e.runner_up);
  const double norm = l2_norm(pb.w_diff);
  if (norm <= kDegenerateNorm) return true;
  const double eps = 1e-6 * (1.0 + e.mms);

  const auto order_after = [&](double t) {
    std::vector<double> moved(phi.begin(), phi.end());
    for (std::size_t k = 0; k < moved.size(); ++k) moved[k] -= t * pb.w_diff[k] / norm;
    const auto s = head.scores(moved);
    return s[e.top_class] - s[e.runner_up];
  };
  return order_after(e.mms + eps) < 0.0 && order_after(e.mms - eps) > 0.0;
}

OracleSweepSummary oracle_sweep(const OracleSweepOptions& options) {
  const auto start = Clock::now();
  Rng rng(options.seed);
  OracleSweepSummary s;
  for (std::size_t draw = 0; draw < options.draws; ++draw) {
    const std::size_t n = draw_between(options.min_classes, options.max_classes, rng);
    const std::size_t d = draw_between(options.min_dim, options.max_dim, rng);
    const LinearHead head = random_head(n, d, options.entry_range, rng);
    std::vector<double> phi(d);
    for (double& v : phi) v = rng.uniform(-options.entry_range, options.entry_range);

    const double fast = mms(head, phi).mms;
    const double brute = oracle::brute_force_mms(head.weight, head.bias, phi);
    const double diff = (std::isinf(fast) && std::isinf(brute)) ? 0.0 : std::abs(fast - brute);
    s.max_abs_difference = std::max(s.max_abs_difference, diff);
    if (!(diff <= options.tolerance)) ++s.mismatches;
    if (!crossing_holds(head, phi)) ++s.crossing_failures;
    ++s.draws;
  }
  s.seconds = seconds_since(start);
  return s;
}

nlohmann::json GradcheckSummary::to_json() const {
  return {{"check", "gradcheck"},
          {"passed", passed()},
          {"models", models},
          {"rejected_points", rejected_points},
          {"max_relative_error", max_relative_error},
          {"worst_model", worst_model},
          {"worst_parameter", worst_parameter},
          {"epsilon", epsilon},
          {"tolerance", tolerance},
          {"seconds", seconds}};
}

double reference_composite(const Model& model, const Matrix& inputs,
                           std::span<const ClassIndex> labels,
                           std::span<const ClassIndex> competitors, double alpha, LossMode mode,
                           bool mmr_enabled, double phi_max) {
  const ForwardCache cache = forward(model, inputs);
  double risk = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto s = cache.scores.row(i);
    if (mode == LossMode::cross_entropy) {
      risk += log_sum_exp(s) - s[labels[i]];
    } else {
      risk += std::max(0.0, 1.0 - (s[labels[i]] - s[competitors[i]]));
    }
  }
  if (!mmr_enabled) return risk;
  double scale = phi_max;
  if (scale < 0.0) {
    for (std::size_t i = 0; i < cache.features().rows(); ++i)
      scale = std::max(scale, l2_norm(cache.features().row(i)));
  }
  double reg = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto wy = model.head.weight.row(labels[i]);
    const auto wm = model.head.weight.row(competitors[i]);
    double gap = 0.0;
    for (std::size_t k = 0; k < wy.size(); ++k) gap += (wy[k] - wm[k]) * (wy[k] - wm[k]);
    reg += gap * scale * scale;
  }
  return alpha * reg + risk;
}

GradcheckSummary gradcheck_sweep(const GradcheckOptions& options) {
  const auto start = Clock::now();
  Rng rng(options.seed);
  GradcheckSummary summary;
  summary.tolerance = options.tolerance;
  summary.epsilon = options.epsilon;
  const std::size_t dims[] = {options.input_dim, options.hidden};
  const double kink_threshold = 1e3 * options.epsilon;

  while (summary.models < options.models) {
    Model model = init_model(dims, options.n_classes, rng.next_u64());
    for (auto& layer : model.extractor.layers)
      for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
    for (double& b : model.head.bias) b = rng.uniform(-0.5, 0.5);
    Matrix inputs(options.batch, options.input_dim);
    for (double& v : inputs.values()) v = rng.normal();
    std::vector<ClassIndex> labels(options.batch);
    for (auto& y : labels) y = static_cast<ClassIndex>(rng.below(options.n_classes));
    const double alpha = rng.uniform(0.1, 1.0);

    const ForwardCache cache = forward(model, inputs);
    bool usable = away_from_kinks(cache, model, kink_threshold) &&
                  unique_max_norm(cache.features(), kink_threshold);
    if (usable) {
      try {
        oracle::require_argmax_stable(cache.scores, labels, options.epsilon);
      } catch (const oracle::UnstablePoint&) {
        usable = false;
      }
    }
    if (!usable) {
      ++summary.rejected_points;
      continue;
    }

    std::vector<ClassIndex> competitors;
    for (std::size_t i = 0; i < labels.size(); ++i)
      competitors.push_back(competitive_class(cache.scores.row(i), labels[i]));
    const double frozen_phi_max = options.feature_grad ? -1.0 : phi_max_norm(cache.features());

    const CompositeOptions copts{options.mode, alpha, options.mmr_enabled, options.feature_grad};
    const auto analytic = flatten(composite_loss(model, cache, labels, copts).gradients);
    const auto params = flatten(model);
    Model scratch = model;
    const auto evaluator = [&](std::span<const double> p) {
      unflatten(p, scratch);
      return reference_composite(scratch, inputs, labels, competitors, alpha, options.mode,
                                 options.mmr_enabled, frozen_phi_max);
    };
    const auto report = oracle::finite_diff_grad(evaluator, params, analytic, options.epsilon);
    if (summary.models == 0 || report.max_relative_error > summary.max_relative_error) {
      summary.max_relative_error = report.max_relative_error;
      summary.worst_model = summary.models;
      summary.worst_parameter = report.worst_index;
    }
    ++summary.models;
  }
  summary.seconds = seconds_since(start);
  return summary;
}

Dataset separable_instance(std::size_t per_side, double min_margin, Rng& rng) {
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double nx = std::cos(angle);
  const double ny = std::sin(angle);
  const double offset = rng.uniform(-0.5, 0.5);
  Dataset d;
  d.n_classes = 2;
  d.features = Matrix(2 * per_side, 2);
  std::size_t pos = 0;
  std::size_t neg = 0;
  while (pos < per_side || neg < per_side) {
    const double x = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    const double s = nx * x + ny * y + offset;
    std::size_t row;
    if (s >= min_margin && pos < per_side) {
      row = pos++;
    } else if (s <= -min_margin && neg < per_side) {
      row = per_side + neg++;
    } else {
      continue;
    }
    d.features(row, 0) = x;
    d.features(row, 1) = y;
  }
  d.labels.assign(2 * per_side, 1);
  std::fill(d.labels.begin(), d.labels.begin() + static_cast<std::ptrdiff_t>(per_side), 0);
  return d;
}

LineageSummary svm_lineage(const LineageOptions& options) {
  const auto start = Clock::now();
  Rng rng(options.seed);
  LineageSummary summary;
  summary.tolerance = options.tolerance;
  for (std::size_t k = 0; k < options.instances; ++k) {
    const Dataset data = separable_instance(options.per_side, options.min_margin, rng);
    std::vector<oracle::Point2> pos;
    std::vector<oracle::Point2> neg;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const oracle::Point2 p{data.features(i, 0), data.features(i, 1)};
      (data.labels[i] == 0 ? pos : neg).push_back(p);
    }
    const auto exact = oracle::max_margin_2d(pos, neg);

    LineageInstance inst;
    inst.oracle_margin = exact.margin;
    inst.trained_margin = -std::numeric_limits<double>::infinity();
    for (double lambda : options.lambda_grid) {
      HingeFitOptions fit;
      fit.lambda = lambda;
      fit.steps = options.steps;
      const auto result = fit_hinge_head(data, fit);
      const double margin = geometric_margin(result.head, data);
      if (margin > inst.trained_margin) {
        inst.trained_margin = margin;
        inst.best_lambda = lambda;
      }
    }
    inst.relative_gap = std::abs(inst.oracle_margin - inst.trained_margin) / inst.oracle_margin;
    summary.worst_relative_gap = std::max(summary.worst_relative_gap, inst.relative_gap);
    summary.instances.push_back(inst);
  }
  summary.seconds = seconds_since(start);
  return summary;
}

}  // namespace mmr::verify
