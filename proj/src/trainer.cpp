#include "mmr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmr/margin.hpp"

namespace mmr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Rng streams derived from TrainConfig::seed.
enum Stream : std::uint64_t { kPoolOrder = 1, kRandomPick = 2 };

/// Hands out pools of consecutive rows from a per-epoch permutation.
class EpochSampler {
 public:
  EpochSampler(std::size_t rows, Rng rng) : order_(rows), rng_(std::move(rng)) {
    std::iota(order_.begin(), order_.end(), 0);
    shuffle();
  }

  std::vector<std::size_t> next(std::size_t count) {
    if (count > order_.size()) {
      throw Error("train: pool size " + std::to_string(count) + " exceeds training set size " +
                  std::to_string(order_.size()));
    }
    if (cursor_ + count > order_.size()) shuffle();
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + count));
    cursor_ += count;
    return out;
  }

 private:
  void shuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    cursor_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

ForwardCache select_cache_rows(const ForwardCache& cache, std::span<const std::size_t> rows) {
  ForwardCache out;
  for (const auto& m : cache.pre_activations) out.pre_activations.push_back(m.select_rows(rows));
  for (const auto& m : cache.activations) out.activations.push_back(m.select_rows(rows));
  out.scores = cache.scores.select_rows(rows);
  return out;
}

template <typename F>
void for_each_parameter(Model& m, const Gradients& g, F&& f) {
  for (std::size_t l = 0; l < m.extractor.layers.size(); ++l) {
    f(m.extractor.layers[l].weight.values(), g.layer_weight[l].values());
    f(std::span<double>(m.extractor.layers[l].bias), std::span<const double>(g.layer_bias[l]));
  }
  f(m.head.weight.values(), g.head_weight.values());
  f(std::span<double>(m.head.bias), std::span<const double>(g.head_bias));
}

void check_gradient_shapes(const Model& m, const Gradients& g) {
  bool ok = g.layer_weight.size() == m.extractor.layers.size() &&
            g.layer_bias.size() == m.extractor.layers.size() &&
            g.head_weight.same_shape(m.head.weight) && g.head_bias.size() == m.head.bias.size();
  for (std::size_t l = 0; ok && l < m.extractor.layers.size(); ++l) {
    ok = g.layer_weight[l].same_shape(m.extractor.layers[l].weight) &&
         g.layer_bias[l].size() == m.extractor.layers[l].bias.size();
  }
  if (!ok) throw DimensionError("sgd_step: gradient shapes do not match the model");
}

}  // namespace

LrSchedule LrSchedule::from_factors(double base_lr, std::vector<std::size_t> drop_steps,
                                    const std::vector<double>& factors) {
  if (factors.size() != drop_steps.size()) throw Error("lr: one factor per drop step required");
  LrSchedule s{{base_lr}, std::move(drop_steps)};
  for (double f : factors) s.rates.push_back(s.rates.back() * f);
  s.validate();
  return s;
}

void LrSchedule::validate() const {
  if (rates.size() != drop_steps.size() + 1) {
    throw Error("lr: need exactly one more rate than drop steps");
  }
  for (double r : rates)
    if (!(r > 0.0) || !std::isfinite(r)) throw Error("lr: rates must be positive and finite");
  for (std::size_t i = 1; i < drop_steps.size(); ++i)
    if (drop_steps[i] <= drop_steps[i - 1]) throw Error("lr: drop steps must be strictly ascending");
}

double lr_at(const LrSchedule& schedule, std::size_t step) {
  const auto passed = std::upper_bound(schedule.drop_steps.begin(), schedule.drop_steps.end(), step) -
                      schedule.drop_steps.begin();
  return schedule.rates.at(static_cast<std::size_t>(passed));
}

LrSchedule cifar10_early_drop() { return {{0.1, 0.01, 0.001, 0.0001}, {24992, 27335, 29678}}; }

LrSchedule cifar100_early_drop() { return {{0.1, 0.02, 0.004, 0.0008}, {39050, 41393, 43736}}; }

void TrainConfig::validate() const {
  policy.validate();
  lr.validate();
  if (eval_interval == 0) throw Error("config: eval_interval must be positive");
  if (!(alpha.start >= 0.0) || !(alpha.end >= 0.0)) throw Error("config: alpha must be non-negative");
  if (alpha.mode == AlphaSchedule::Mode::linear && alpha.total_steps == 0) {
    throw Error("config: linear alpha schedule needs total_steps > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("config: momentum must be in [0, 1)");
  if (target_accuracy && !(*target_accuracy >= 0.0 && *target_accuracy <= 1.0)) {
    throw Error("config: target_accuracy must be in [0, 1]");
  }
}

void sgd_step(Model& model, const Gradients& gradients, double lr) {
  check_gradient_shapes(model, gradients);
  if (!gradients.all_finite()) throw Error("sgd_step: non-finite gradient");
  for_each_parameter(model, gradients, [lr](std::span<double> p, std::span<const double> g) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  });
}

double evaluate(const Model& model, const Dataset& dataset) {
  if (dataset.size() == 0) return kNaN;
  const ForwardCache cache = forward(model, dataset.features);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto s = cache.scores.row(i);
    const ClassIndex y = dataset.labels[i];
    bool correct = true;
    for (std::size_t j = 0; j < s.size() && correct; ++j)
      if (j != y && !(s[y] > s[j])) correct = false;
    if (!correct) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(dataset.size());
}

TrainResult train(const TrainConfig& config, const Split& split, Model model,
                  const TrainHooks& hooks) {
  config.validate();
  model.validate();
  const Dataset& data = split.train;
  data.validate();
  if (data.dim() != model.input_dim()) throw DimensionError("train: data and model dimensions differ");
  if (data.n_classes != model.n_classes()) throw DimensionError("train: class counts differ");

  const auto start = std::chrono::steady_clock::now();
  const Rng root(config.seed);
  EpochSampler sampler(data.size(), root.fork(kPoolOrder));
  Rng pick_rng = root.fork(kRandomPick);
  const SelectionPolicy& policy = config.policy;

  std::vector<double> velocity;
  if (config.momentum > 0.0) velocity.assign(model.parameter_count(), 0.0);

  TrainResult result;
  for (std::size_t t = 0; t < config.total_steps; ++t) {
    const std::vector<std::size_t> pool = sampler.next(policy.pool_size);

    SelectionResult selection;
    ForwardCache batch;
    if (policy.kind == PolicyKind::random) {
      selection = select_random(pool.size(), policy.batch_size, pick_rng);
    } else {
      const ForwardCache scored = forward(model, data.features.select_rows(pool));
      switch (policy.kind) {
        case PolicyKind::mms:
          selection = select_mms(mms_values(score_batch_from_scores(model.head, scored.scores)),
                                 policy.batch_size);
          break;
        case PolicyKind::hard_negative: {
          std::vector<ClassIndex> pool_labels;
          for (auto i : pool) pool_labels.push_back(data.labels[i]);
          selection = select_hard_negative(cross_entropy(scored.scores, pool_labels).losses,
                                           policy.batch_size);
          break;
        }
        case PolicyKind::entropy:
          selection = select_entropy(scored.scores, policy.batch_size);
          break;
        case PolicyKind::random:
          break;
      }
      // Rows are computed independently, so slicing the pool cache equals a
      // fresh forward pass on the selected rows.
      batch = select_cache_rows(scored, selection.chosen);
    }

    std::vector<std::size_t> rows;
    std::vector<ClassIndex> labels;
    for (auto k : selection.chosen) {
      rows.push_back(pool[k]);
      labels.push_back(data.labels[pool[k]]);
    }
    if (policy.kind == PolicyKind::random) batch = forward(model, data.features.select_rows(rows));

    const double alpha = alpha_at(config.alpha, t);
    const double lr = lr_at(config.lr, t);
    CompositeOptions options{config.loss, alpha, config.mmr_enabled, config.mmr_feature_grad};
    CompositeResult loss = composite_loss(model, batch, labels, options);
    if (!std::isfinite(loss.breakdown.composite) || !loss.gradients.all_finite()) {
      throw NumericalAbort("train: non-finite loss or gradient at step " + std::to_string(t) +
                               " (composite=" + std::to_string(loss.breakdown.composite) + ")",
                           model, t);
    }

    Model before = model;
    if (velocity.empty()) {
      sgd_step(model, loss.gradients, lr);
    } else {
      const auto g = flatten(loss.gradients);
      auto p = flatten(model);
      for (std::size_t i = 0; i < p.size(); ++i) {
        velocity[i] = config.momentum * velocity[i] + g[i];
        p[i] -= lr * velocity[i];
      }
      unflatten(p, model);
    }
    if (!all_finite(flatten(model))) {
      throw NumericalAbort("train: parameters overflowed at step " + std::to_string(t),
                           std::move(before), t);
    }
    result.steps_run = t + 1;
    if (config.selection_log && policy.kind != PolicyKind::random) {
      result.selection_log.push_back({t + 1, selection.chosen_stats, selection.rejected_stats});
    }
    if (hooks.on_checkpoint && hooks.checkpoint_interval > 0 &&
        (t + 1) % hooks.checkpoint_interval == 0) {
      hooks.on_checkpoint(t + 1, model);
    }

    const bool last = t + 1 == config.total_steps;
    if ((t + 1) % config.eval_interval == 0 || last) {
      MetricsRow row;
      row.step = t + 1;
      row.ce = loss.breakdown.ce_total;
      row.mmr = loss.breakdown.mmr_total;
      row.composite = loss.breakdown.composite;
      row.alpha = alpha;
      row.phi_max = loss.breakdown.phi_max;
      row.lr = lr;
      row.train_error = evaluate(model, data);
      row.validation_error = evaluate(model, split.validation);
      row.mean_selected_criterion =
          policy.kind == PolicyKind::random ? kNaN : selection.chosen_stats.mean;
      row.pool_forward = policy.kind == PolicyKind::random ? 0 : pool.size();
      row.backprop_batch = rows.size();
      row.wallclock_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.metrics.push_back(row);

      if (config.target_accuracy && !result.steps_to_target &&
          1.0 - row.validation_error >= *config.target_accuracy) {
        result.steps_to_target = row.step;
        if (config.stop_at_target) break;
      }
    }
  }

  result.final_train_error = result.metrics.empty() ? evaluate(model, data)
                                                    : result.metrics.back().train_error;
  result.final_validation_error = result.metrics.empty() ? evaluate(model, split.validation)
                                                         : result.metrics.back().validation_error;
  result.model = std::move(model);
  return result;
}

HingeFitResult fit_hinge_head(const Dataset& data, const HingeFitOptions& options) {
  data.validate();
  if (!(options.lambda > 0.0)) throw Error("fit_hinge_head: lambda must be positive");
  const double m = static_cast<double>(data.size());
  const double inv_lambda = 1.0 / options.lambda;
  LinearHead head{Matrix(data.n_classes, data.dim()), std::vector<double>(data.n_classes, 0.0)};

  // Objective divided by λ; same minimiser, gradients stay O(1).
  const auto objective_and_grad = [&](const LinearHead& h, Matrix* gw, std::vector<double>* gb) {
    const HingeResult hinge = hinge_risk(h, data.features, data.labels);
    const MmrResult reg = mmr_term(h, data.labels, head_scores(h, data.features), 1.0);
    double risk = 0.0;
    double penalty = 0.0;
    for (double v : hinge.losses) risk += v;
    for (double v : reg.per_sample) penalty += v;
    if (gw != nullptr) {
      *gw = reg.d_weight;
      auto g = gw->values();
      const auto hg = hinge.grad_weight.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = (inv_lambda * g[i] + hg[i]) / m;
      *gb = hinge.grad_bias;
      for (double& v : *gb) v /= m;
    }
    return (inv_lambda * penalty + risk) / m;
  };

  HingeFitResult best{head, objective_and_grad(head, nullptr, nullptr)};
  Matrix gw;
  std::vector<double> gb;
  for (std::size_t t = 0; t < options.steps; ++t) {
    objective_and_grad(head, &gw, &gb);
    const double eta = options.lambda / (4.0 * (static_cast<double>(t) + options.step_offset));
    auto w = head.weight.values();
    const auto g = gw.values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * g[i];
    for (std::size_t j = 0; j < gb.size(); ++j) head.bias[j] -= eta * gb[j];
    const double obj = objective_and_grad(head, nullptr, nullptr);
    if (obj < best.objective) best = {head, obj};
  }
  best.objective *= options.lambda;
  return best;
}

double geometric_margin(const LinearHead& head, const Dataset& data) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.size(); ++i)
    worst = std::min(worst, true_margin(head, data.features.row(i), data.labels[i]));
  return worst;
}

}  // namespace mmr
