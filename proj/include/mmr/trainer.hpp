#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmr/data.hpp"
#include "mmr/model.hpp"
#include "mmr/objective.hpp"
#include "mmr/selection.hpp"

namespace mmr {

/// Piecewise-constant learning rate. rates[k] is in effect from
/// drop_steps[k-1] (inclusive) until the next drop; rates[0] from step 0.
struct LrSchedule {
  std::vector<double> rates{0.1};
  std::vector<std::size_t> drop_steps;

  static LrSchedule constant(double lr) { return {{lr}, {}}; }
  /// Each drop multiplies the running rate by the matching factor.
  static LrSchedule from_factors(double base_lr, std::vector<std::size_t> drop_steps,
                                 const std::vector<double>& factors);

  double base_lr() const { return rates.front(); }
  void validate() const;
};

double lr_at(const LrSchedule& schedule, std::size_t step);

/// Early-drop step regime for the 10-class image benchmark.
LrSchedule cifar10_early_drop();
/// Early-drop step regime for the 100-class image benchmark.
LrSchedule cifar100_early_drop();

struct TrainConfig {
  SelectionPolicy policy;
  LrSchedule lr;
  AlphaSchedule alpha;
  bool mmr_enabled = false;
  bool mmr_feature_grad = false;
  LossMode loss = LossMode::cross_entropy;
  std::size_t total_steps = 1000;
  std::size_t eval_interval = 50;
  std::uint64_t seed = 1;
  double momentum = 0.0;
  std::optional<double> target_accuracy;  // validation accuracy in [0, 1]
  bool stop_at_target = false;
  bool selection_log = false;  // record chosen/rejected criterion stats every step

  void validate() const;
};

struct MetricsRow {
  std::size_t step = 0;  // completed updates
  double ce = 0.0;
  double mmr = 0.0;
  double composite = 0.0;
  double alpha = 0.0;
  double phi_max = 0.0;
  double lr = 0.0;
  double train_error = 0.0;
  double validation_error = 0.0;
  double mean_selected_criterion = 0.0;  // NaN for the random policy
  std::size_t pool_forward = 0;          // rows scored before selection (0 for random)
  std::size_t backprop_batch = 0;
  double wallclock_seconds = 0.0;
};

struct SelectionLogRow {
  std::size_t step = 0;
  CriterionStats chosen;
  CriterionStats rejected;
};

struct TrainResult {
  Model model;
  std::vector<MetricsRow> metrics;
  std::vector<SelectionLogRow> selection_log;  // empty unless requested or for random
  std::optional<std::size_t> steps_to_target;
  std::size_t steps_run = 0;
  double final_train_error = 0.0;
  double final_validation_error = 0.0;
};

/// Non-finite loss or gradient. Carries the last parameters that produced
/// finite values.
class NumericalAbort : public Error {
 public:
  NumericalAbort(const std::string& what, Model last_good, std::size_t step)
      : Error(what), last_good_(std::move(last_good)), step_(step) {}
  const Model& last_good() const { return last_good_; }
  std::size_t step() const { return step_; }

 private:
  Model last_good_;
  std::size_t step_;
};

/// p ← p − lr·g for every parameter. Throws on non-finite gradients.
void sgd_step(Model& model, const Gradients& gradients, double lr);

/// Fraction of rows whose label does not strictly out-score every other
/// class (ties count as errors). NaN for an empty dataset.
double evaluate(const Model& model, const Dataset& dataset);

struct TrainHooks {
  std::size_t checkpoint_interval = 0;  // 0 disables on_checkpoint
  std::function<void(std::size_t step, const Model&)> on_checkpoint;
};

/// Selective-sampling SGD: each step draws a pool of B training rows, scores
/// them with the current model (except for the random policy), keeps b rows
/// by the policy's criterion and takes one SGD step on them. Pools are drawn
/// without replacement within an epoch and the order is reshuffled each epoch.
TrainResult train(const TrainConfig& config, const Split& split, Model model,
                  const TrainHooks& hooks = {});

/// Per-sample-mean hinge objective with the pairwise weight penalty,
///   (1/m) [ Σ_i ‖w_{y_i} − w_{m_i}‖² + λ Σ_i max(0, 1 − (s_{y_i} − s_{m_i})) ],
/// minimised by full-batch subgradient descent on a linear head with step
/// λ / (4 (t + step_offset)) on the objective divided by λ. The iterate with
/// the lowest objective is returned.
struct HingeFitOptions {
  double lambda = 1000.0;
  std::size_t steps = 20000;
  double step_offset = 10.0;
};

struct HingeFitResult {
  LinearHead head;
  double objective = 0.0;
};

HingeFitResult fit_hinge_head(const Dataset& data, const HingeFitOptions& options);

/// Smallest signed distance of any sample to its (label, competitor)
/// boundary; the geometric margin for two classes.
double geometric_margin(const LinearHead& head, const Dataset& data);

}  // namespace mmr
