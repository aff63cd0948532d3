#include "mmr/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "mmr/checkpoint.hpp"
#include "mmr/io.hpp"
#include "mmr/margin.hpp"
#include "mmr/verification.hpp"

namespace mmr {

namespace {

using nlohmann::json;

std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }

std::string timing_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "step,wallclock_seconds\n";
  for (const auto& r : rows) out << r.step << ',' << format_double(r.wallclock_seconds) << '\n';
  return out.str();
}

std::string selection_csv(const std::vector<SelectionLogRow>& rows, PolicyKind policy) {
  std::ostringstream out;
  out << "step,policy,chosen_mean,chosen_min,chosen_max,rejected_mean,rejected_min,rejected_max\n";
  for (const auto& r : rows) {
    out << r.step << ',' << to_string(policy) << ',' << cell(r.chosen.mean) << ',' << cell(r.chosen.min)
        << ',' << cell(r.chosen.max) << ',' << cell(r.rejected.mean) << ',' << cell(r.rejected.min)
        << ',' << cell(r.rejected.max) << '\n';
  }
  return out.str();
}

std::string steps_cell(const std::optional<std::size_t>& steps) {
  return steps ? std::to_string(*steps) : std::string("not-reached");
}

json steps_json(const std::optional<std::size_t>& steps) {
  return steps ? json(*steps) : json("not-reached");
}

Model initial_model(const RunConfig& config, const Split& split) {
  std::vector<std::size_t> dims{split.train.dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  return init_model(dims, split.train.n_classes, Rng(config.train.seed).fork(0).next_u64());
}

RunConfig apply_globals(RunConfig config, const GlobalOptions& global) {
  if (global.seed) config.train.seed = *global.seed;
  if (global.out_dir) config.out_dir = *global.out_dir;
  return config;
}

/// Maps library exceptions to exit codes, reporting on `err`.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const NumericalAbort& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kExitNumericalAbort;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return kExitConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double parse_number(const std::string& token, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + ": not a number: '" + token + "'");
  }
  return v;
}

struct RunSlot {
  RunConfig config;
  std::filesystem::path dir;
  std::optional<RunOutcome> outcome;
  std::string error;
  int exit_code = kExitOk;
};

/// Executes independent runs, in parallel across OpenMP threads. Nested
/// kernels inside each run stay single-threaded.
void execute_all(std::vector<RunSlot>& slots) {
  const auto n = static_cast<std::ptrdiff_t>(slots.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& slot = slots[static_cast<std::size_t>(i)];
    std::ostringstream err;
    slot.exit_code = guarded(err, [&] {
      slot.outcome = execute_run(slot.config, slot.dir);
      return kExitOk;
    });
    slot.error = err.str();
  }
}

int first_failure(const std::vector<RunSlot>& slots, std::ostream& err) {
  for (const auto& s : slots) {
    if (s.exit_code != kExitOk) {
      err << s.dir.string() << ": " << s.error;
      return s.exit_code;
    }
  }
  return kExitOk;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "step,ce,mmr,composite,alpha,phi_max,lr,train_error,validation_error,"
         "mean_selected_criterion,pool_forward,backprop_batch\n";
  for (const auto& r : rows) {
    out << r.step << ',' << cell(r.ce) << ',' << cell(r.mmr) << ',' << cell(r.composite) << ','
        << cell(r.alpha) << ',' << cell(r.phi_max) << ',' << cell(r.lr) << ','
        << cell(r.train_error) << ',' << cell(r.validation_error) << ','
        << cell(r.mean_selected_criterion) << ',' << r.pool_forward << ',' << r.backprop_batch
        << '\n';
  }
  return out.str();
}

std::optional<std::size_t> steps_to_target(const std::vector<MetricsRow>& rows, double target) {
  for (const auto& r : rows)
    if (1.0 - r.validation_error >= target) return r.step;
  return std::nullopt;
}

RunOutcome execute_run(const RunConfig& config, const std::filesystem::path& dir) {
  const Split split = prepare_data(config);
  Model model = initial_model(config, split);

  TrainHooks hooks;
  hooks.checkpoint_interval = config.checkpoint_interval;
  hooks.on_checkpoint = [&](std::size_t step, const Model& m) {
    save_checkpoint(dir / "checkpoints" / ("step_" + std::to_string(step) + ".json"), m);
  };

  RunOutcome outcome;
  outcome.dir = dir;
  try {
    outcome.result = train(config.train, split, std::move(model), hooks);
  } catch (const NumericalAbort& e) {
    save_checkpoint(dir / "last_good.json", e.last_good());
    throw;
  }
  const TrainResult& r = outcome.result;
  outcome.test_error = evaluate(r.model, split.test);

  json summary = {
      {"version", kVersion},
      {"final_error", r.final_validation_error},
      {"final_validation_error", r.final_validation_error},
      {"final_train_error", r.final_train_error},
      {"test_error", std::isnan(outcome.test_error) ? json(nullptr) : json(outcome.test_error)},
      {"steps_run", r.steps_run},
      {"steps_to_target", config.train.target_accuracy ? steps_json(r.steps_to_target) : json(nullptr)},
      {"config", to_json(config)},
  };
  if (std::isnan(r.final_validation_error)) {
    summary["final_error"] = nullptr;
    summary["final_validation_error"] = nullptr;
  }

  json resolved = to_json(config);
  resolved["version"] = kVersion;
  write_file_atomic(dir / "config.resolved.json", resolved.dump(2) + "\n");
  write_file_atomic(dir / "metrics.csv", metrics_csv(r.metrics));
  write_file_atomic(dir / "timing.csv", timing_csv(r.metrics));
  if (config.train.selection_log) {
    write_file_atomic(dir / "selection.csv", selection_csv(r.selection_log, config.train.policy.kind));
  }
  save_checkpoint(dir / "model.json", r.model);
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  return outcome;
}

int cmd_train(const std::filesystem::path& config_path, const GlobalOptions& global,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = apply_globals(load_run_config(config_path), global);
    set_thread_count(global.threads);
    const RunOutcome o = execute_run(config, config.out_dir);
    out << "trained " << o.result.steps_run << " steps; validation error "
        << cell(o.result.final_validation_error) << ", test error " << cell(o.test_error);
    if (config.train.target_accuracy) out << ", steps to target " << steps_cell(o.result.steps_to_target);
    out << "\nartifacts in " << config.out_dir << '\n';
    return kExitOk;
  });
}

int cmd_compare(const std::filesystem::path& config_path, const std::vector<std::string>& policies,
                const std::vector<std::uint64_t>& seeds, std::optional<double> target,
                const GlobalOptions& global, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const RunConfig base = apply_globals(load_run_config(config_path), global);
    if (policies.empty() || seeds.empty()) throw ConfigError("compare: need at least one policy and one seed");
    std::vector<PolicyKind> kinds;
    for (const auto& p : policies) {
      try {
        kinds.push_back(policy_from_string(p));
      } catch (const Error& e) {
        throw ConfigError(std::string("compare: ") + e.what());
      }
    }
    set_thread_count(global.threads);

    const std::filesystem::path root = std::filesystem::path(base.out_dir) / "compare";
    std::vector<RunSlot> slots;
    for (auto kind : kinds) {
      for (auto seed : seeds) {
        RunSlot s;
        s.config = base;
        s.config.train.policy.kind = kind;
        s.config.train.seed = seed;
        s.config.train.stop_at_target = false;
        s.dir = root / (to_string(kind) + "-seed" + std::to_string(seed));
        slots.push_back(std::move(s));
      }
    }
    execute_all(slots);
    if (const int code = first_failure(slots, err); code != kExitOk) return code;

    double goal = 0.0;
    std::string goal_source;
    if (target) {
      goal = *target;
      goal_source = "flag";
    } else if (base.train.target_accuracy) {
      goal = *base.train.target_accuracy;
      goal_source = "config";
    } else {
      std::vector<double> random_acc;
      for (const auto& s : slots)
        if (s.config.train.policy.kind == PolicyKind::random)
          random_acc.push_back(1.0 - s.outcome->result.final_validation_error);
      if (random_acc.empty()) {
        throw ConfigError("compare: no target given and no random-policy runs to derive one from");
      }
      goal = median(random_acc) - 0.005;
      goal_source = "random-median-minus-0.5pt";
    }

    std::ostringstream csv;
    csv << "policy,seed,steps_to_target,final_validation_accuracy,final_validation_error,test_error\n";
    std::map<PolicyKind, std::vector<double>> steps_by_policy;
    std::map<PolicyKind, std::vector<double>> acc_by_policy;
    std::map<PolicyKind, std::vector<double>> test_by_policy;
    for (const auto& s : slots) {
      const auto& r = s.outcome->result;
      const auto steps = steps_to_target(r.metrics, goal);
      const PolicyKind kind = s.config.train.policy.kind;
      steps_by_policy[kind].push_back(steps ? static_cast<double>(*steps)
                                            : std::numeric_limits<double>::infinity());
      acc_by_policy[kind].push_back(1.0 - r.final_validation_error);
      test_by_policy[kind].push_back(s.outcome->test_error);
      csv << to_string(kind) << ',' << s.config.train.seed << ',' << steps_cell(steps) << ','
          << cell(1.0 - r.final_validation_error) << ',' << cell(r.final_validation_error) << ','
          << cell(s.outcome->test_error) << '\n';
    }
    json medians = json::object();
    for (auto kind : kinds) {
      if (medians.contains(to_string(kind))) continue;
      const double med_steps = median(steps_by_policy[kind]);
      const double med_acc = median(acc_by_policy[kind]);
      const std::string steps_text = std::isinf(med_steps) ? "not-reached" : format_double(med_steps);
      csv << to_string(kind) << ",median," << steps_text << ',' << cell(med_acc) << ','
          << cell(1.0 - med_acc) << ',' << cell(median(test_by_policy[kind])) << '\n';
      medians[to_string(kind)] = {{"steps_to_target", std::isinf(med_steps) ? json("not-reached") : json(med_steps)},
                                  {"final_validation_accuracy", med_acc}};
      out << to_string(kind) << ": median steps to target " << steps_text
          << ", median final validation accuracy " << cell(med_acc) << '\n';
    }
    write_file_atomic(root / "comparison.csv", csv.str());
    json summary = {{"version", kVersion},
                    {"target_accuracy", goal},
                    {"target_source", goal_source},
                    {"policies", policies},
                    {"seeds", seeds},
                    {"medians", medians},
                    {"config", to_json(base)}};
    write_file_atomic(root / "compare.json", summary.dump(2) + "\n");
    out << "target accuracy " << format_double(goal) << " (" << goal_source << "); results in "
        << (root / "comparison.csv").string() << '\n';
    return kExitOk;
  });
}

int cmd_sweep_alpha(const std::filesystem::path& config_path, const std::vector<std::string>& alphas,
                    const std::vector<std::uint64_t>& seeds, const GlobalOptions& global,
                    std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    const RunConfig base = apply_globals(load_run_config(config_path), global);
    if (alphas.empty()) throw ConfigError("sweep-alpha: empty alpha grid");
    std::vector<double> values;
    for (const auto& a : alphas) {
      const double v = parse_number(a, "sweep-alpha");
      if (v < 0.0) throw ConfigError("sweep-alpha: alpha must be non-negative, got " + a);
      values.push_back(v);
    }
    const std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector<std::uint64_t>{base.train.seed} : seeds;
    set_thread_count(global.threads);

    const std::filesystem::path root = std::filesystem::path(base.out_dir) / "sweep";
    std::vector<RunSlot> slots;
    for (std::size_t k = 0; k < values.size(); ++k) {
      for (auto seed : seed_list) {
        RunSlot s;
        s.config = base;
        s.config.train.mmr_enabled = true;
        s.config.train.alpha = AlphaSchedule{AlphaSchedule::Mode::constant, values[k], values[k], 0};
        s.config.train.seed = seed;
        s.dir = root / ("alpha" + std::to_string(k) + "-seed" + std::to_string(seed));
        slots.push_back(std::move(s));
      }
    }
    execute_all(slots);
    if (const int code = first_failure(slots, err); code != kExitOk) return code;

    struct Row {
      std::size_t grid_index;
      double mean_val, min_val, max_val, mean_test;
    };
    std::vector<Row> rows;
    std::ostringstream runs_csv;
    runs_csv << "alpha,seed,final_validation_error,test_error\n";
    for (std::size_t k = 0; k < values.size(); ++k) {
      Row row{k, 0.0, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0.0};
      for (std::size_t s = 0; s < seed_list.size(); ++s) {
        const auto& slot = slots[k * seed_list.size() + s];
        const double v = slot.outcome->result.final_validation_error;
        row.mean_val += v;
        row.min_val = std::min(row.min_val, v);
        row.max_val = std::max(row.max_val, v);
        row.mean_test += slot.outcome->test_error;
        runs_csv << alphas[k] << ',' << seed_list[s] << ',' << cell(v) << ',' << cell(slot.outcome->test_error) << '\n';
      }
      row.mean_val /= static_cast<double>(seed_list.size());
      row.mean_test /= static_cast<double>(seed_list.size());
      rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.mean_val < b.mean_val; });

    std::ostringstream csv;
    csv << "alpha,runs,mean_validation_error,min_validation_error,max_validation_error,mean_test_error\n";
    for (const auto& r : rows) {
      csv << alphas[r.grid_index] << ',' << seed_list.size() << ',' << cell(r.mean_val) << ','
          << cell(r.min_val) << ',' << cell(r.max_val) << ',' << cell(r.mean_test) << '\n';
    }
    write_file_atomic(root / "sweep_runs.csv", runs_csv.str());
    write_file_atomic(root / "sweep.csv", csv.str());
    out << csv.str();
    out << "best alpha " << alphas[rows.front().grid_index] << "; results in " << (root / "sweep.csv").string()
        << '\n';
    return kExitOk;
  });
}

int cmd_score(const std::filesystem::path& checkpoint, const ScoreSource& source,
              const std::filesystem::path& out_csv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Model model = load_checkpoint(checkpoint);
    Matrix features;
    std::vector<ClassIndex> labels;
    if (source.config) {
      const RunConfig config = load_run_config(*source.config);
      const Split split = prepare_data(config);
      const Dataset* d = source.split == "train"        ? &split.train
                         : source.split == "validation" ? &split.validation
                         : source.split == "test"       ? &split.test
                                                        : nullptr;
      if (d == nullptr) throw ConfigError("score: split must be train, validation or test");
      features = d->features;
      labels = d->labels;
    } else if (source.csv) {
      if (csv_has_column(*source.csv, source.label_column)) {
        Dataset d = load_csv(*source.csv, source.label_column);
        features = std::move(d.features);
        labels = std::move(d.labels);
      } else {
        features = load_csv_features(*source.csv);
      }
    } else {
      throw ConfigError("score: give a data CSV or a run config");
    }
    if (features.cols() != model.input_dim()) {
      throw DimensionError("score: data has " + std::to_string(features.cols()) +
                           " feature columns, checkpoint expects " + std::to_string(model.input_dim()));
    }
    for (auto y : labels)
      if (y >= model.n_classes()) throw DimensionError("score: label exceeds the checkpoint's class count");

    const ForwardCache cache = forward(model, features);
    const auto entries = score_batch_from_scores(model.head, cache.scores, labels);
    std::ostringstream csv;
    csv << "sample_index,top_class,runner_up,mms,true_margin\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      csv << i << ',' << e.top_class << ',' << e.runner_up << ',' << format_double(e.mms) << ','
          << (e.true_margin ? format_double(*e.true_margin) : std::string()) << '\n';
    }
    write_file_atomic(out_csv, csv.str());
    const MmsSummary s = summarize_mms(entries);
    out << "scored " << s.count << " samples (" << s.sentinels << " without a top-2 boundary)\n"
        << "mms min " << format_double(s.min) << " median " << format_double(s.median) << " mean "
        << format_double(s.mean) << " max " << format_double(s.max) << '\n';
    return kExitOk;
  });
}

int cmd_gradcheck(std::size_t models, std::size_t n_classes, bool feature_grad, const std::string& loss,
                  const GlobalOptions& global, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    verify::GradcheckOptions o;
    o.models = models;
    o.n_classes = n_classes;
    o.feature_grad = feature_grad;
    o.mode = loss_mode_from_string(loss);
    if (global.seed) o.seed = *global.seed;
    const auto summary = verify::gradcheck_sweep(o);
    const std::string doc = summary.to_json().dump(2) + "\n";
    if (global.out_dir) write_file_atomic(std::filesystem::path(*global.out_dir) / "gradcheck.json", doc);
    out << doc;
    return summary.passed() ? kExitOk : kExitFailure;
  });
}

int cmd_oracle_sweep(std::size_t draws, const GlobalOptions& global, std::ostream& out,
                     std::ostream& err) {
  return guarded(err, [&] {
    verify::OracleSweepOptions o;
    o.draws = draws;
    if (global.seed) o.seed = *global.seed;
    const auto summary = verify::oracle_sweep(o);
    const std::string doc = summary.to_json().dump(2) + "\n";
    if (global.out_dir) write_file_atomic(std::filesystem::path(*global.out_dir) / "oracle_sweep.json", doc);
    out << doc;
    return summary.passed() ? kExitOk : kExitFailure;
  });
}

int cmd_gen_data(const DataSpec& spec, const std::filesystem::path& out_csv, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    const Dataset d = gen_blobs(spec.n_classes, spec.dim, spec.per_class, spec.center_radius,
                                spec.sigma, spec.seed);
    save_csv(out_csv, d);
    out << "wrote " << d.size() << " rows to " << out_csv.string() << '\n';
    return kExitOk;
  });
}

}  // namespace mmr
