#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mmr/config.hpp"

namespace mmr {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalAbort = 3;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 0;
};

/// Outcome of one run written under its own directory.
struct RunOutcome {
  TrainResult result;
  double test_error = 0.0;
  std::filesystem::path dir;
};

/// Trains one configuration and writes config.resolved.json, metrics.csv,
/// timing.csv, summary.json and model.json (plus periodic checkpoints) into
/// `dir`. Every file is written atomically. A NumericalAbort leaves only
/// last_good.json behind and is rethrown.
RunOutcome execute_run(const RunConfig& config, const std::filesystem::path& dir);

/// metrics.csv contents: the header below followed by one line per row.
///   step,ce,mmr,composite,alpha,phi_max,lr,train_error,validation_error,
///   mean_selected_criterion,pool_forward,backprop_batch
std::string metrics_csv(const std::vector<MetricsRow>& rows);

/// First logged step whose validation accuracy reaches `target`.
std::optional<std::size_t> steps_to_target(const std::vector<MetricsRow>& rows, double target);

int cmd_train(const std::filesystem::path& config_path, const GlobalOptions& global,
              std::ostream& out, std::ostream& err);

/// Runs every policy × seed. Steps-to-target uses `target` if given, then the
/// config's target_accuracy, and otherwise the median final validation
/// accuracy of the random-policy runs minus 0.005.
int cmd_compare(const std::filesystem::path& config_path, const std::vector<std::string>& policies,
                const std::vector<std::uint64_t>& seeds, std::optional<double> target,
                const GlobalOptions& global, std::ostream& out, std::ostream& err);

/// One MMR-enabled run per α (and per seed); writes sweep.csv sorted by mean
/// validation error. α values are echoed exactly as given.
int cmd_sweep_alpha(const std::filesystem::path& config_path, const std::vector<std::string>& alphas,
                    const std::vector<std::uint64_t>& seeds, const GlobalOptions& global,
                    std::ostream& out, std::ostream& err);

struct ScoreSource {
  std::optional<std::filesystem::path> csv;  // labeled if label_column is present
  std::string label_column = "label";
  std::optional<std::filesystem::path> config;  // regenerate a run's data instead
  std::string split = "train";
};

int cmd_score(const std::filesystem::path& checkpoint, const ScoreSource& source,
              const std::filesystem::path& out_csv, std::ostream& out, std::ostream& err);

int cmd_gradcheck(std::size_t models, std::size_t n_classes, bool feature_grad, const std::string& loss,
                  const GlobalOptions& global, std::ostream& out, std::ostream& err);

int cmd_oracle_sweep(std::size_t draws, const GlobalOptions& global, std::ostream& out,
                     std::ostream& err);

int cmd_gen_data(const DataSpec& spec, const std::filesystem::path& out_csv, std::ostream& out,
                 std::ostream& err);

}  // namespace mmr
