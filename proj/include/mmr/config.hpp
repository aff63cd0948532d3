#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmr/trainer.hpp"

namespace mmr {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid run configuration. The message names the offending field (as a
/// dotted path) or the line/column of a JSON syntax error.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DataSpec {
  std::string source = "blobs";  // "blobs" or "csv"
  std::size_t n_classes = 3;
  std::size_t dim = 2;
  std::size_t per_class = 100;
  double center_radius = 4.0;
  double sigma = 1.0;
  std::uint64_t seed = 7;
  std::string path;
  std::string label_column = "label";
};

/// Everything needed to reproduce one training run.
struct RunConfig {
  DataSpec data;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  std::uint64_t split_seed = 11;
  bool standardize = true;
  std::vector<std::size_t> hidden;  // hidden layer widths; empty = linear model
  TrainConfig train;
  std::size_t checkpoint_interval = 0;  // 0 = final checkpoint only
  std::string out_dir = "run";
};

/// Defaults applied to every field a document omits.
RunConfig default_run_config();

/// Parses a JSON run configuration. Unknown keys are rejected.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved configuration; parse_run_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

/// Loads or generates the dataset, splits it and standardizes on the
/// training part.
Split prepare_data(const RunConfig& config);

}  // namespace mmr
