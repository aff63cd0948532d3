#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmr/numeric.hpp"

namespace mmr {

using ClassIndex = std::size_t;

/// Labeled samples. Labels are dense 0-based class indices.
struct Dataset {
  Matrix features;
  std::vector<ClassIndex> labels;
  std::size_t n_classes = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }

  /// Throws if labels and rows disagree or a label is out of range.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
};

struct Split {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Malformed input file; the message carries the row/column location.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Isotropic Gaussian blobs. Class means sit at equal angles on a circle of
/// radius `center_radius` in the first two coordinates; rows are grouped by
/// class.
Dataset gen_blobs(std::size_t n_classes, std::size_t dim, std::size_t per_class,
                  double center_radius, double sigma, std::uint64_t seed);

/// Features are every column except `label_column`, in header order.
///
/// Label mapping: when the distinct label strings are exactly the integers
/// 0..k-1 they are used as class indices directly; any other label set is
/// mapped to indices in order of first appearance.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Reads every column as a feature; for label-free scoring.
Matrix load_csv_features(const std::filesystem::path& path);

/// True when the header of `path` names `column`.
bool csv_has_column(const std::filesystem::path& path, const std::string& column);

/// Header f0..f{d-1},label; values printed with 17 significant digits.
void save_csv(const std::filesystem::path& path, const Dataset& d);

struct Standardization {
  std::vector<double> mean;
  std::vector<double> std;

  /// Applies (x - mean) / std per column, skipping the division where std < 1e-12.
  void apply(Matrix& features) const;
};

/// Fits the per-feature mean/std on `train` and applies it to `train` and to
/// every dataset in `others`, in place.
Standardization standardize(Dataset& train, std::vector<Dataset*> others = {});

/// Fractions are (train, validation, test). The permutation is drawn from
/// `seed`; train and validation sizes are rounded, test takes the rest.
Split split_shuffle(const Dataset& d, std::array<double, 3> fractions, std::uint64_t seed);

/// Same slicing as split_shuffle, returning source row indices.
std::array<std::vector<std::size_t>, 3> split_indices(std::size_t rows,
                                                      std::array<double, 3> fractions,
                                                      std::uint64_t seed);

}  // namespace mmr
