#include "mmr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mmr/io.hpp"
#include "mmr/rng.hpp"

namespace mmr {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (table.header.empty()) {
      table.header = split_line(line);
      continue;
    }
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw DataError(path.string() + ": empty file");
  if (table.rows.empty()) throw DataError(path.string() + ": no data rows");
  return table;
}

double parse_cell(const std::filesystem::path& path, const CsvTable& table, std::size_t r,
                  std::size_t c) {
  const std::string& cell = table.rows[r][c];
  const auto where = [&] {
    return path.string() + ": line " + std::to_string(table.line_numbers[r]) + " (data row " +
           std::to_string(r + 1) + "), column '" + table.header[c] + "'";
  };
  if (cell.empty()) throw DataError(where() + ": empty cell");
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw DataError(where() + ": not a finite number: '" + cell + "'");
  }
  return value;
}

bool is_dense_integer_set(const std::vector<std::string>& distinct) {
  std::vector<std::size_t> values;
  for (const auto& s : distinct) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return false;
    values.push_back(v);
  }
  std::sort(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] != i) return false;
  return true;
}

}  // namespace

void Dataset::validate() const {
  if (labels.size() != features.rows()) {
    throw DimensionError("Dataset: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(features.rows()) + " rows");
  }
  if (n_classes < 2) throw Error("Dataset: need at least 2 classes");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) {
      throw Error("Dataset: label " + std::to_string(labels[i]) + " at row " +
                  std::to_string(i) + " is not below n_classes=" + std::to_string(n_classes));
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.select_rows(indices);
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels[i]);
  out.n_classes = n_classes;
  return out;
}

Dataset gen_blobs(std::size_t n_classes, std::size_t dim, std::size_t per_class,
                  double center_radius, double sigma, std::uint64_t seed) {
  if (n_classes < 2) throw Error("gen_blobs: n_classes must be at least 2");
  if (dim < 2) throw Error("gen_blobs: dim must be at least 2");
  if (!(sigma > 0.0)) throw Error("gen_blobs: sigma must be positive");

  Rng rng(seed);
  Dataset d;
  d.n_classes = n_classes;
  d.features = Matrix(n_classes * per_class, dim);
  d.labels.resize(n_classes * per_class);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                         static_cast<double>(n_classes);
    const double mx = center_radius * std::cos(angle);
    const double my = center_radius * std::sin(angle);
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t r = c * per_class + k;
      d.labels[r] = c;
      for (std::size_t j = 0; j < dim; ++j) {
        const double mean = j == 0 ? mx : (j == 1 ? my : 0.0);
        d.features(r, j) = mean + sigma * rng.normal();
      }
    }
  }
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  const CsvTable table = read_table(path);
  const auto it = std::find(table.header.begin(), table.header.end(), label_column);
  if (it == table.header.end()) {
    throw DataError(path.string() + ": no column named '" + label_column + "'");
  }
  const auto label_col = static_cast<std::size_t>(it - table.header.begin());

  Dataset d;
  d.features = Matrix(table.rows.size(), table.header.size() - 1);
  std::vector<std::string> distinct;
  std::map<std::string, std::size_t> first_seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& label = table.rows[r][label_col];
    if (label.empty()) {
      throw DataError(path.string() + ": line " + std::to_string(table.line_numbers[r]) +
                      " (data row " + std::to_string(r + 1) + "), column '" + label_column +
                      "': empty label");
    }
    if (first_seen.emplace(label, distinct.size()).second) distinct.push_back(label);
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == label_col) continue;
      d.features(r, out_c++) = parse_cell(path, table, r, c);
    }
  }

  const bool direct = is_dense_integer_set(distinct);
  d.labels.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const std::string& label = row[label_col];
    d.labels.push_back(direct ? std::stoul(label) : first_seen.at(label));
  }
  d.n_classes = distinct.size();
  if (d.n_classes < 2) throw DataError(path.string() + ": need at least 2 distinct labels");
  return d;
}

Matrix load_csv_features(const std::filesystem::path& path) {
  const CsvTable table = read_table(path);
  Matrix m(table.rows.size(), table.header.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (std::size_t c = 0; c < table.header.size(); ++c) m(r, c) = parse_cell(path, table, r, c);
  return m;
}

bool csv_has_column(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto header = split_line(line);
    return std::find(header.begin(), header.end(), column) != header.end();
  }
  throw DataError(path.string() + ": empty file");
}

void save_csv(const std::filesystem::path& path, const Dataset& d) {
  std::ostringstream out;
  for (std::size_t j = 0; j < d.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", d.features(i, j));
      out << buf << ',';
    }
    out << d.labels[i] << '\n';
  }
  write_file_atomic(path, out.str());
}

void Standardization::apply(Matrix& features) const {
  if (features.cols() != mean.size()) throw DimensionError("standardize: column count mismatch");
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < features.cols(); ++j) {
      double v = features(i, j) - mean[j];
      if (std[j] >= 1e-12) v /= std[j];
      features(i, j) = v;
    }
  }
}

Standardization standardize(Dataset& train, std::vector<Dataset*> others) {
  if (train.size() == 0) throw Error("standardize: empty training set");
  const std::size_t n = train.size();
  const std::size_t d = train.dim();
  Standardization s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += train.features(i, j);
    s.mean[j] = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = train.features(i, j) - s.mean[j];
      sq += c * c;
    }
    s.std[j] = std::sqrt(sq / static_cast<double>(n));
  }
  s.apply(train.features);
  for (Dataset* other : others) s.apply(other->features);
  return s;
}

std::array<std::vector<std::size_t>, 3> split_indices(std::size_t rows,
                                                      std::array<double, 3> fractions,
                                                      std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw Error("split_shuffle: fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("split_shuffle: fractions must sum to 1");
  if (!(fractions[0] > 0.0)) throw Error("split_shuffle: training fraction must be positive");

  std::vector<std::size_t> perm(rows);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = rows; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  const auto count = [&](double f) {
    return std::min<std::size_t>(rows, static_cast<std::size_t>(std::llround(f * static_cast<double>(rows))));
  };
  const std::size_t n_train = count(fractions[0]);
  const std::size_t n_val = std::min(rows - n_train, count(fractions[1]));

  std::array<std::vector<std::size_t>, 3> out;
  out[0].assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out[1].assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out[2].assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
  return out;
}

Split split_shuffle(const Dataset& d, std::array<double, 3> fractions, std::uint64_t seed) {
  const auto parts = split_indices(d.size(), fractions, seed);
  return Split{d.subset(parts[0]), d.subset(parts[1]), d.subset(parts[2])};
}

}  // namespace mmr
