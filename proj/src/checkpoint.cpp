#include "mmr/checkpoint.hpp"

#include "mmr/io.hpp"

namespace mmr {

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, std::size_t cols) {
  Matrix m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto row = j.at(i).get<std::vector<double>>();
    if (row.size() != cols) throw Error("checkpoint: ragged weight matrix");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = row[c];
  }
  return m;
}

std::size_t width(const nlohmann::json& rows) {
  return rows.empty() ? 0 : rows.at(0).size();
}

}  // namespace

nlohmann::json model_to_json(const Model& m) {
  nlohmann::json j;
  j["format"] = "mmr-model";
  j["version"] = 1;
  j["input_dim"] = m.extractor.input_dim;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : m.extractor.layers) {
    j["layers"].push_back({{"activation", to_string(l.activation)},
                           {"weight", matrix_to_json(l.weight)},
                           {"bias", l.bias}});
  }
  j["head"] = {{"weight", matrix_to_json(m.head.weight)}, {"bias", m.head.bias}};
  return j;
}

Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "mmr-model") throw Error("checkpoint: unexpected format tag");
    if (j.at("version") != 1) throw Error("checkpoint: unsupported version");
    Model m;
    m.extractor.input_dim = j.at("input_dim").get<std::size_t>();
    std::size_t dim = m.extractor.input_dim;
    for (const auto& l : j.at("layers")) {
      DenseLayer layer;
      layer.activation = activation_from_string(l.at("activation").get<std::string>());
      layer.weight = matrix_from_json(l.at("weight"), dim);
      layer.bias = l.at("bias").get<std::vector<double>>();
      dim = layer.out_dim();
      m.extractor.layers.push_back(std::move(layer));
    }
    const auto& head = j.at("head");
    m.head.weight = matrix_from_json(head.at("weight"), width(head.at("weight")));
    m.head.bias = head.at("bias").get<std::vector<double>>();
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& m) {
  write_file_atomic(path, model_to_json(m).dump(1) + "\n");
}

Model load_checkpoint(const std::filesystem::path& path) {
  try {
    return model_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace mmr
