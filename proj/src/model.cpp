#include "mmr/model.hpp"

#include <cmath>

#include "mmr/rng.hpp"

namespace mmr {

namespace {

void glorot_fill(Matrix& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.values()) v = rng.uniform(-bound, bound);
}

void add_bias(Matrix& m, std::span<const double> bias) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m(i, j);
  return out;
}

void append(std::vector<double>& out, std::span<const double> v) {
  out.insert(out.end(), v.begin(), v.end());
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw Error("unknown activation '" + s + "'");
}

std::vector<double> LinearHead::scores(std::span<const double> phi) const {
  if (phi.size() != feat_dim()) throw DimensionError("LinearHead::scores: feature length mismatch");
  std::vector<double> s(n_classes());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = dot(weight.row(j), phi) + bias[j];
  return s;
}

void Model::validate() const {
  std::size_t dim = extractor.input_dim;
  for (std::size_t l = 0; l < extractor.layers.size(); ++l) {
    const auto& layer = extractor.layers[l];
    if (layer.in_dim() != dim || layer.bias.size() != layer.out_dim()) {
      throw DimensionError("Model: layer " + std::to_string(l) + " does not chain");
    }
    dim = layer.out_dim();
  }
  if (head.feat_dim() != dim || head.bias.size() != head.n_classes()) {
    throw DimensionError("Model: head does not match extractor output");
  }
  if (head.n_classes() < 2) throw Error("Model: need at least 2 classes");
}

std::size_t Model::parameter_count() const {
  std::size_t n = head.weight.size() + head.bias.size();
  for (const auto& l : extractor.layers) n += l.weight.size() + l.bias.size();
  return n;
}

Model init_model(std::span<const std::size_t> layer_dims, std::size_t n_classes,
                 std::uint64_t seed) {
  if (layer_dims.empty()) throw Error("init_model: layer_dims must name the input dimension");
  if (n_classes < 2) throw Error("init_model: need at least 2 classes");
  Rng rng(seed);
  Model m;
  m.extractor.input_dim = layer_dims[0];
  for (std::size_t l = 1; l < layer_dims.size(); ++l) {
    DenseLayer layer{Matrix(layer_dims[l], layer_dims[l - 1]),
                     std::vector<double>(layer_dims[l], 0.0), Activation::relu};
    glorot_fill(layer.weight, rng);
    m.extractor.layers.push_back(std::move(layer));
  }
  m.head.weight = Matrix(n_classes, layer_dims.back());
  m.head.bias.assign(n_classes, 0.0);
  glorot_fill(m.head.weight, rng);
  return m;
}

Matrix head_scores(const LinearHead& head, const Matrix& features) {
  Matrix s = matmul_transposed(features, head.weight);
  add_bias(s, head.bias);
  return s;
}

ForwardCache forward(const Model& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(inputs.cols()) +
                         " columns, model expects " + std::to_string(model.input_dim()));
  }
  ForwardCache cache;
  cache.activations.push_back(inputs);
  for (const auto& layer : model.extractor.layers) {
    Matrix z = matmul_transposed(cache.activations.back(), layer.weight);
    add_bias(z, layer.bias);
    Matrix a = z;
    if (layer.activation == Activation::relu) {
      for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
    }
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(a));
  }
  cache.scores = head_scores(model.head, cache.features());
  return cache;
}

Gradients Gradients::zeros_like(const Model& m) {
  Gradients g;
  for (const auto& l : m.extractor.layers) {
    g.layer_weight.emplace_back(l.weight.rows(), l.weight.cols());
    g.layer_bias.emplace_back(l.bias.size(), 0.0);
  }
  g.head_weight = Matrix(m.head.weight.rows(), m.head.weight.cols());
  g.head_bias.assign(m.head.bias.size(), 0.0);
  return g;
}

bool Gradients::all_finite() const {
  for (const auto& w : layer_weight)
    if (!mmr::all_finite(w.values())) return false;
  for (const auto& b : layer_bias)
    if (!mmr::all_finite(b)) return false;
  return mmr::all_finite(head_weight.values()) && mmr::all_finite(head_bias);
}

Gradients backward(const Model& model, const ForwardCache& cache, const Matrix& d_scores,
                   const Matrix& extra_head_grad, const Matrix& extra_feature_grad) {
  if (!d_scores.same_shape(cache.scores)) throw DimensionError("backward: dL/dscores shape mismatch");
  if (!extra_head_grad.empty() && !extra_head_grad.same_shape(model.head.weight)) {
    throw DimensionError("backward: extra head gradient shape mismatch");
  }
  if (!extra_feature_grad.empty() && !extra_feature_grad.same_shape(cache.features())) {
    throw DimensionError("backward: extra feature gradient shape mismatch");
  }

  Gradients g;
  g.head_weight = transposed_matmul(d_scores, cache.features());
  if (!extra_head_grad.empty()) {
    auto gw = g.head_weight.values();
    auto ex = extra_head_grad.values();
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += ex[i];
  }
  g.head_bias = column_sums(d_scores);

  const auto n_layers = model.extractor.layers.size();
  g.layer_weight.resize(n_layers);
  g.layer_bias.resize(n_layers);
  if (n_layers == 0) return g;

  Matrix upstream = matmul(d_scores, model.head.weight);  // dL/dφ
  if (!extra_feature_grad.empty()) {
    auto u = upstream.values();
    auto ex = extra_feature_grad.values();
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += ex[i];
  }
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = model.extractor.layers[l];
    if (layer.activation == Activation::relu) {
      auto u = upstream.values();
      auto z = cache.pre_activations[l].values();
      for (std::size_t i = 0; i < u.size(); ++i)
        if (!(z[i] > 0.0)) u[i] = 0.0;
    }
    g.layer_weight[l] = transposed_matmul(upstream, cache.activations[l]);
    g.layer_bias[l] = column_sums(upstream);
    if (l > 0) upstream = matmul(upstream, layer.weight);
  }
  return g;
}

std::vector<double> flatten(const Model& m) {
  std::vector<double> out;
  out.reserve(m.parameter_count());
  for (const auto& l : m.extractor.layers) {
    append(out, l.weight.values());
    append(out, l.bias);
  }
  append(out, m.head.weight.values());
  append(out, m.head.bias);
  return out;
}

void unflatten(std::span<const double> flat, Model& m) {
  if (flat.size() != m.parameter_count()) throw DimensionError("unflatten: length mismatch");
  std::size_t pos = 0;
  const auto take = [&](std::span<double> dst) {
    for (double& v : dst) v = flat[pos++];
  };
  for (auto& l : m.extractor.layers) {
    take(l.weight.values());
    take(l.bias);
  }
  take(m.head.weight.values());
  take(m.head.bias);
}

std::vector<double> flatten(const Gradients& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.layer_weight.size(); ++l) {
    append(out, g.layer_weight[l].values());
    append(out, g.layer_bias[l]);
  }
  append(out, g.head_weight.values());
  append(out, g.head_bias);
  return out;
}

}  // namespace mmr
