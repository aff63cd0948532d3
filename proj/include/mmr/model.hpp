#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmr/numeric.hpp"

namespace mmr {

enum class Activation { relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Matrix weight;  // out × in
  std::vector<double> bias;
  Activation activation = Activation::relu;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

/// Feature extractor φ = F(x; θ). An empty layer list is the identity map.
struct Extractor {
  std::size_t input_dim = 0;
  std::vector<DenseLayer> layers;

  std::size_t output_dim() const { return layers.empty() ? input_dim : layers.back().out_dim(); }
};

/// Last linear layer: row j of `weight` is w_j, scores s_j(φ) = w_jᵀφ + b_j.
struct LinearHead {
  Matrix weight;  // n_classes × feat_dim
  std::vector<double> bias;

  std::size_t n_classes() const { return weight.rows(); }
  std::size_t feat_dim() const { return weight.cols(); }

  /// Scores for a single feature vector.
  std::vector<double> scores(std::span<const double> phi) const;
};

struct Model {
  Extractor extractor;
  LinearHead head;

  std::size_t input_dim() const { return extractor.input_dim; }
  std::size_t n_classes() const { return head.n_classes(); }

  /// Checks that layer dimensions chain and the head matches the extractor.
  void validate() const;

  std::size_t parameter_count() const;
};

/// `layer_dims` = (input, hidden...). Hidden layers use relu. Weights are
/// uniform in ±√(6/(fan_in+fan_out)), biases zero.
Model init_model(std::span<const std::size_t> layer_dims, std::size_t n_classes,
                 std::uint64_t seed);

struct ForwardCache {
  // activations[0] is the input batch; activations[l+1] = act(pre_activations[l]).
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
  Matrix scores;

  const Matrix& features() const { return activations.back(); }
  std::size_t batch_size() const { return scores.rows(); }
};

/// Parameter-shaped gradient container.
struct Gradients {
  std::vector<Matrix> layer_weight;
  std::vector<std::vector<double>> layer_bias;
  Matrix head_weight;
  std::vector<double> head_bias;

  static Gradients zeros_like(const Model& m);
  bool all_finite() const;
};

ForwardCache forward(const Model& model, const Matrix& inputs);

/// Scores = φWᵀ + b for a batch of features.
Matrix head_scores(const LinearHead& head, const Matrix& features);

/// Back-propagates dL/dscores. `extra_head_grad` (same shape as W, or empty)
/// is added to the head weight gradient; `extra_feature_grad` (batch ×
/// feat_dim, or empty) is added to dL/dφ before it enters the extractor.
Gradients backward(const Model& model, const ForwardCache& cache, const Matrix& d_scores,
                   const Matrix& extra_head_grad = {}, const Matrix& extra_feature_grad = {});

// Flat views in a fixed order: per layer (weight, bias), then head (weight, bias).
std::vector<double> flatten(const Model& m);
void unflatten(std::span<const double> flat, Model& m);
std::vector<double> flatten(const Gradients& g);

}  // namespace mmr
