// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vmfkit/losses.hpp"

namespace vmfkit {

enum class Activation { kIdentity, kRelu, kPrelu };

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
  Activation activation = Activation::kRelu;
  Vector prelu_alpha;  // per-channel slope, size out, kPrelu only
};

/// Stack of affine + activation layers mapping raw inputs to the
/// pre-normalization features f.
class DenseNetwork {
 public:
  DenseNetwork() = default;
  explicit DenseNetwork(std::vector<DenseLayer> layers);

  /// dims = {input, hidden..., feature}; hidden layers get `hidden`
  /// activation (PReLU slopes start at 0.25), the last layer is identity.
  /// Weights are uniform in +-sqrt(6/(fan_in+fan_out)).
  static DenseNetwork random_init(const std::vector<int>& dims,
                                  Activation hidden, std::uint64_t seed);

  int input_dim() const;
  int feature_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  /// N x input -> N x feature.
  Matrix forward(const Matrix& inputs, int threads = 1) const;

 private:
  std::vector<DenseLayer> layers_;
};

struct LayerGrads {
  Matrix weights;
  Vector biases;
  Vector prelu_alpha;
};

struct NetworkGrads {
  std::vector<LayerGrads> layers;
  Matrix inputs;
};

/// Reverse-mode gradients of sum_i grad_features_i . f_i w.r.t. every
/// parameter and the inputs.
NetworkGrads backward(const DenseNetwork& net, const Matrix& inputs,
                      const Matrix& grad_features, int threads = 1);

enum class LossKind { kVmfml, kVmfmlMargin, kSoftmax, kSoftmaxCenter };

struct SoftmaxHead {
  Matrix weights;  // M x d
  Vector biases;   // M
};

struct CenterRegularizer {
  Matrix centers;                   // M x d
  double weight = 0.003;            // loss multiplier
  double center_update_rate = 0.5;  // separate rate for the center update
};

/// Network plus classifier head: the checkpointable training unit.
struct Classifier {
  DenseNetwork net;
  LossKind loss_kind = LossKind::kVmfml;
  std::optional<VmfmlHead> vmfml;
  std::optional<SoftmaxHead> softmax;
  std::optional<CenterRegularizer> center;

  static Classifier make(const DenseNetwork& net, LossKind kind,
                         int num_classes, double kappa, double margin,
                         KappaPolicy kappa_policy, std::uint64_t seed);
};

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 120;
  int epochs = 20;
  // (epoch, lr) drops; empty uses learning_rate throughout with one x0.1
  // drop at 80% of the epochs.
  std::vector<std::pair<int, double>> schedule;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct LabeledDataset {
  Matrix inputs;            // N x input_dim
  std::vector<int> labels;  // in [0, num_classes)
  int num_classes = 0;
  int image_width = 0;  // > 0 when rows are row-major images
};

struct TrainReport {
  std::vector<double> train_loss;     // per epoch, mean per-sample loss
  std::vector<double> eval_loss;      // empty without an eval set
  std::vector<double> eval_accuracy;  // likewise
  double wall_seconds = 0.0;
  bool diverged = false;
};

/// SGD with momentum: v <- m v - lr (g + wd theta); theta <- theta + v.
/// Weight decay skips kappa and the PReLU slopes; kappa uses its policy's
/// rate multiplier and is floored at 1e-3. Batch order is a seeded shuffle,
/// so a (config, seed) pair reproduces the run exactly. Training stops with
/// diverged = true if the loss turns non-finite.
TrainReport train(Classifier& clf, const LabeledDataset& train_set,
                  const LabeledDataset* eval_set, const SgdConfig& cfg);

std::vector<int> predict(const Classifier& clf, const Matrix& inputs);

enum class FlipPolicy { kNone, kHorizontalFlipMax };

/// Unit-normalized features; the flip-max policy runs the mirrored images
/// through the network, takes the element-wise maximum and renormalizes.
/// Requires image_width > 0 (error otherwise).
UnitVectorBatch extract_features(const DenseNetwork& net, const Matrix& inputs,
                                 FlipPolicy policy = FlipPolicy::kNone,
                                 int image_width = 0, int threads = 1);

/// Mirrors each row-major image row (width columns per pixel row).
Matrix horizontal_flip(const Matrix& inputs, int image_width);

/// Element-wise max of two feature vectors, renormalized to unit length.
UnitVector flip_max_aggregate(const RawFeature& a, const RawFeature& b);

}  // namespace vmfkit
