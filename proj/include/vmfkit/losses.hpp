// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "vmfkit/directional.hpp"

namespace vmfkit {

// Integer class labels, one per sample, each in [0, M).
using LabelBatch = std::vector<int>;

enum class Reduction { kSum, kMean };

struct KappaPolicy {
  enum class Mode { kFixed, kLearned };
  Mode mode = Mode::kFixed;
  double lr_multiplier = 1.0;

  static KappaPolicy fixed() { return {Mode::kFixed, 1.0}; }
  static KappaPolicy learned(double lr_multiplier = 0.001) {
    return {Mode::kLearned, lr_multiplier};
  }
};

/// Classifier head of the mixture loss: unnormalized class weights w_j
/// (rows of W), one shared concentration kappa, and a multiplicative margin
/// m >= 1 applied to the true-class logit (m = 1 is the plain loss).
class VmfmlHead {
 public:
  VmfmlHead(Matrix weights, double kappa,
            KappaPolicy policy = KappaPolicy::fixed(), double margin = 1.0);

  /// kappa fixed at 16 unless stated otherwise.
  static VmfmlHead with_fixed_kappa(Matrix weights, double kappa = 16.0);
  /// kappa starts at sqrt(d/2) and trains with a 0.001 rate multiplier.
  static VmfmlHead with_learned_kappa(Matrix weights);

  int num_classes() const { return static_cast<int>(weights_.rows()); }
  int dim() const { return static_cast<int>(weights_.cols()); }
  const Matrix& weights() const { return weights_; }
  double kappa() const { return kappa_; }
  const KappaPolicy& kappa_policy() const { return policy_; }
  double margin() const { return margin_; }

  /// Rows normalized to the class mean directions mu_j = w_j / ||w_j||.
  Matrix unit_means() const;

  // Trainer access. set_kappa enforces the 1e-3 positivity floor.
  Matrix& mutable_weights() { return weights_; }
  void set_kappa(double kappa);

 private:
  Matrix weights_;
  double kappa_;
  KappaPolicy policy_;
  double margin_;
};

struct LossOutput {
  double loss = 0.0;
  Matrix probabilities;  // N x M, rows sum to 1
  Matrix grad_features;  // N x d, dL/df (tangent to each unit feature)
  Matrix grad_weights;   // M x d, dL/dw (tangent to each unit mean)
  Vector grad_biases;    // M, affine-softmax only
  double grad_kappa = 0.0;
};

/// Mixture-posterior cross entropy over logits z_ij = kappa mu_j . x_i with
/// x_i = f_i/||f_i||, mu_j = w_j/||w_j||; the true-class logit is scaled by
/// the head margin. Loss and probabilities only.
LossOutput vmfml_forward(const VmfmlHead& head, const RawFeatureBatch& features,
                         const LabelBatch& labels,
                         Reduction reduction = Reduction::kSum);

/// Forward plus the analytic gradient chain: dL/dz = p - y, dL/dkappa =
/// sum_j (p_j - y_j) mu_j . x, dL/dmu_j = (p_j - y_j) kappa x, and the
/// normalization pullbacks onto w and f.
LossOutput vmfml_backward(const VmfmlHead& head,
                          const RawFeatureBatch& features,
                          const LabelBatch& labels,
                          Reduction reduction = Reduction::kSum,
                          int threads = 1);

/// Plain affine softmax cross entropy over logits w_j . f + b_j, with
/// analytic gradients for weights, biases and features.
LossOutput softmax_forward_backward(const Matrix& weights, const Vector& biases,
                                    const RawFeatureBatch& features,
                                    const LabelBatch& labels,
                                    Reduction reduction = Reduction::kSum);

struct CenterLossOutput {
  double loss = 0.0;
  Matrix grad_features;  // f_i - c_{y_i}
  Matrix grad_centers;   // sum over class members of c_j - f_i
};

/// (1/2) sum_i ||f_i - c_{y_i}||^2. Center updates are the caller's job.
CenterLossOutput center_loss(const RawFeatureBatch& features,
                             const LabelBatch& labels, const Matrix& centers);

struct WeightNormReport {
  double max_abs_deviation = 0.0;
  int samples = 0;
};

/// Numerically confirms that the effective logit kappa mu.x coincides with
/// the weight-normalized form g (v.x)/||v|| for g = kappa, v = w.
WeightNormReport weight_norm_equivalence_check(const VmfmlHead& head,
                                               int num_samples = 100,
                                               std::uint64_t seed = 0);

}  // namespace vmfkit
