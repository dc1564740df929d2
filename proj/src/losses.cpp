// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "vmfkit/losses.hpp"

#include <cmath>
#include <string>

#include "vmfkit/parallel.hpp"
#include "vmfkit/rng.hpp"

namespace vmfkit {
namespace {

void check_labels(const LabelBatch& labels, Eigen::Index n, Eigen::Index m) {
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DimensionMismatchError("label count differs from sample count");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= m) {
      throw ValidationError("label " + std::to_string(labels[i]) +
                            " at sample " + std::to_string(i) +
                            " outside [0, " + std::to_string(m) + ")");
    }
  }
}

// Row norms, throwing if any row has no direction.
Vector row_norms_checked(const Matrix& rows, const char* what) {
  Vector norms(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    norms(i) = rows.row(i).norm();
    if (!(norms(i) > kNormEpsilon)) {
      throw DegenerateInputError(std::string(what) + " row " +
                                 std::to_string(i) + " has norm below epsilon");
    }
  }
  return norms;
}

struct VmfmlWork {
  Matrix unit_features;  // N x d
  Vector feature_norms;  // N
  Matrix unit_means;     // M x d
  Vector weight_norms;   // M
  Matrix logits;         // N x M, margin applied
  Matrix cosines;        // N x M
};

VmfmlWork vmfml_prepare(const VmfmlHead& head, const RawFeatureBatch& features,
                        const LabelBatch& labels) {
  if (features.cols() != head.dim()) {
    throw DimensionMismatchError("feature dim differs from head dim");
  }
  check_labels(labels, features.rows(), head.num_classes());

  VmfmlWork w;
  w.feature_norms = row_norms_checked(features, "feature");
  w.unit_features = w.feature_norms.cwiseInverse().asDiagonal() * features;
  w.weight_norms = row_norms_checked(head.weights(), "weight");
  w.unit_means = w.weight_norms.cwiseInverse().asDiagonal() * head.weights();
  w.cosines = w.unit_features * w.unit_means.transpose();
  w.logits = head.kappa() * w.cosines;
  if (head.margin() != 1.0) {
    for (Eigen::Index i = 0; i < w.logits.rows(); ++i) {
      w.logits(i, labels[static_cast<std::size_t>(i)]) *= head.margin();
    }
  }
  return w;
}

// Softmax of each row in place; returns the summed cross entropy.
double softmax_rows_in_place(Matrix& logits, const LabelBatch& labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    const double lse =
        peak + std::log((logits.row(i).array() - peak).exp().sum());
    loss += lse - logits(i, labels[static_cast<std::size_t>(i)]);
    logits.row(i) = (logits.row(i).array() - lse).exp().matrix();
  }
  return loss;
}

}  // namespace

VmfmlHead::VmfmlHead(Matrix weights, double kappa, KappaPolicy policy,
                     double margin)
    : weights_(std::move(weights)),
      kappa_(kappa),
      policy_(policy),
      margin_(margin) {
  if (weights_.rows() < 1 || weights_.cols() < 2) {
    throw DomainError("head needs >= 1 class and dim >= 2");
  }
  if (!(kappa_ > 0.0) || !std::isfinite(kappa_)) {
    throw DomainError("head kappa must be finite and > 0");
  }
  if (!(margin_ >= 1.0)) throw DomainError("margin must be >= 1");
  row_norms_checked(weights_, "weight");
}

VmfmlHead VmfmlHead::with_fixed_kappa(Matrix weights, double kappa) {
  return VmfmlHead(std::move(weights), kappa, KappaPolicy::fixed());
}

VmfmlHead VmfmlHead::with_learned_kappa(Matrix weights) {
  const double kappa0 = std::sqrt(0.5 * static_cast<double>(weights.cols()));
  return VmfmlHead(std::move(weights), kappa0, KappaPolicy::learned());
}

Matrix VmfmlHead::unit_means() const {
  Matrix means = weights_;
  for (Eigen::Index j = 0; j < means.rows(); ++j) {
    means.row(j) /= means.row(j).norm();
  }
  return means;
}

void VmfmlHead::set_kappa(double kappa) {
  kappa_ = std::max(kappa, 1e-3);
}

LossOutput vmfml_forward(const VmfmlHead& head, const RawFeatureBatch& features,
                         const LabelBatch& labels, Reduction reduction) {
  VmfmlWork w = vmfml_prepare(head, features, labels);
  LossOutput out;
  out.loss = softmax_rows_in_place(w.logits, labels);
  out.probabilities = std::move(w.logits);
  if (reduction == Reduction::kMean) {
    out.loss /= static_cast<double>(features.rows());
  }
  return out;
}

LossOutput vmfml_backward(const VmfmlHead& head,
                          const RawFeatureBatch& features,
                          const LabelBatch& labels, Reduction reduction,
                          int threads) {
  const Eigen::Index N = features.rows();
  VmfmlWork w = vmfml_prepare(head, features, labels);

  LossOutput out;
  out.loss = softmax_rows_in_place(w.logits, labels);
  Matrix& probs = w.logits;  // now holds the row softmax

  // dL/dz_ij = p_ij - y_ij; fold the margin factor of the true-class logit
  // into dL/d(cosine) and dL/dkappa.
  const double m = head.margin();
  const double kappa = head.kappa();

  Matrix dcos = probs;  // becomes (p - y) * margin factor
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto yi = labels[static_cast<std::size_t>(i)];
    dcos(i, yi) = (dcos(i, yi) - 1.0) * m;
  }

  out.grad_kappa = (dcos.array() * w.cosines.array()).sum();

  // dL/dx_i = kappa sum_j dcos_ij mu_j, pulled back through x = f/||f||.
  out.grad_features.resize(N, head.dim());
  for_each_chunk(N, threads, [&](int, std::ptrdiff_t begin,
                                 std::ptrdiff_t end) {
    for (std::ptrdiff_t i = begin; i < end; ++i) {
      const Vector dx =
          kappa * (w.unit_means.transpose() * dcos.row(i).transpose());
      const Vector x = w.unit_features.row(i).transpose();
      out.grad_features.row(i) =
          ((dx - x * x.dot(dx)) / w.feature_norms(i)).transpose();
    }
  });

  // dL/dmu_j = kappa sum_i dcos_ij x_i, pulled back through mu = w/||w||.
  const Matrix dmu = kappa * (dcos.transpose() * w.unit_features);
  out.grad_weights.resize(head.num_classes(), head.dim());
  for (Eigen::Index j = 0; j < head.num_classes(); ++j) {
    const Vector mu = w.unit_means.row(j).transpose();
    const Vector g = dmu.row(j).transpose();
    out.grad_weights.row(j) =
        ((g - mu * mu.dot(g)) / w.weight_norms(j)).transpose();
  }

  out.probabilities = std::move(probs);
  if (reduction == Reduction::kMean) {
    const double inv = 1.0 / static_cast<double>(N);
    out.loss *= inv;
    out.grad_features *= inv;
    out.grad_weights *= inv;
    out.grad_kappa *= inv;
  }
  return out;
}

LossOutput softmax_forward_backward(const Matrix& weights, const Vector& biases,
                                    const RawFeatureBatch& features,
                                    const LabelBatch& labels,
                                    Reduction reduction) {
  if (weights.cols() != features.cols()) {
    throw DimensionMismatchError("weight dim differs from feature dim");
  }
  if (biases.size() != weights.rows()) {
    throw DimensionMismatchError("bias count differs from class count");
  }
  check_labels(labels, features.rows(), weights.rows());

  Matrix logits = features * weights.transpose();
  logits.rowwise() += biases.transpose();

  LossOutput out;
  out.loss = softmax_rows_in_place(logits, labels);
  Matrix grad_z = logits;  // p - y
  for (Eigen::Index i = 0; i < grad_z.rows(); ++i) {
    grad_z(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  out.grad_weights = grad_z.transpose() * features;
  out.grad_biases = grad_z.colwise().sum().transpose();
  out.grad_features = grad_z * weights;
  out.probabilities = std::move(logits);

  if (reduction == Reduction::kMean) {
    const double inv = 1.0 / static_cast<double>(features.rows());
    out.loss *= inv;
    out.grad_weights *= inv;
    out.grad_biases *= inv;
    out.grad_features *= inv;
  }
  return out;
}

CenterLossOutput center_loss(const RawFeatureBatch& features,
                             const LabelBatch& labels, const Matrix& centers) {
  if (centers.cols() != features.cols()) {
    throw DimensionMismatchError("center dim differs from feature dim");
  }
  check_labels(labels, features.rows(), centers.rows());

  CenterLossOutput out;
  out.grad_features.resize(features.rows(), features.cols());
  out.grad_centers = Matrix::Zero(centers.rows(), centers.cols());
  out.loss = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const auto yi = labels[static_cast<std::size_t>(i)];
    const Vector diff =
        features.row(i).transpose() - centers.row(yi).transpose();
    out.loss += 0.5 * diff.squaredNorm();
    out.grad_features.row(i) = diff.transpose();
    out.grad_centers.row(yi) -= diff.transpose();
  }
  return out;
}

WeightNormReport weight_norm_equivalence_check(const VmfmlHead& head,
                                               int num_samples,
                                               std::uint64_t seed) {
  Rng rng(seed);
  const int d = head.dim();
  const Matrix means = head.unit_means();
  WeightNormReport report;
  report.samples = num_samples;
  for (int s = 0; s < num_samples; ++s) {
    Vector x(d);
    double norm;
    do {
      for (int k = 0; k < d; ++k) x(k) = rng.normal();
      norm = x.norm();
    } while (!(norm > kNormEpsilon));
    x /= norm;
    for (int j = 0; j < head.num_classes(); ++j) {
      const Vector v = head.weights().row(j).transpose();
      const double mixture_logit = head.kappa() * means.row(j).dot(x);
      const double weight_norm_logit = head.kappa() * v.dot(x) / v.norm();
      report.max_abs_deviation = std::max(
          report.max_abs_deviation, std::abs(mixture_logit - weight_norm_logit));
    }
  }
  return report;
}

}  // namespace vmfkit
