// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "vmfkit/network.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "vmfkit/parallel.hpp"
#include "vmfkit/rng.hpp"

namespace vmfkit {
namespace {

void apply_activation(const DenseLayer& layer, Matrix& pre) {
  switch (layer.activation) {
    case Activation::kIdentity:
      return;
    case Activation::kRelu:
      pre = pre.cwiseMax(0.0);
      return;
    case Activation::kPrelu:
      for (Eigen::Index c = 0; c < pre.cols(); ++c) {
        const double alpha = layer.prelu_alpha(c);
        for (Eigen::Index i = 0; i < pre.rows(); ++i) {
          if (pre(i, c) < 0.0) pre(i, c) *= alpha;
        }
      }
      return;
  }
}

Vector sphere_row(int d, Rng& rng) {
  Vector v(d);
  double norm;
  do {
    for (int k = 0; k < d; ++k) v(k) = rng.normal();
    norm = v.norm();
  } while (!(norm > kNormEpsilon));
  return v / norm;
}

}  // namespace

DenseNetwork::DenseNetwork(std::vector<DenseLayer> layers)
    : layers_(std::move(layers)) {
  if (layers_.empty()) throw DomainError("network needs >= 1 layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.biases.size() != layer.weights.rows()) {
      throw DimensionMismatchError("layer " + std::to_string(l) +
                                   " bias size differs from output size");
    }
    if (layer.activation == Activation::kPrelu &&
        layer.prelu_alpha.size() != layer.weights.rows()) {
      throw DimensionMismatchError("layer " + std::to_string(l) +
                                   " needs one PReLU slope per channel");
    }
    if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
      throw DimensionMismatchError("layer " + std::to_string(l) +
                                   " input differs from previous output");
    }
  }
}

DenseNetwork DenseNetwork::random_init(const std::vector<int>& dims,
                                       Activation hidden, std::uint64_t seed) {
  if (dims.size() < 2) throw DomainError("need at least input and feature dims");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer;
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) {
        layer.weights(r, c) = bound * (2.0 * rng.uniform() - 1.0);
      }
    }
    layer.biases = Vector::Zero(fan_out);
    layer.activation = (l + 2 == dims.size()) ? Activation::kIdentity : hidden;
    if (layer.activation == Activation::kPrelu) {
      layer.prelu_alpha = Vector::Constant(fan_out, 0.25);
    }
    layers.push_back(std::move(layer));
  }
  return DenseNetwork(std::move(layers));
}

int DenseNetwork::input_dim() const {
  return static_cast<int>(layers_.front().weights.cols());
}

int DenseNetwork::feature_dim() const {
  return static_cast<int>(layers_.back().weights.rows());
}

Matrix DenseNetwork::forward(const Matrix& inputs, int threads) const {
  if (inputs.cols() != input_dim()) {
    throw DimensionMismatchError("input dim differs from network input");
  }
  Matrix activations(inputs.rows(), feature_dim());
  for_each_chunk(inputs.rows(), threads,
                 [&](int, std::ptrdiff_t begin, std::ptrdiff_t end) {
                   Matrix a = inputs.middleRows(begin, end - begin);
                   for (const DenseLayer& layer : layers_) {
                     Matrix pre = a * layer.weights.transpose();
                     pre.rowwise() += layer.biases.transpose();
                     apply_activation(layer, pre);
                     a = std::move(pre);
                   }
                   activations.middleRows(begin, end - begin) = a;
                 });
  return activations;
}

NetworkGrads backward(const DenseNetwork& net, const Matrix& inputs,
                      const Matrix& grad_features, int threads) {
  const auto& layers = net.layers();
  const std::size_t L = layers.size();
  if (grad_features.rows() != inputs.rows() ||
      grad_features.cols() != net.feature_dim()) {
    throw DimensionMismatchError("upstream gradient shape mismatch");
  }

  const int chunks = num_chunks(inputs.rows());
  std::vector<std::vector<LayerGrads>> partial(
      static_cast<std::size_t>(chunks));
  NetworkGrads grads;
  grads.inputs.resize(inputs.rows(), inputs.cols());

  for_each_chunk(inputs.rows(), threads, [&](int chunk, std::ptrdiff_t begin,
                                             std::ptrdiff_t end) {
    // Forward trace: pre-activations per layer plus layer inputs.
    std::vector<Matrix> pre(L);
    std::vector<Matrix> layer_in(L);
    Matrix a = inputs.middleRows(begin, end - begin);
    for (std::size_t l = 0; l < L; ++l) {
      layer_in[l] = a;
      pre[l] = a * layers[l].weights.transpose();
      pre[l].rowwise() += layers[l].biases.transpose();
      a = pre[l];
      apply_activation(layers[l], a);
    }

    std::vector<LayerGrads>& local = partial[static_cast<std::size_t>(chunk)];
    local.resize(L);
    Matrix delta = grad_features.middleRows(begin, end - begin);
    for (std::size_t l = L; l-- > 0;) {
      LayerGrads& lg = local[l];
      Matrix dpre = std::move(delta);
      switch (layers[l].activation) {
        case Activation::kIdentity:
          break;
        case Activation::kRelu:
          dpre = (pre[l].array() > 0.0).select(dpre, 0.0);
          break;
        case Activation::kPrelu: {
          lg.prelu_alpha = Vector::Zero(pre[l].cols());
          for (Eigen::Index c = 0; c < pre[l].cols(); ++c) {
            const double alpha = layers[l].prelu_alpha(c);
            for (Eigen::Index i = 0; i < pre[l].rows(); ++i) {
              if (pre[l](i, c) < 0.0) {
                lg.prelu_alpha(c) += dpre(i, c) * pre[l](i, c);
                dpre(i, c) *= alpha;
              }
            }
          }
          break;
        }
      }
      lg.weights = dpre.transpose() * layer_in[l];
      lg.biases = dpre.colwise().sum().transpose();
      delta = dpre * layers[l].weights;
    }
    grads.inputs.middleRows(begin, end - begin) = delta;
  });

  // Reduce chunk partials in chunk order: bit-stable for any thread count.
  grads.layers.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    LayerGrads& lg = grads.layers[l];
    lg.weights = Matrix::Zero(layers[l].weights.rows(),
                              layers[l].weights.cols());
    lg.biases = Vector::Zero(layers[l].biases.size());
    if (layers[l].activation == Activation::kPrelu) {
      lg.prelu_alpha = Vector::Zero(layers[l].prelu_alpha.size());
    }
    for (int c = 0; c < chunks; ++c) {
      const LayerGrads& pc = partial[static_cast<std::size_t>(c)][l];
      lg.weights += pc.weights;
      lg.biases += pc.biases;
      if (lg.prelu_alpha.size() > 0) lg.prelu_alpha += pc.prelu_alpha;
    }
  }
  return grads;
}

Classifier Classifier::make(const DenseNetwork& net, LossKind kind,
                            int num_classes, double kappa, double margin,
                            KappaPolicy kappa_policy, std::uint64_t seed) {
  if (num_classes < 2) throw DomainError("need >= 2 classes");
  Rng rng(seed);
  const int d = net.feature_dim();
  Matrix head_weights(num_classes, d);
  for (int j = 0; j < num_classes; ++j) {
    head_weights.row(j) = sphere_row(d, rng).transpose();
  }

  Classifier clf;
  clf.net = net;
  clf.loss_kind = kind;
  switch (kind) {
    case LossKind::kVmfml:
      clf.vmfml = VmfmlHead(std::move(head_weights), kappa, kappa_policy, 1.0);
      break;
    case LossKind::kVmfmlMargin:
      clf.vmfml =
          VmfmlHead(std::move(head_weights), kappa, kappa_policy, margin);
      break;
    case LossKind::kSoftmax:
      clf.softmax =
          SoftmaxHead{std::move(head_weights), Vector::Zero(num_classes)};
      break;
    case LossKind::kSoftmaxCenter:
      clf.softmax =
          SoftmaxHead{std::move(head_weights), Vector::Zero(num_classes)};
      clf.center = CenterRegularizer{Matrix::Zero(num_classes, d)};
      break;
  }
  return clf;
}

namespace {

// v <- momentum v - lr (g + wd theta); theta <- theta + v.
template <typename T>
void sgd_step(T& theta, T& velocity, const T& grad, double lr, double momentum,
              double weight_decay) {
  velocity = momentum * velocity - lr * (grad + weight_decay * theta);
  theta += velocity;
}

double epoch_learning_rate(const SgdConfig& cfg, int epoch) {
  if (!cfg.schedule.empty()) {
    double lr = cfg.learning_rate;
    for (const auto& [at, value] : cfg.schedule) {
      if (epoch >= at) lr = value;
    }
    return lr;
  }
  const int drop_at = (cfg.epochs * 4) / 5;
  return (cfg.epochs > 1 && epoch >= drop_at) ? 0.1 * cfg.learning_rate
                                              : cfg.learning_rate;
}

struct BatchLoss {
  double loss_sum = 0.0;
  Matrix grad_features;
};

}  // namespace

TrainReport train(Classifier& clf, const LabeledDataset& train_set,
                  const LabeledDataset* eval_set, const SgdConfig& cfg) {
  const Eigen::Index N = train_set.inputs.rows();
  if (N < 1) throw DomainError("training set is empty");
  if (cfg.batch_size < 1 || cfg.epochs < 0 || !(cfg.learning_rate >= 0.0) ||
      !(cfg.momentum >= 0.0 && cfg.momentum < 1.0) ||
      !(cfg.weight_decay >= 0.0)) {
    throw ValidationError("invalid SGD configuration");
  }
  if (static_cast<Eigen::Index>(train_set.labels.size()) != N) {
    throw DimensionMismatchError("label count differs from sample count");
  }

  auto& layers = clf.net.mutable_layers();
  std::vector<LayerGrads> velocity(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    velocity[l].weights = Matrix::Zero(layers[l].weights.rows(),
                                       layers[l].weights.cols());
    velocity[l].biases = Vector::Zero(layers[l].biases.size());
    if (layers[l].activation == Activation::kPrelu) {
      velocity[l].prelu_alpha = Vector::Zero(layers[l].prelu_alpha.size());
    }
  }
  Matrix head_velocity;
  Vector bias_velocity;
  double kappa_velocity = 0.0;
  if (clf.vmfml) {
    head_velocity = Matrix::Zero(clf.vmfml->num_classes(), clf.vmfml->dim());
  }
  if (clf.softmax) {
    head_velocity = Matrix::Zero(clf.softmax->weights.rows(),
                                 clf.softmax->weights.cols());
    bias_velocity = Vector::Zero(clf.softmax->biases.size());
  }

  Rng shuffle_rng(cfg.seed);
  TrainReport report;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch_learning_rate(cfg, epoch);
    const auto order = shuffled_indices(static_cast<std::size_t>(N),
                                        shuffle_rng);
    double epoch_loss = 0.0;

    for (Eigen::Index start = 0; start < N; start += cfg.batch_size) {
      const Eigen::Index B =
          std::min<Eigen::Index>(cfg.batch_size, N - start);
      Matrix batch(B, train_set.inputs.cols());
      LabelBatch labels(static_cast<std::size_t>(B));
      for (Eigen::Index i = 0; i < B; ++i) {
        batch.row(i) = train_set.inputs.row(
            static_cast<Eigen::Index>(order[start + i]));
        labels[static_cast<std::size_t>(i)] =
            train_set.labels[order[start + i]];
      }

      const Matrix features = clf.net.forward(batch, cfg.threads);
      const double scale = 1.0 / static_cast<double>(B);
      BatchLoss bl;

      if (clf.loss_kind == LossKind::kVmfml ||
          clf.loss_kind == LossKind::kVmfmlMargin) {
        LossOutput out = vmfml_backward(*clf.vmfml, features, labels,
                                        Reduction::kSum, cfg.threads);
        bl.loss_sum = out.loss;
        bl.grad_features = std::move(out.grad_features);
        sgd_step(clf.vmfml->mutable_weights(), head_velocity,
                 Matrix((scale * out.grad_weights).eval()), lr, cfg.momentum,
                 cfg.weight_decay);
        if (clf.vmfml->kappa_policy().mode == KappaPolicy::Mode::kLearned) {
          const double kl = lr * clf.vmfml->kappa_policy().lr_multiplier;
          kappa_velocity = cfg.momentum * kappa_velocity -
                           kl * (scale * out.grad_kappa);
          clf.vmfml->set_kappa(clf.vmfml->kappa() + kappa_velocity);
        }
      } else {
        LossOutput out =
            softmax_forward_backward(clf.softmax->weights, clf.softmax->biases,
                                     features, labels, Reduction::kSum);
        bl.loss_sum = out.loss;
        bl.grad_features = std::move(out.grad_features);
        if (clf.loss_kind == LossKind::kSoftmaxCenter) {
          CenterLossOutput cl =
              center_loss(features, labels, clf.center->centers);
          bl.loss_sum += clf.center->weight * cl.loss;
          bl.grad_features += clf.center->weight * cl.grad_features;
          // Centers move with their own rate, normalized per class count.
          Vector counts = Vector::Zero(clf.center->centers.rows());
          for (int label : labels) counts(label) += 1.0;
          for (Eigen::Index j = 0; j < clf.center->centers.rows(); ++j) {
            clf.center->centers.row(j) -= clf.center->center_update_rate /
                                          (counts(j) + 1.0) *
                                          cl.grad_centers.row(j);
          }
        }
        sgd_step(clf.softmax->weights, head_velocity,
                 Matrix((scale * out.grad_weights).eval()), lr, cfg.momentum,
                 cfg.weight_decay);
        sgd_step(clf.softmax->biases, bias_velocity,
                 Vector((scale * out.grad_biases).eval()), lr, cfg.momentum,
                 cfg.weight_decay);
      }

      if (!std::isfinite(bl.loss_sum)) {
        report.diverged = true;
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        return report;
      }
      epoch_loss += bl.loss_sum;

      NetworkGrads ng =
          backward(clf.net, batch, bl.grad_features, cfg.threads);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        sgd_step(layers[l].weights, velocity[l].weights,
                 Matrix((scale * ng.layers[l].weights).eval()), lr,
                 cfg.momentum, cfg.weight_decay);
        sgd_step(layers[l].biases, velocity[l].biases,
                 Vector((scale * ng.layers[l].biases).eval()), lr,
                 cfg.momentum, cfg.weight_decay);
        if (layers[l].activation == Activation::kPrelu) {
          // global rate, no decay on the slopes
          sgd_step(layers[l].prelu_alpha, velocity[l].prelu_alpha,
                   Vector((scale * ng.layers[l].prelu_alpha).eval()), lr,
                   cfg.momentum, 0.0);
        }
      }
    }

    report.train_loss.push_back(epoch_loss / static_cast<double>(N));
    if (eval_set != nullptr) {
      const Matrix ef = clf.net.forward(eval_set->inputs, cfg.threads);
      double eval_loss = 0.0;
      if (clf.loss_kind == LossKind::kVmfml ||
          clf.loss_kind == LossKind::kVmfmlMargin) {
        eval_loss = vmfml_forward(*clf.vmfml, ef, eval_set->labels,
                                  Reduction::kMean)
                        .loss;
      } else {
        eval_loss =
            softmax_forward_backward(clf.softmax->weights, clf.softmax->biases,
                                     ef, eval_set->labels, Reduction::kMean)
                .loss;
      }
      const auto pred = predict(clf, eval_set->inputs);
      double correct = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == eval_set->labels[i]) correct += 1.0;
      }
      report.eval_loss.push_back(eval_loss);
      report.eval_accuracy.push_back(correct /
                                     static_cast<double>(pred.size()));
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

std::vector<int> predict(const Classifier& clf, const Matrix& inputs) {
  const Matrix features = clf.net.forward(inputs);
  Matrix logits;
  if (clf.loss_kind == LossKind::kVmfml ||
      clf.loss_kind == LossKind::kVmfmlMargin) {
    Matrix unit = features;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
      const double norm = unit.row(i).norm();
      if (!(norm > kNormEpsilon)) {
        throw DegenerateInputError("feature row " + std::to_string(i) +
                                   " has no direction");
      }
      unit.row(i) /= norm;
    }
    logits = unit * clf.vmfml->unit_means().transpose();
  } else {
    logits = features * clf.softmax->weights.transpose();
    logits.rowwise() += clf.softmax->biases.transpose();
  }
  std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index j;
    logits.row(i).maxCoeff(&j);
    labels[static_cast<std::size_t>(i)] = static_cast<int>(j);
  }
  return labels;
}

Matrix horizontal_flip(const Matrix& inputs, int image_width) {
  if (image_width < 1 || inputs.cols() % image_width != 0) {
    throw ValidationError("inputs are not image-shaped for this width");
  }
  const Eigen::Index rows_per_image = inputs.cols() / image_width;
  Matrix flipped(inputs.rows(), inputs.cols());
  for (Eigen::Index r = 0; r < rows_per_image; ++r) {
    for (Eigen::Index c = 0; c < image_width; ++c) {
      flipped.col(r * image_width + c) =
          inputs.col(r * image_width + (image_width - 1 - c));
    }
  }
  return flipped;
}

UnitVector flip_max_aggregate(const RawFeature& a, const RawFeature& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatchError("feature sizes differ");
  }
  return normalize(a.cwiseMax(b));
}

UnitVectorBatch extract_features(const DenseNetwork& net, const Matrix& inputs,
                                 FlipPolicy policy, int image_width,
                                 int threads) {
  Matrix features = net.forward(inputs, threads);
  if (policy == FlipPolicy::kHorizontalFlipMax) {
    if (image_width < 1) {
      throw ValidationError("flip policy requires image-shaped inputs");
    }
    const Matrix flipped_features =
        net.forward(horizontal_flip(inputs, image_width), threads);
    features = features.cwiseMax(flipped_features);
  }
  return UnitVectorBatch::normalized(features);
}

}  // namespace vmfkit
