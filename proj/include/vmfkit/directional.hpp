// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include "vmfkit/errors.hpp"

namespace vmfkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Pre-normalization activations f. Batches are sample-major: row i holds
// sample i.
using RawFeature = Vector;
using RawFeatureBatch = Matrix;

// Norms at or below this have no numerically meaningful direction.
inline constexpr double kNormEpsilon = 1e-12;

/// A point on S^{d-1}; construction enforces | ||coords|| - 1 | <= 1e-9.
class UnitVector {
 public:
  explicit UnitVector(Vector coords);

  const Vector& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }

 private:
  Vector coords_;
};

/// N unit vectors of a shared dimension, one per row.
class UnitVectorBatch {
 public:
  explicit UnitVectorBatch(Matrix rows);

  /// Row-normalizes a raw batch; throws DegenerateInputError naming the
  /// first offending row if any row norm <= kNormEpsilon.
  static UnitVectorBatch normalized(const Matrix& raw);

  const Matrix& rows() const { return rows_; }
  Eigen::Index count() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }
  UnitVector row(Eigen::Index i) const { return UnitVector(rows_.row(i)); }

 private:
  Matrix rows_;
};

UnitVector normalize(const RawFeature& f);

/// Pullback of a gradient through x = f / ||f||:
///   df = (dx - x (x . dx)) / ||f||.
/// The result is tangent to x.
Vector normalize_backward(const RawFeature& f, const Vector& grad_x);

/// a . b clamped into [-1, 1].
double cosine_similarity(const UnitVector& a, const UnitVector& b);

}  // namespace vmfkit
