// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "vmfkit/directional.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vmfkit {

UnitVector::UnitVector(Vector coords) : coords_(std::move(coords)) {
  if (coords_.size() < 2) {
    throw DomainError("unit vector needs dimension >= 2");
  }
  const double norm = coords_.norm();
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-9) {
    throw DomainError("unit vector norm is " + std::to_string(norm) +
                      ", expected 1 within 1e-9");
  }
}

UnitVectorBatch::UnitVectorBatch(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.cols() < 2) {
    throw DomainError("unit vector batch needs N >= 1 samples of dim >= 2");
  }
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    const double norm = rows_.row(i).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-9) {
      throw DomainError("batch row " + std::to_string(i) + " has norm " +
                        std::to_string(norm));
    }
  }
}

UnitVectorBatch UnitVectorBatch::normalized(const Matrix& raw) {
  if (raw.rows() < 1 || raw.cols() < 2) {
    throw DomainError("unit vector batch needs N >= 1 samples of dim >= 2");
  }
  Matrix rows = raw;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    if (!(norm > kNormEpsilon)) {
      throw DegenerateInputError("row " + std::to_string(i) +
                                 " has norm below epsilon, no direction");
    }
    rows.row(i) /= norm;
  }
  return UnitVectorBatch(std::move(rows));
}

UnitVector normalize(const RawFeature& f) {
  const double norm = f.norm();
  if (!(norm > kNormEpsilon)) {
    throw DegenerateInputError("vector norm below epsilon, no direction");
  }
  return UnitVector(f / norm);
}

Vector normalize_backward(const RawFeature& f, const Vector& grad_x) {
  if (grad_x.size() != f.size()) {
    throw DimensionMismatchError("gradient and feature dimensions differ");
  }
  const double norm = f.norm();
  if (!(norm > kNormEpsilon)) {
    throw DegenerateInputError("vector norm below epsilon, no direction");
  }
  const Vector x = f / norm;
  return (grad_x - x * x.dot(grad_x)) / norm;
}

double cosine_similarity(const UnitVector& a, const UnitVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatchError("cosine of vectors with different dims");
  }
  return std::clamp(a.coords().dot(b.coords()), -1.0, 1.0);
}

}  // namespace vmfkit
