// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <utility>
#include <vector>

#include "vmfkit/directional.hpp"

namespace vmfkit {

struct VerificationPair {
  int a = 0;
  int b = 0;
  bool genuine = false;
};
using PairList = std::vector<VerificationPair>;

/// Cosine scores split by pair label.
struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

struct RocPoint {
  double far = 0.0;
  double tar = 0.0;
  double threshold = 0.0;
};

struct TarResult {
  double tar = 0.0;
  double threshold = 0.0;
};

struct VerificationReport {
  double accuracy = 0.0;
  double threshold = 0.0;
  std::vector<RocPoint> roc;                // far ascending
  std::map<double, TarResult> tar_at_far;  // keyed by requested FAR
};

/// Element-wise mean renormalized to unit length; order-independent up to
/// rounding. Degenerate when the mean nearly cancels.
UnitVector aggregate_template(const UnitVectorBatch& features);

ScoreSet score_pairs(const UnitVectorBatch& features, const PairList& pairs);

/// Acceptance is score >= threshold throughout. For each FAR target the
/// threshold is the smallest observed score whose empirical FAR is <= the
/// target (stepping just above the largest impostor score when no observed
/// score qualifies); TAR is the accepted fraction of genuine scores. No
/// interpolation.
std::map<double, TarResult> tar_at_far(const ScoreSet& scores,
                                       const std::vector<double>& far_targets);

/// Exhaustive sweep over midpoints of the sorted distinct scores plus
/// accept-all / reject-all sentinels; returns the best (TP+TN)/(P+N) and the
/// lowest threshold achieving it.
std::pair<double, double> best_threshold_accuracy(const ScoreSet& scores);

/// Per fold, the threshold is chosen on the union of the other folds and the
/// accuracy measured on the held-out fold. Returns the mean and the
/// per-fold accuracies.
std::pair<double, std::vector<double>> kfold_accuracy(
    const UnitVectorBatch& features, const std::vector<PairList>& folds);

/// Step-function ROC over all observed thresholds, far ascending; includes
/// the (0, .) and (1, 1) endpoints.
std::vector<RocPoint> roc_curve(const ScoreSet& scores);

VerificationReport verification_report(const ScoreSet& scores,
                                       const std::vector<double>& far_targets);

}  // namespace vmfkit
