// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "vmfkit/directional.hpp"

namespace vmfkit {

inline constexpr double kKappaMax = 1e5;

/// A single vMF component (mu, kappa) on S^{d-1}.
class VmfComponent {
 public:
  VmfComponent(UnitVector mu, double kappa);

  const UnitVector& mean_direction() const { return mu_; }
  double concentration() const { return kappa_; }
  int dim() const { return static_cast<int>(mu_.dim()); }

 private:
  UnitVector mu_;
  double kappa_;
};

/// log V_d(x | mu, kappa) = log C_d(kappa) + kappa mu.x
double log_density(const VmfComponent& c, const UnitVector& x);

struct FitOptions {
  double kappa_max = kKappaMax;
  // Closed-form kappa estimate kappa = (r d - r^3)/(1 - r^2) by default;
  // optionally refined by Newton steps on A_d(kappa) = r.
  bool newton_refine = false;
  int newton_iters = 4;
};

/// Maximum-likelihood fit. The weighted mean resultant length
/// r = ||sum_i w_i x_i|| / sum_i w_i drives the kappa estimate; r is clamped
/// to 1 - 1e-9 so kappa stays finite (then clamped to kappa_max). Throws
/// DegenerateInputError when the resultant norm is <= kNormEpsilon (the mean
/// direction is undefined, e.g. an antipodal pair).
VmfComponent fit_mle(const UnitVectorBatch& data, const FitOptions& opts = {});
VmfComponent fit_mle(const UnitVectorBatch& data, const Vector& weights,
                     const FitOptions& opts = {});

/// n i.i.d. draws from vMF(mu, kappa); rejection sampling on the cosine
/// t = mu.x with tangent direction uniform on S^{d-2}, rotated from the
/// first axis onto mu by a Householder reflection. Deterministic per seed.
UnitVectorBatch sample(const VmfComponent& c, int n, std::uint64_t seed);

}  // namespace vmfkit
