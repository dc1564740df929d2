// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vmfkit/vmf.hpp"

namespace vmfkit {

/// M-component vMF mixture sum_j pi_j V_d(x | mu_j, kappa_j).
class VmfMixture {
 public:
  VmfMixture(std::vector<VmfComponent> components, Vector weights);

  int size() const { return static_cast<int>(components_.size()); }
  int dim() const { return components_.front().dim(); }
  const VmfComponent& component(int j) const {
    return components_[static_cast<std::size_t>(j)];
  }
  const std::vector<VmfComponent>& components() const { return components_; }
  const Vector& weights() const { return weights_; }

 private:
  std::vector<VmfComponent> components_;
  Vector weights_;
};

/// Posterior matrix p_ij, N x M, each row summing to 1.
struct Responsibilities {
  Matrix p;
};

struct EmReport {
  int iterations = 0;
  std::vector<double> log_likelihood_trace;  // init entry, then per iteration
  bool converged = false;
  int reseeds = 0;
};

enum class InitPolicy {
  kSphericalKmeansPlusPlus,  // greedy farthest-cosine seeding + Lloyd rounds
  kRandomDirections,
};

struct EmOptions {
  int max_iter = 200;
  double tol = 1e-6;  // per-sample |delta log-likelihood|
  InitPolicy init = InitPolicy::kSphericalKmeansPlusPlus;
  FitOptions fit;
  int max_reseeds = 3;
  int threads = 1;
};

/// E-step posterior p_ij proportional to pi_j C_d(kappa_j) e^{kappa_j mu_j.x_i},
/// row-normalized through log-sum-exp.
Responsibilities e_step(const VmfMixture& m, const UnitVectorBatch& data,
                        int threads = 1);

/// M-step: pi_j = mean_i p_ij and per-component weighted fit_mle. A component
/// whose mass drops below N * 1e-8 (or whose resultant cancels) is re-seeded
/// at the sample with the lowest maximum responsibility.
VmfMixture m_step(const UnitVectorBatch& data, const Responsibilities& resp,
                  const FitOptions& opts = {});

struct MStepResult {
  VmfMixture mixture;
  std::vector<int> reseeded;
};
MStepResult m_step_detailed(const UnitVectorBatch& data,
                            const Responsibilities& resp,
                            const FitOptions& opts = {});

/// Full EM fit. Stops when the per-sample log-likelihood change falls below
/// opts.tol or after opts.max_iter iterations; deterministic per seed. More
/// than opts.max_reseeds component re-seeds aborts with converged = false.
std::pair<VmfMixture, EmReport> fit_em(const UnitVectorBatch& data,
                                       int num_components,
                                       const EmOptions& opts,
                                       std::uint64_t seed);

double log_likelihood(const VmfMixture& m, const UnitVectorBatch& data);

/// Row-wise argmax; ties resolve to the lowest index.
std::vector<int> hard_assign(const Responsibilities& resp);

}  // namespace vmfkit
