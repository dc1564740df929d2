// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "vmfkit/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vmfkit/parallel.hpp"
#include "vmfkit/rng.hpp"
#include "vmfkit/special_functions.hpp"

namespace vmfkit {
namespace {

// Per-row logits log pi_j + log C_d(kappa_j) + kappa_j mu_j.x_i.
Matrix component_logits(const VmfMixture& m, const UnitVectorBatch& data) {
  if (data.dim() != m.dim()) {
    throw DimensionMismatchError("data and mixture dimensions differ");
  }
  const int M = m.size();
  Matrix scaled_means(M, data.dim());
  Vector offsets(M);
  for (int j = 0; j < M; ++j) {
    const VmfComponent& c = m.component(j);
    scaled_means.row(j) =
        c.concentration() * c.mean_direction().coords().transpose();
    offsets(j) = std::log(std::max(m.weights()(j),
                                   std::numeric_limits<double>::min())) +
                 log_c_d(c.dim(), c.concentration()).value;
  }
  Matrix logits = data.rows() * scaled_means.transpose();
  logits.rowwise() += offsets.transpose();
  return logits;
}

double row_log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double peak = row.maxCoeff();
  return peak + std::log((row.array() - peak).exp().sum());
}

VmfComponent reseed_component(const UnitVectorBatch& data,
                              const Responsibilities& resp,
                              double fallback_kappa) {
  // Re-center on the sample the current mixture explains worst.
  Eigen::Index worst = 0;
  resp.p.rowwise().maxCoeff().minCoeff(&worst);
  return VmfComponent(UnitVector(data.rows().row(worst)), fallback_kappa);
}

}  // namespace

VmfMixture::VmfMixture(std::vector<VmfComponent> components, Vector weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw DomainError("mixture needs >= 1 component");
  if (weights_.size() != static_cast<Eigen::Index>(components_.size())) {
    throw DimensionMismatchError("weights length differs from component count");
  }
  if ((weights_.array() < 0.0).any() ||
      std::abs(weights_.sum() - 1.0) > 1e-9) {
    throw DomainError("mixture weights must be >= 0 and sum to 1");
  }
  const int d = components_.front().dim();
  for (const auto& c : components_) {
    if (c.dim() != d) {
      throw DimensionMismatchError("components have differing dimensions");
    }
  }
}

Responsibilities e_step(const VmfMixture& m, const UnitVectorBatch& data,
                        int threads) {
  Matrix logits = component_logits(m, data);
  for_each_chunk(logits.rows(), threads,
                 [&](int, std::ptrdiff_t begin, std::ptrdiff_t end) {
                   for (std::ptrdiff_t i = begin; i < end; ++i) {
                     const double lse = row_log_sum_exp(logits.row(i));
                     logits.row(i) =
                         (logits.row(i).array() - lse).exp().matrix();
                   }
                 });
  return Responsibilities{std::move(logits)};
}

MStepResult m_step_detailed(const UnitVectorBatch& data,
                            const Responsibilities& resp,
                            const FitOptions& opts) {
  const Eigen::Index N = data.count();
  const Eigen::Index M = resp.p.cols();
  if (resp.p.rows() != N) {
    throw DimensionMismatchError("responsibility rows differ from samples");
  }

  const Vector mass = resp.p.colwise().sum().transpose();
  std::vector<VmfComponent> components;
  components.reserve(static_cast<std::size_t>(M));
  std::vector<int> reseeded;
  std::vector<double> live_kappas;
  const double empty_mass = static_cast<double>(N) * 1e-8;

  for (Eigen::Index j = 0; j < M; ++j) {
    if (mass(j) >= empty_mass) {
      try {
        components.push_back(fit_mle(data, resp.p.col(j), opts));
        live_kappas.push_back(components.back().concentration());
        continue;
      } catch (const DegenerateInputError&) {
        // fall through to the re-seed path
      }
    }
    reseeded.push_back(static_cast<int>(j));
    const double fallback =
        live_kappas.empty()
            ? 1.0
            : live_kappas[live_kappas.size() / 2];
    components.push_back(reseed_component(data, resp, fallback));
  }

  Vector weights = mass / static_cast<double>(N);
  for (int j : reseeded) weights(j) = 1.0 / static_cast<double>(N);
  weights /= weights.sum();
  return MStepResult{VmfMixture(std::move(components), std::move(weights)),
                     std::move(reseeded)};
}

VmfMixture m_step(const UnitVectorBatch& data, const Responsibilities& resp,
                  const FitOptions& opts) {
  return m_step_detailed(data, resp, opts).mixture;
}

double log_likelihood(const VmfMixture& m, const UnitVectorBatch& data) {
  const Matrix logits = component_logits(m, data);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    total += row_log_sum_exp(logits.row(i));
  }
  return total;
}

std::vector<int> hard_assign(const Responsibilities& resp) {
  std::vector<int> labels(static_cast<std::size_t>(resp.p.rows()));
  for (Eigen::Index i = 0; i < resp.p.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < resp.p.cols(); ++j) {
      if (resp.p(i, j) > resp.p(i, best)) best = static_cast<int>(j);
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

namespace {

VmfMixture init_mixture(const UnitVectorBatch& data, int M,
                        const EmOptions& opts, Rng& rng) {
  const Eigen::Index N = data.count();
  const int d = static_cast<int>(data.dim());
  Matrix centers(M, d);

  if (opts.init == InitPolicy::kRandomDirections) {
    for (int j = 0; j < M; ++j) {
      Vector v(d);
      double n2;
      do {
        for (int k = 0; k < d; ++k) v(k) = rng.normal();
        n2 = v.norm();
      } while (!(n2 > kNormEpsilon));
      centers.row(j) = v.transpose() / n2;
    }
  } else {
    // Greedy farthest-cosine seeding.
    centers.row(0) = data.rows().row(
        static_cast<Eigen::Index>(rng.uniform_index(
            static_cast<std::uint64_t>(N))));
    Vector best_cos = data.rows() * centers.row(0).transpose();
    for (int j = 1; j < M; ++j) {
      Eigen::Index farthest = 0;
      best_cos.minCoeff(&farthest);
      centers.row(j) = data.rows().row(farthest);
      best_cos = best_cos.cwiseMax(data.rows() * centers.row(j).transpose());
    }
    // Lloyd rounds on cosine distance.
    for (int round = 0; round < 10; ++round) {
      Matrix cos = data.rows() * centers.transpose();
      Matrix sums = Matrix::Zero(M, d);
      Vector counts = Vector::Zero(M);
      for (Eigen::Index i = 0; i < N; ++i) {
        Eigen::Index j;
        cos.row(i).maxCoeff(&j);
        sums.row(j) += data.rows().row(i);
        counts(j) += 1.0;
      }
      for (int j = 0; j < M; ++j) {
        const double norm = sums.row(j).norm();
        if (counts(j) > 0.0 && norm > kNormEpsilon) {
          centers.row(j) = sums.row(j) / norm;
        } else {
          Vector worst_cos = (data.rows() * centers.transpose())
                                 .rowwise()
                                 .maxCoeff();
          Eigen::Index farthest = 0;
          worst_cos.minCoeff(&farthest);
          centers.row(j) = data.rows().row(farthest);
        }
      }
    }
  }

  // Hard assignment to the seeded centers gives the initial pi and kappa.
  Matrix cos = data.rows() * centers.transpose();
  Matrix resp = Matrix::Zero(N, M);
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::Index j;
    cos.row(i).maxCoeff(&j);
    resp(i, j) = 1.0;
  }
  return m_step(data, Responsibilities{std::move(resp)}, opts.fit);
}

}  // namespace

std::pair<VmfMixture, EmReport> fit_em(const UnitVectorBatch& data,
                                       int num_components,
                                       const EmOptions& opts,
                                       std::uint64_t seed) {
  if (num_components < 1) throw DomainError("need >= 1 component");
  if (data.count() < num_components) {
    throw DomainError("fewer samples than components");
  }
  Rng rng(seed);
  VmfMixture mixture = init_mixture(data, num_components, opts, rng);

  EmReport report;
  double prev_ll = log_likelihood(mixture, data);
  report.log_likelihood_trace.push_back(prev_ll);

  for (int it = 0; it < opts.max_iter; ++it) {
    const Responsibilities resp = e_step(mixture, data, opts.threads);
    MStepResult step = m_step_detailed(data, resp, opts.fit);
    mixture = std::move(step.mixture);
    report.reseeds += static_cast<int>(step.reseeded.size());
    ++report.iterations;

    const double ll = log_likelihood(mixture, data);
    report.log_likelihood_trace.push_back(ll);
    if (step.reseeded.empty() && ll + 1e-8 < prev_ll) {
      throw NumericalError("EM log-likelihood decreased by " +
                           std::to_string(prev_ll - ll));
    }
    if (report.reseeds > opts.max_reseeds) {
      report.converged = false;
      return {std::move(mixture), std::move(report)};
    }
    const double delta = std::abs(ll - prev_ll) /
                         static_cast<double>(data.count());
    prev_ll = ll;
    if (step.reseeded.empty() && delta < opts.tol) {
      report.converged = true;
      break;
    }
  }
  return {std::move(mixture), std::move(report)};
}

}  // namespace vmfkit
