// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "vmfkit/vmf.hpp"

#include <cmath>

#include "vmfkit/rng.hpp"
#include "vmfkit/special_functions.hpp"

namespace vmfkit {
namespace {

double kappa_from_resultant(int dim, double rbar, const FitOptions& opts) {
  const double d = static_cast<double>(dim);
  const double r = std::min(rbar, 1.0 - 1e-9);
  double kappa = (r * d - r * r * r) / (1.0 - r * r);
  kappa = std::clamp(kappa, 0.0, opts.kappa_max);
  if (opts.newton_refine && r > 0.0 && kappa > 0.0 &&
      kappa < opts.kappa_max) {
    for (int it = 0; it < opts.newton_iters; ++it) {
      const double a = mean_resultant_ratio(dim, kappa);
      // A'(kappa) = 1 - A^2 - (d-1) A / kappa
      const double da = 1.0 - a * a - (d - 1.0) * a / kappa;
      if (!(da > 0.0)) break;
      kappa = std::clamp(kappa - (a - r) / da, 0.0, opts.kappa_max);
      if (kappa == 0.0) break;
    }
  }
  return kappa;
}

VmfComponent fit_weighted(const UnitVectorBatch& data, const Vector& weights,
                          const FitOptions& opts) {
  if (weights.size() != data.count()) {
    throw DimensionMismatchError("weights length differs from sample count");
  }
  if ((weights.array() < 0.0).any()) {
    throw DomainError("fit weights must be >= 0");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) throw DomainError("fit weights sum to zero");

  const Vector resultant = data.rows().transpose() * weights;
  const double norm = resultant.norm();
  if (!(norm > kNormEpsilon)) {
    throw DegenerateInputError(
        "weighted resultant cancels; mean direction undefined");
  }
  const double rbar = std::min(norm / total, 1.0);
  return VmfComponent(UnitVector(resultant / norm),
                      kappa_from_resultant(static_cast<int>(data.dim()), rbar,
                                           opts));
}

}  // namespace

VmfComponent::VmfComponent(UnitVector mu, double kappa)
    : mu_(std::move(mu)), kappa_(kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw DomainError("vMF concentration must be finite and >= 0");
  }
}

double log_density(const VmfComponent& c, const UnitVector& x) {
  if (x.dim() != c.mean_direction().dim()) {
    throw DimensionMismatchError("sample and component dimensions differ");
  }
  return log_c_d(c.dim(), c.concentration()).value +
         c.concentration() * c.mean_direction().coords().dot(x.coords());
}

VmfComponent fit_mle(const UnitVectorBatch& data, const FitOptions& opts) {
  return fit_weighted(data, Vector::Ones(data.count()), opts);
}

VmfComponent fit_mle(const UnitVectorBatch& data, const Vector& weights,
                     const FitOptions& opts) {
  return fit_weighted(data, weights, opts);
}

UnitVectorBatch sample(const VmfComponent& c, int n, std::uint64_t seed) {
  if (n < 1) throw DomainError("sample count must be >= 1");
  const int d = c.dim();
  const double dm1 = static_cast<double>(d - 1);
  const double kappa = c.concentration();

  // Envelope parameters for the cosine distribution
  //   p(t) ~ (1 - t^2)^{(d-3)/2} e^{kappa t}.
  const double b =
      (-2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1)) / dm1;
  const double x0 = (1.0 - b) / (1.0 + b);
  const double accept_c = kappa * x0 + dm1 * std::log(1.0 - x0 * x0);

  Rng rng(seed);
  Matrix out(n, d);
  const Vector& mu = c.mean_direction().coords();

  // Householder reflection taking e_1 to mu (identity when mu ~ e_1).
  Vector house = -mu;
  house(0) += 1.0;
  const double house_n2 = house.squaredNorm();

  Vector y(d);
  for (int i = 0; i < n; ++i) {
    double t;
    for (;;) {
      const double z = rng.beta(0.5 * dm1, 0.5 * dm1);
      t = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
      const double u = rng.uniform_pos();
      if (kappa * t + dm1 * std::log(1.0 - x0 * t) - accept_c >= std::log(u)) {
        break;
      }
    }
    // tangent direction uniform on S^{d-2}
    double vnorm2;
    do {
      for (int k = 1; k < d; ++k) y(k) = rng.normal();
      vnorm2 = y.tail(d - 1).squaredNorm();
    } while (!(vnorm2 > 0.0));
    y.tail(d - 1) *= std::sqrt(std::max(0.0, 1.0 - t * t) / vnorm2);
    y(0) = t;

    if (house_n2 > kNormEpsilon) {
      y -= house * (2.0 * house.dot(y) / house_n2);
    }
    out.row(i) = y / y.norm();
  }
  return UnitVectorBatch(std::move(out));
}

}  // namespace vmfkit
