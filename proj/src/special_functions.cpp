// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "vmfkit/special_functions.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace vmfkit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Olver's uniform asymptotic polynomials u_k(t); u_k has nonzero
// coefficients only for powers t^{k+2m}, m = 0..k (DLMF 10.41.3 ff).
// Generated from the recurrence
//   u_{k+1} = t^2 (1-t^2)/2 u_k' + 1/8 Int_0^t (1-5 s^2) u_k ds.
constexpr double kU1[] = {1.25000000000000000e-01, -2.08333333333333343e-01};
constexpr double kU2[] = {7.03125000000000000e-02, -4.01041666666666685e-01,
                          3.34201388888888895e-01};
constexpr double kU3[] = {7.32421875000000000e-02, -8.91210937500000022e-01,
                          1.84646267361111116e+00, -1.02581259645061729e+00};
constexpr double kU4[] = {1.12152099609375000e-01, -2.36408691406249982e+00,
                          8.78912353515625000e+00, -1.12070026162229937e+01,
                          4.66958442342624735e+00};
constexpr double kU5[] = {2.27108001708984375e-01, -7.36879435947963213e+00,
                          4.25349987453884566e+01, -9.18182415432400205e+01,
                          8.46362176746007293e+01, -2.82120725582002443e+01};
constexpr double kU6[] = {5.72501420974731445e-01, -2.64914304869515540e+01,
                          2.18190511744211591e+02, -6.99579627376132521e+02,
                          1.05999045252799988e+03, -7.65252468141181680e+02,
                          2.12570130039217133e+02};
constexpr double kU7[] = {1.72772750258445740e+00, -1.08090919788394658e+02,
                          1.20090291321635254e+03, -5.30564697861340301e+03,
                          1.16553933368645339e+04, -1.35865500064341377e+04,
                          8.06172218173730926e+03, -1.91945766231840707e+03};
constexpr double kU8[] = {6.07404200127348304e+00, -4.93915304773087996e+02,
                          7.10951430248936413e+03, -4.11926549688975501e+04,
                          1.22200464983017460e+05, -2.03400177280415548e+05,
                          1.92547001232531533e+05, -9.69805983886375179e+04,
                          2.02042913309661490e+04};
constexpr double kU9[] = {2.43805296995560639e+01, -2.49983048181120967e+03,
                          4.52187689813627294e+04, -3.31645172484563605e+05,
                          1.26836527332162485e+06, -2.81356322658653418e+06,
                          3.76327129765640385e+06, -2.99801591853810661e+06,
                          1.31176361466297717e+06, -2.42919187900551333e+05};

double u_poly(int k, const double* c, double t) {
  // sum_m c[m] t^{k+2m}, m = 0..k
  const double t2 = t * t;
  double tk = 1.0;
  for (int i = 0; i < k; ++i) tk *= t;
  double acc = 0.0;
  for (int m = 0; m <= k; ++m) {
    acc += c[m] * tk;
    tk *= t2;
  }
  return acc;
}

// Ascending series sum_k (kappa/2)^{2k+nu} / (k! Gamma(nu+k+1)), summed in
// linear double relative to the peak term so that rounding in the scale
// factor cancels out of the tail.
double series_log(double nu, double kappa) {
  const double log_half = std::log(0.5 * kappa);
  const double np1 = nu + 1.0;
  const auto k_peak = static_cast<long>(
      std::max(0.0, 0.5 * (-np1 + std::sqrt(np1 * np1 + kappa * kappa))));
  const double log_peak = (2.0 * static_cast<double>(k_peak) + nu) * log_half -
                          std::lgamma(static_cast<double>(k_peak) + 1.0) -
                          std::lgamma(nu + static_cast<double>(k_peak) + 1.0);
  const double q = 0.25 * kappa * kappa;

  double total = 1.0;
  double term = 1.0;
  for (long k = k_peak + 1;; ++k) {
    term *= q / (static_cast<double>(k) * (nu + static_cast<double>(k)));
    total += term;
    if (term < 1e-19 * total) break;
  }
  term = 1.0;
  for (long k = k_peak; k > 0;) {
    term *= (static_cast<double>(k) * (nu + static_cast<double>(k))) / q;
    --k;
    total += term;
    if (term < 1e-19 * total) break;
  }
  return log_peak + std::log(total);
}

// Uniform asymptotic expansion for large order (DLMF 10.41.3):
//   I_nu(nu z) ~ e^{nu eta} / (sqrt(2 pi nu) (1+z^2)^{1/4}) sum_k u_k(p)/nu^k
// with p = (1+z^2)^{-1/2}, eta = sqrt(1+z^2) + log(z / (1 + sqrt(1+z^2))).
double olver_log(double nu, double kappa) {
  const double z = kappa / nu;
  const double s = std::hypot(1.0, z);
  const double eta = s + std::log(z / (1.0 + s));
  const double p = 1.0 / s;

  const double* u[] = {kU1, kU2, kU3, kU4, kU5, kU6, kU7, kU8, kU9};
  double acc = 0.0;
  for (int k = 9; k >= 1; --k) acc = (acc + u_poly(k, u[k - 1], p)) / nu;
  acc += 1.0;

  return nu * eta - 0.5 * std::log(2.0 * std::numbers::pi * nu) -
         0.5 * std::log(s) + std::log(acc);
}

// Small order, very large argument: seed two orders near 52 with the uniform
// expansion, then recurse downward in the order. Values are carried scaled
// by e^{-kappa}, which keeps them inside double range for any kappa.
double recurrence_log(double nu, double kappa) {
  const auto shift = static_cast<long>(std::ceil(52.0 - nu));
  const double hi = nu + static_cast<double>(shift);
  double above = std::exp(olver_log(hi + 1.0, kappa) - kappa);
  double current = std::exp(olver_log(hi, kappa) - kappa);
  for (double order = hi; order > nu + 0.5; order -= 1.0) {
    const double below = above + (2.0 * order / kappa) * current;
    above = current;
    current = below;
  }
  return std::log(current) + kappa;
}

}  // namespace

BesselOrder::BesselOrder(double nu) : nu_(nu) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw DomainError("Bessel order must be finite and >= 0");
  }
}

double log_bessel_i(BesselOrder nu, double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw DomainError("Bessel argument must be finite and >= 0");
  }
  const double v = nu.value();
  if (kappa == 0.0) return v == 0.0 ? 0.0 : -kInf;
  if (kappa <= std::max(30.0, v) || (v < 50.0 && kappa <= 1024.0)) {
    return series_log(v, kappa);
  }
  if (v >= 50.0) return olver_log(v, kappa);
  return recurrence_log(v, kappa);
}

LogNormalizer log_c_d(int dim, double kappa) {
  if (dim < 2) throw DomainError("vMF dimension must be >= 2");
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw DomainError("vMF concentration must be finite and >= 0");
  }
  const double half_d = 0.5 * static_cast<double>(dim);
  double value;
  if (kappa == 0.0) {
    // Uniform limit: C_d(0) = Gamma(d/2) / (2 pi^{d/2}), the reciprocal of
    // the surface area of S^{d-1}.
    value = std::lgamma(half_d) - std::numbers::ln2 -
            half_d * std::log(std::numbers::pi);
  } else {
    value = (half_d - 1.0) * std::log(kappa) -
            half_d * std::log(2.0 * std::numbers::pi) -
            log_bessel_i(BesselOrder(half_d - 1.0), kappa);
  }
  return LogNormalizer{value, dim, kappa};
}

double mean_resultant_ratio(int dim, double kappa) {
  if (dim < 2) throw DomainError("vMF dimension must be >= 2");
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw DomainError("vMF concentration must be finite and >= 0");
  }
  if (kappa == 0.0) return 0.0;
  const double half_d = 0.5 * static_cast<double>(dim);
  return std::exp(log_bessel_i(BesselOrder(half_d), kappa) -
                  log_bessel_i(BesselOrder(half_d - 1.0), kappa));
}

}  // namespace vmfkit
