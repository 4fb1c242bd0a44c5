#pragma once

// E^phi = Tr(w^phi H) for the constant-pairing Hamiltonian, expressed through
// the gauge-rotated densities by the extended Wick theorem:
//   E^phi   = sum_k (t_k - mu)(rho_k + rho_kbar) - g <B^dag B>^phi
//   <B^dag B>^phi = (sum_k kappabar_k)(sum_k kappa_k) + sum_k rho_k rho_kbar
// The k = k' term of B^dag B is N_k N_kbar, whose Wick value is
// kappabar_k kappa_k + rho_k rho_kbar; the first piece sits inside the
// coherent product, the second is the diagonal normal contraction.

#include <complex>
#include <span>
#include <vector>

#include "pairtherm/gauge_kernel.hpp"
#include "pairtherm/pairing_model.hpp"

namespace pairtherm {

struct AngleEnergy {
  cplx E;
  cplx bb;  // <B^dag B>^phi
};

/// Fields at one gauge angle. h_bar is h_kbar; delta / delta_bar do not
/// depend on k for a constant pairing force.
struct GaugeFields {
  cplx E;
  cplx bb;
  std::vector<cplx> h;
  std::vector<cplx> h_bar;
  cplx delta;
  cplx delta_bar;
  std::vector<cplx> D;  // h rho + hbar rhobar - delta kappabar - deltabar kappa
};

inline AngleEnergy energy_at_angle(const LevelScheme& levels, const ModelParams& model,
                                   std::span<const PairKernel> kernels) {
  cplx one_body(0.0), sum_kappa(0.0), sum_kappa_bar(0.0), diag(0.0);
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    const auto& K = kernels[k];
    one_body += (levels.t[k] - model.mu) * (K.rho + K.rho_bar);
    sum_kappa += K.kappa;
    sum_kappa_bar += K.kappa_bar;
    diag += K.rho * K.rho_bar;
  }
  AngleEnergy out;
  // <B^dag B> is always the full Wick value; the switch only drops the
  // diagonal contraction from the energy.
  out.bb = sum_kappa_bar * sum_kappa + diag;
  out.E = one_body - model.g * (model.wick_diagonal ? out.bb : sum_kappa_bar * sum_kappa);
  return out;
}

/// h_k = dE/drho_k, -delta = dE/dkappabar_k, -delta_bar = dE/dkappa_k.
inline GaugeFields fields_at_angle(const LevelScheme& levels, const ModelParams& model,
                                   std::span<const PairKernel> kernels) {
  const std::size_t omega = kernels.size();
  GaugeFields F;
  const auto e = energy_at_angle(levels, model, kernels);
  F.E = e.E;
  F.bb = e.bb;
  cplx sum_kappa(0.0), sum_kappa_bar(0.0);
  for (const auto& K : kernels) {
    sum_kappa += K.kappa;
    sum_kappa_bar += K.kappa_bar;
  }
  F.delta = model.g * sum_kappa;
  F.delta_bar = model.g * sum_kappa_bar;
  F.h.resize(omega);
  F.h_bar.resize(omega);
  F.D.resize(omega);
  const double self = model.wick_diagonal ? model.g : 0.0;
  for (std::size_t k = 0; k < omega; ++k) {
    const auto& K = kernels[k];
    const double t = levels.t[k] - model.mu;
    F.h[k] = t - self * K.rho_bar;
    F.h_bar[k] = t - self * K.rho;
    F.D[k] = F.h[k] * K.rho + F.h_bar[k] * K.rho_bar - F.delta * K.kappa_bar - F.delta_bar * K.kappa;
  }
  return F;
}

}  // namespace pairtherm
