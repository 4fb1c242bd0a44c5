#pragma once

// Constant-pairing Hamiltonian on doubly degenerate levels:
//   H = sum_k (t_k - mu)(N_k + N_kbar) - g B^dag B,   B = sum_{k>0} c_kbar c_k.

#include <cmath>
#include <string>
#include <vector>

#include "pairtherm/error.hpp"

namespace pairtherm {

struct LevelScheme {
  int omega = 0;            // number of doubly degenerate levels
  double lambda_cut = 0.0;  // |t_k| <= lambda_cut
  double d = 0.0;           // spacing (0 for explicit schemes)
  std::vector<double> t;    // level energies, one per (k, kbar) pair

  int size() const { return omega; }
};

/// t_k = -lambda_cut + (k-1) d with d = 2 lambda_cut / (omega - 1).
inline LevelScheme build_uniform_levels(int omega, double lambda_cut) {
  if (omega < 2) throw InvalidArgument("build_uniform_levels: omega must be >= 2");
  if (!(lambda_cut > 0.0)) throw InvalidArgument("build_uniform_levels: lambda_cut must be > 0");
  LevelScheme s;
  s.omega = omega;
  s.lambda_cut = lambda_cut;
  s.d = 2.0 * lambda_cut / static_cast<double>(omega - 1);
  s.t.resize(omega);
  for (int k = 0; k < omega; ++k) s.t[k] = -lambda_cut + static_cast<double>(k) * s.d;
  s.t.back() = lambda_cut;
  return s;
}

/// Arbitrary level energies; used by the exact oracle and by tests.
inline LevelScheme explicit_levels(std::vector<double> t) {
  if (t.empty()) throw InvalidArgument("explicit_levels: need at least one level");
  LevelScheme s;
  s.omega = static_cast<int>(t.size());
  double m = 0.0;
  for (double x : t) m = std::max(m, std::abs(x));
  s.lambda_cut = m;
  s.t = std::move(t);
  return s;
}

struct ModelParams {
  double g = 0.0;   // pairing strength
  double mu = 0.0;  // chemical-potential shift in the one-body term
  int n = 0;        // particle number (even)
  /// Keep the diagonal normal contraction <N_k N_kbar> -> rho_k rho_kbar in
  /// E^phi (full Wick). Off reproduces the common convention without the
  /// -g rho self-energy.
  bool wick_diagonal = true;
};

inline void validate(const LevelScheme& levels, const ModelParams& model) {
  if (levels.omega < 1 || static_cast<int>(levels.t.size()) != levels.omega) {
    throw InvalidArgument("level scheme is inconsistent");
  }
  if (model.g < 0.0) throw InvalidArgument("pairing strength g must be >= 0");
  if (model.n <= 0 || model.n % 2 != 0) throw InvalidArgument("particle number n must be even and positive");
  if (model.n > 2 * levels.omega) throw InvalidArgument("particle number exceeds 2*omega");
}

}  // namespace pairtherm
