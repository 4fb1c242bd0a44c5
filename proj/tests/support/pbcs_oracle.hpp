#pragma once

// Zero-temperature number-projected BCS by direct minimization. The projected
// state P_n prod_k (u_k + v_k P_k^dag)|0> is, up to normalization,
//   sum_{|S| = n/2} prod_{k in S} x_k |S>,   x_k = v_k / u_k,
// over pair configurations S. Its energy under
//   H = sum_k (t_k - mu)(N_k + N_kbar) - g sum_{k,k'} P_k^dag P_k'
// is evaluated by enumerating S, and minimized over ln x_k with the GSL
// simplex. Independent of the gauge-angle machinery.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "pairtherm/pairing_model.hpp"

namespace pairtherm::testing {

struct PbcsResult {
  double energy = std::numeric_limits<double>::infinity();
  std::vector<double> log_x;
};

inline double pbcs_energy(const LevelScheme& levels, const ModelParams& model, const std::vector<double>& log_x) {
  const int omega = levels.omega;
  const int pairs = model.n / 2;
  // Work with weights relative to the largest to avoid overflow.
  double shift = 0.0;
  for (double y : log_x) shift = std::max(shift, y);
  std::vector<unsigned> configs;
  std::vector<double> amp;
  for (unsigned s = 0; s < (1u << omega); ++s) {
    if (__builtin_popcount(s) != pairs) continue;
    double l = 0.0;
    for (int k = 0; k < omega; ++k)
      if (s & (1u << k)) l += log_x[k] - shift;
    configs.push_back(s);
    amp.push_back(std::exp(l));
  }
  std::vector<double> index(1u << omega, -1.0);
  for (std::size_t i = 0; i < configs.size(); ++i) index[configs[i]] = static_cast<double>(i);

  double norm = 0.0, h = 0.0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const unsigned s = configs[i];
    double diag = -model.g * pairs;
    for (int k = 0; k < omega; ++k)
      if (s & (1u << k)) diag += 2.0 * (levels.t[k] - model.mu);
    norm += amp[i] * amp[i];
    h += amp[i] * amp[i] * diag;
    for (int from = 0; from < omega; ++from) {
      if (!(s & (1u << from))) continue;
      for (int to = 0; to < omega; ++to) {
        if (s & (1u << to)) continue;
        const unsigned t = (s & ~(1u << from)) | (1u << to);
        h -= model.g * amp[i] * amp[static_cast<std::size_t>(index[t])];
      }
    }
  }
  return h / norm;
}

namespace detail {

struct PbcsParams {
  const LevelScheme* levels;
  const ModelParams* model;
};

inline double pbcs_objective(const gsl_vector* x, void* p) {
  const auto* pp = static_cast<const PbcsParams*>(p);
  std::vector<double> y(x->size);
  for (std::size_t i = 0; i < x->size; ++i) y[i] = gsl_vector_get(x, i);
  return pbcs_energy(*pp->levels, *pp->model, y);
}

}  // namespace detail

/// Best of `restarts` simplex runs from randomized starts around the
/// uncorrelated Fermi sea.
inline PbcsResult pbcs_minimize(const LevelScheme& levels, const ModelParams& model, int restarts = 6,
                                unsigned seed = 7) {
  if (levels.omega > 20) throw std::invalid_argument("pbcs_minimize: omega too large for enumeration");
  gsl_set_error_handler_off();
  const std::size_t dim = static_cast<std::size_t>(levels.omega);
  detail::PbcsParams params{&levels, &model};
  gsl_multimin_function fn{&detail::pbcs_objective, dim, &params};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.5);

  std::vector<double> order = levels.t;
  std::sort(order.begin(), order.end());
  const double ef = 0.5 * (order[model.n / 2 - 1] + order[std::min<int>(model.n / 2, levels.omega - 1)]);

  PbcsResult best;
  for (int r = 0; r < restarts; ++r) {
    gsl_vector* x = gsl_vector_alloc(dim);
    gsl_vector* step = gsl_vector_alloc(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      gsl_vector_set(x, k, -(levels.t[k] - ef) + (r ? jitter(rng) : 0.0));
      gsl_vector_set(step, k, 0.5);
    }
    gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
    gsl_multimin_fminimizer_set(m, &fn, x, step);
    // Several passes: re-seed the simplex at the last minimum.
    for (int pass = 0; pass < 4; ++pass) {
      for (int it = 0; it < 20000; ++it) {
        if (gsl_multimin_fminimizer_iterate(m)) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-11) == GSL_SUCCESS) break;
      }
      gsl_vector_memcpy(x, gsl_multimin_fminimizer_x(m));
      gsl_multimin_fminimizer_set(m, &fn, x, step);
    }
    const double e = gsl_multimin_fminimizer_minimum(m);
    if (e < best.energy) {
      best.energy = e;
      best.log_x.assign(dim, 0.0);
      for (std::size_t k = 0; k < dim; ++k) best.log_x[k] = gsl_vector_get(gsl_multimin_fminimizer_x(m), k);
    }
    gsl_multimin_fminimizer_free(m);
    gsl_vector_free(step);
    gsl_vector_free(x);
  }
  return best;
}

}  // namespace pairtherm::testing
