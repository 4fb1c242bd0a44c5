#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "pairtherm/error.hpp"

namespace pairtherm {

/// 1/(e^x + 1) without overflow for large |x|.
inline double fermi(double x) {
  if (std::isinf(x)) return x > 0 ? 0.0 : 1.0;
  if (x > 0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/// f(1-f) for f = fermi(x), accurate when f is tiny.
inline double fermi_variance(double x) {
  if (std::isinf(x)) return 0.0;
  const double e = std::exp(-std::abs(x));
  return e / ((1.0 + e) * (1.0 + e));
}

/// ln(1 + e^{-x}).
inline double log1p_exp_neg(double x) {
  if (std::isinf(x)) return x > 0 ? 0.0 : std::numeric_limits<double>::infinity();
  if (x > 0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

/// Occupation of a fermion mode with energy `eps` at temperature `T`;
/// T = 0 gives the step function with 1/2 at eps = 0.
inline double occupation(double eps, double T) {
  if (T <= 0.0) return eps > 0 ? 0.0 : (eps < 0 ? 1.0 : 0.5);
  return fermi(eps / T);
}

inline double occupation_variance(double eps, double T) {
  if (T <= 0.0) return eps == 0.0 ? 0.25 : 0.0;
  return fermi_variance(eps / T);
}

/// Root of `f` inside [a, b] by TOMS 748. The bracket must change sign.
template <class F>
double bracketed_root(F&& f, double a, double b, double abs_tol = 1e-14,
                      std::uintmax_t max_iter = 200) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) {
    throw ConvergenceError("bracketed_root: no sign change on [" + std::to_string(a) +
                           ", " + std::to_string(b) + "]");
  }
  auto tol = [abs_tol](double lo, double hi) { return std::abs(hi - lo) <= abs_tol; };
  std::uintmax_t iters = max_iter;
  auto [lo, hi] = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
  if (iters >= max_iter && std::abs(hi - lo) > abs_tol) {
    throw ConvergenceError("bracketed_root: iteration budget exhausted");
  }
  return 0.5 * (lo + hi);
}

/// Grows [a, b] geometrically about its centre until `f` changes sign.
template <class F>
std::pair<double, double> expand_bracket(F&& f, double a, double b, int max_doublings = 60) {
  double fa = f(a);
  double fb = f(b);
  for (int i = 0; i < max_doublings && (fa > 0) == (fb > 0); ++i) {
    const double w = b - a;
    if (std::abs(fa) < std::abs(fb)) {
      a -= w;
      fa = f(a);
    } else {
      b += w;
      fb = f(b);
    }
  }
  if ((fa > 0) == (fb > 0)) throw ConvergenceError("expand_bracket: no sign change found");
  return {a, b};
}

}  // namespace pairtherm
