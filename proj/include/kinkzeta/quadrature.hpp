#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "kinkzeta/errors.hpp"

namespace kinkzeta::quad {

/// Composite Simpson rule on uniformly spaced samples. An even sample count closes the
/// last three intervals with the 3/8 rule.
inline double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  if (n < 2) throw SizeError("simpson: need at least 2 samples");
  if (n == 2) return 0.5 * h * (f[0] + f[1]);
  if (n == 3) return h / 3.0 * (f[0] + 4.0 * f[1] + f[2]);
  std::size_t last = (n % 2 == 1) ? n - 1 : n - 4;
  double s = f[0] + f[last];
  for (std::size_t i = 1; i < last; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
  double total = s * h / 3.0;
  if (n % 2 == 0)
    total += 3.0 * h / 8.0 * (f[n - 4] + 3.0 * f[n - 3] + 3.0 * f[n - 2] + f[n - 1]);
  return total;
}

/// Adaptive Gauss-Kronrod (G30/K61). Works for real and complex integrands and for
/// infinite limits.
template <class F>
auto adaptive(F&& f, double a, double b, double tol = 1e-13, double* err_out = nullptr,
              unsigned max_depth = 18) {
  double err = 0.0;
  auto r = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, max_depth, tol,
                                                                          &err);
  if (err_out) *err_out = err;
  return r;
}

/// Double-exponential rule for integrands with endpoint singularities.
template <class F>
double endpoint_singular(F&& f, double a, double b, double tol = 1e-13) {
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator(12);
  double err = 0.0;
  double l1 = 0.0;
  std::size_t levels = 0;
  const double r = integrator.integrate(f, a, b, tol, &err, &l1, &levels);
  if (!std::isfinite(r)) throw ConvergenceError("tanh-sinh quadrature returned non-finite value");
  return r;
}

/// Nodes and weights of a composite 20-point Gauss-Legendre rule over the given breakpoints.
struct NodeSet {
  std::vector<double> x;
  std::vector<double> w;
};

inline NodeSet composite_gauss(std::span<const double> breaks) {
  using G = boost::math::quadrature::gauss<double, 20>;
  NodeSet out;
  const auto& abs = G::abscissa();
  const auto& wts = G::weights();
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = breaks[k + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    // Boost stores the non-negative half of the symmetric rule; 20 points -> 10 pairs.
    for (std::size_t i = 0; i < abs.size(); ++i) {
      const double xi = abs[i];
      if (xi == 0.0) {
        out.x.push_back(mid);
        out.w.push_back(half * wts[i]);
        continue;
      }
      out.x.push_back(mid - half * xi);
      out.w.push_back(half * wts[i]);
      out.x.push_back(mid + half * xi);
      out.w.push_back(half * wts[i]);
    }
  }
  return out;
}

/// Panel breakpoints on [0, length], geometric near 0 (ratio 1/2 down to `smallest`),
/// then uniform with width `panel`.
inline std::vector<double> graded_breaks(double length, double panel, double smallest) {
  std::vector<double> br{0.0};
  double first = std::min(panel, length);
  std::vector<double> geo;
  for (double x = first; x > smallest; x *= 0.5) geo.push_back(x);
  for (auto it = geo.rbegin(); it != geo.rend(); ++it)
    if (*it > br.back()) br.push_back(*it);
  while (br.back() + 1e-12 * length < length) br.push_back(std::min(length, br.back() + panel));
  return br;
}

}  // namespace kinkzeta::quad
