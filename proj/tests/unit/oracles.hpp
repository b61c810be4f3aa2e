#pragma once

// Reference implementations used only by tests. Written directly from the
// defining sums, with no shared code paths into the library.

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

inline double entropy(const std::vector<double>& x, double h) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) s += std::log((x[i + 1] - x[i]) / h);
  return -h * s;
}

inline double interaction(const std::vector<double>& x, double h, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double d = x[j] - x[i];
      s += gamma == 0.0 ? -std::log(d) : std::pow(d, -gamma) / gamma;
    }
  }
  return h * h * s;
}

inline double energy(const std::vector<double>& x, double h, double gamma) {
  return entropy(x, h) - interaction(x, h, gamma);
}

// Central-difference gradient of G.
inline std::vector<double> fd_gradient(const std::vector<double>& x, double h, double gamma,
                                       double step = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    g[i] = (energy(xp, h, gamma) - energy(xm, h, gamma)) / (2.0 * step);
  }
  return g;
}

// Sorted positions with gaps in [lo, hi], shifted to zero mean.
inline std::vector<double> random_state(std::mt19937_64& rng, int n, double lo = 0.1,
                                        double hi = 2.0) {
  std::uniform_real_distribution<double> gap(lo, hi);
  std::vector<double> x(n, 0.0);
  for (int i = 1; i < n; ++i) x[i] = x[i - 1] + gap(rng);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  for (double& v : x) v -= mean;
  return x;
}

}  // namespace oracle
