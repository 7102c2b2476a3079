#pragma once

// Brute-force reference computations shared by the unit and acceptance
// tests. They deliberately avoid the library's solvers.

#include <cmath>
#include <vector>

namespace oracle {

inline double gain(double beta0, double H, double dx, double dy) { return beta0 / (dx * dx + dy * dy + H * H); }

/// One user charged at harvest power `a` (W) and transmitting with SNR per
/// Watt `c` over a period T. Scans the WIT duration s on a grid of step
/// `step` and returns the best average rate.
inline double single_user_split(double a, double c, double T, double step = 1e-4) {
  double best = 0.0;
  for (double s = step; s < T; s += step) {
    const double e = a * (T - s);
    best = std::max(best, s * std::log2(1.0 + c * e / s) / T);
  }
  return best;
}

/// Two users, each with harvest rates a[k] from a single shared WPT source
/// and SNR per Watt c[k]. Scans tau0 and lets each user's WIT time be chosen
/// to equalize rates by bisection. Returns the best common rate.
inline double two_user_split(const double a[2], const double c[2], double T, double step = 1e-4) {
  auto rate = [&](int k, double tau0, double s) {
    if (s <= 0.0) return 0.0;
    return s * std::log2(1.0 + c[k] * a[k] * tau0 / s) / T;
  };
  double best = 0.0;
  for (double tau0 = step; tau0 < T; tau0 += step) {
    const double rest = T - tau0;
    // Split rest between the users so that their rates match.
    double lo = 0.0, hi = rest;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (rate(0, tau0, mid) < rate(1, tau0, rest - mid)) lo = mid;
      else hi = mid;
    }
    const double s0 = 0.5 * (lo + hi);
    best = std::max(best, std::min(rate(0, tau0, s0), rate(1, tau0, rest - s0)));
  }
  return best;
}

}  // namespace oracle
