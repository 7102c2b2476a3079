#pragma once

// Box-constrained Nelder-Mead for maximizing smooth functions of a planar
// position. Vertices are clamped to the box, so flat box dimensions simply
// stay fixed.

#include "wpcn/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace wpcn::detail {

struct NelderMeadResult {
  Position2D point;
  double value = 0.0;
  int evaluations = 0;
};

template <class F>
NelderMeadResult nelder_mead_max(F&& f, Position2D start, Position2D lo, Position2D hi, double initial_step,
                                 double xtol, int max_evaluations = 2000) {
  auto clamp = [&](Position2D p) {
    return Position2D{std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
  };
  struct Vertex {
    Position2D p;
    double v;
  };
  int evals = 0;
  auto eval = [&](Position2D p) {
    p = clamp(p);
    ++evals;
    return Vertex{p, f(p)};
  };
  std::array<Vertex, 3> s{eval(start), eval(start + Position2D{initial_step, 0.0}),
                          eval(start + Position2D{0.0, initial_step})};
  auto by_value = [](const Vertex& a, const Vertex& b) { return a.v > b.v; };
  while (evals < max_evaluations) {
    std::sort(s.begin(), s.end(), by_value);
    const double size = std::max(distance(s[0].p, s[1].p), distance(s[0].p, s[2].p));
    if (size <= xtol) break;
    const Position2D centroid = 0.5 * (s[0].p + s[1].p);
    const Vertex r = eval(centroid + (centroid - s[2].p));
    if (r.v > s[0].v) {
      const Vertex e = eval(centroid + 2.0 * (centroid - s[2].p));
      s[2] = e.v > r.v ? e : r;
    } else if (r.v > s[1].v) {
      s[2] = r;
    } else {
      const Vertex c = r.v > s[2].v ? eval(centroid + 0.5 * (r.p - centroid)) : eval(centroid + 0.5 * (s[2].p - centroid));
      if (c.v > std::max(r.v, s[2].v)) {
        s[2] = c;
      } else {
        s[1] = eval(s[0].p + 0.5 * (s[1].p - s[0].p));
        s[2] = eval(s[0].p + 0.5 * (s[2].p - s[0].p));
      }
    }
  }
  std::sort(s.begin(), s.end(), by_value);
  return {s[0].p, s[0].v, evals};
}

}  // namespace wpcn::detail
