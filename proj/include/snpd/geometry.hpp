#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <limits>
#include <span>
#include <vector>

namespace snpd {

// Propagation speed of the ranging signal, meters per second.
inline constexpr double kSpeedOfLight = 299'792'458.0;

struct Position {
  double x = 0.0;
  double y = 0.0;

  friend Position operator+(Position a, Position b) {
    return {a.x + b.x, a.y + b.y};
  }
  friend Position operator-(Position a, Position b) {
    return {a.x - b.x, a.y - b.y};
  }
  friend Position operator*(double s, Position p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Position a, Position b) {
    return a.x == b.x && a.y == b.y;
  }
};

inline double distance(Position a, Position b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Range from a transmit/receive timestamp pair.  A receive time earlier
// than the transmit time has no physical reading and is rejected.
inline std::optional<double> tof_distance(double transmit_s, double receive_s) {
  if (receive_s < transmit_s) return std::nullopt;
  return (receive_s - transmit_s) * kSpeedOfLight;
}

// One signed branch of a constant-range-difference locus: every point p on
// it satisfies distance(p, focus_a) - distance(p, focus_b) == k.
// Invariant: |k| <= distance(focus_a, focus_b).  k == 0 degenerates to the
// perpendicular bisector of the foci, |k| == focal distance to a ray.
struct Hyperbola {
  Position focus_a;
  Position focus_b;
  double k = 0.0;
};

// Signed distance-difference defect of p against the locus.
inline double locus_residual(const Hyperbola& h, Position p) {
  return distance(p, h.focus_a) - distance(p, h.focus_b) - h.k;
}

// Branch through a known point.  Requires distinct foci.
inline Hyperbola hyperbola_through_point(Position focus_a, Position focus_b,
                                         Position p) {
  return {focus_a, focus_b, distance(p, focus_a) - distance(p, focus_b)};
}

// Branch from an arrival-time difference (arrival at focus_a minus arrival
// at focus_b).  Positive tdoa puts the emitter farther from focus_a.
// |tdoa| * c beyond the focal distance is geometrically impossible; values
// within slack_m are clamped onto the degenerate ray, larger ones rejected.
inline std::optional<Hyperbola> hyperbola_from_tdoa(Position focus_a,
                                                    Position focus_b,
                                                    double tdoa_s,
                                                    double slack_m = 0.0) {
  const double d = distance(focus_a, focus_b);
  double k = tdoa_s * kSpeedOfLight;
  if (std::abs(k) > d + slack_m) return std::nullopt;
  if (k > d) k = d;
  if (k < -d) k = -d;
  return Hyperbola{focus_a, focus_b, k};
}

namespace detail {

// Local frame of a hyperbola: focus_a at (-c, 0), focus_b at (+c, 0).
struct HyperbolaFrame {
  Position center;
  Position ux, uy;      // unit axes, world = center + lx*ux + ly*uy
  double a = 0, b = 0;  // semi-axes, a = |k|/2, b = sqrt(c^2 - a^2)
  double sign = 1.0;    // branch side: +1 opens toward focus_b
};

inline HyperbolaFrame make_frame(const Hyperbola& h) {
  HyperbolaFrame f;
  const double d = distance(h.focus_a, h.focus_b);
  f.center = 0.5 * (h.focus_a + h.focus_b);
  f.ux = (1.0 / d) * (h.focus_b - h.focus_a);
  f.uy = {-f.ux.y, f.ux.x};
  const double c = 0.5 * d;
  f.a = 0.5 * std::abs(h.k);
  f.b = std::sqrt(std::max(c * c - f.a * f.a, 0.0));
  // k > 0 means farther from focus_a, i.e. the branch bending around focus_b.
  f.sign = h.k >= 0.0 ? 1.0 : -1.0;
  return f;
}

}  // namespace detail

// Point on the branch at parameter t: local (sign*a*cosh t, b*sinh t).
// Covers the whole branch for t in R, including both degenerate shapes.
inline Position sample_point(const Hyperbola& h, double t) {
  const auto f = detail::make_frame(h);
  const double lx = f.sign * f.a * std::cosh(t);
  const double ly = f.b * std::sinh(t);
  return f.center + lx * f.ux + ly * f.uy;
}

// Parameter of the point on the branch nearest to p (exact if p lies on it).
inline double parameter_of(const Hyperbola& h, Position p) {
  const auto f = detail::make_frame(h);
  const Position rel = p - f.center;
  const double lx = rel.x * f.ux.x + rel.y * f.ux.y;
  const double ly = rel.x * f.uy.x + rel.y * f.uy.y;
  if (f.b > 1e-12) return std::asinh(ly / f.b);
  // Degenerate ray: recover |t| from the x coordinate.
  if (f.a < 1e-12) return 0.0;
  const double u = std::max(std::abs(lx) / f.a, 1.0);
  return std::acosh(u);
}

// Intersections of two branches, found by scanning h1's parametrization for
// sign changes of h2's residual and bisecting each bracket.  Points are
// accepted below kResidualTol and deduplicated within kMergeTol.
inline constexpr double kIntersectResidualTol = 1e-4;  // meters
inline constexpr double kIntersectMergeTol = 5e-4;     // meters

inline std::vector<Position> intersect(const Hyperbola& h1,
                                       const Hyperbola& h2) {
  // cosh(26) ~ 1e11 m: any intersection at realistic scale sits inside.
  constexpr double kTmax = 26.0;
  constexpr int kGrid = 4096;
  constexpr int kBisectIters = 200;

  std::vector<Position> out;
  auto push_unique = [&](Position p) {
    if (std::abs(locus_residual(h2, p)) > kIntersectResidualTol) return;
    if (std::abs(locus_residual(h1, p)) > kIntersectResidualTol) return;
    for (const auto& q : out)
      if (distance(p, q) < kIntersectMergeTol) return;
    out.push_back(p);
  };

  double prev_t = -kTmax;
  double prev_g = locus_residual(h2, sample_point(h1, prev_t));
  for (int i = 1; i <= kGrid; ++i) {
    const double t = -kTmax + 2.0 * kTmax * i / kGrid;
    const double g = locus_residual(h2, sample_point(h1, t));
    if (g == 0.0) {
      push_unique(sample_point(h1, t));
    } else if ((prev_g < 0.0) != (g < 0.0)) {
      double lo = prev_t, hi = t, glo = prev_g;
      for (int it = 0; it < kBisectIters; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = locus_residual(h2, sample_point(h1, mid));
        if (gm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((glo < 0.0) != (gm < 0.0)) {
          hi = mid;
        } else {
          lo = mid;
          glo = gm;
        }
      }
      push_unique(sample_point(h1, 0.5 * (lo + hi)));
    }
    prev_t = t;
    prev_g = g;
  }
  return out;
}

// Estimate from several branches, with the evidence kept around: every
// intersecting pair contributes its candidate set, and a point must agree
// with all of them to be the solution.
struct MultilaterationResult {
  Position estimate;
  std::vector<std::vector<Position>> pair_candidates;

  // Largest disagreement between p and the nearest candidate of each pair;
  // a point actually common to all curves scores near zero.
  double support_gap(Position p) const {
    double worst = 0;
    for (const auto& pts : pair_candidates) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : pts) best = std::min(best, distance(q, p));
      worst = std::max(worst, best);
    }
    return worst;
  }
};

// All pairwise intersections form the candidate set; the candidate every
// pair agrees on (smallest summed distance to each pair's nearest
// intersection) seeds the pick, then each pair contributes its nearest
// intersection and the estimate is their mean.  A point common to all
// curves shows up in every pair's set, so ghost intersections cannot
// outvote it.  No pair intersecting means no solution.
inline std::optional<MultilaterationResult> multilaterate_full(
    std::span<const Hyperbola> curves) {
  std::vector<std::vector<Position>> per_pair;
  std::vector<Position> all;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      auto pts = intersect(curves[i], curves[j]);
      if (pts.empty()) continue;
      all.insert(all.end(), pts.begin(), pts.end());
      per_pair.push_back(std::move(pts));
    }
  }
  if (all.empty()) return std::nullopt;

  auto nearest_in = [](const std::vector<Position>& pts, Position ref) {
    Position best = pts.front();
    for (const auto& p : pts)
      if (distance(p, ref) < distance(best, ref)) best = p;
    return best;
  };

  Position seed = all.front();
  double seed_score = std::numeric_limits<double>::infinity();
  for (const auto& cand : all) {
    double score = 0;
    for (const auto& pts : per_pair)
      score += distance(nearest_in(pts, cand), cand);
    if (score < seed_score) {
      seed_score = score;
      seed = cand;
    }
  }

  Position sum{0, 0};
  for (const auto& pts : per_pair) sum = sum + nearest_in(pts, seed);
  MultilaterationResult res;
  res.estimate = (1.0 / static_cast<double>(per_pair.size())) * sum;
  res.pair_candidates = std::move(per_pair);
  return res;
}

inline std::optional<Position> multilaterate(std::span<const Hyperbola> curves) {
  const auto full = multilaterate_full(curves);
  if (!full) return std::nullopt;
  return full->estimate;
}

}  // namespace snpd
