#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "snpd/geometry.hpp"
#include "snpd/protocol.hpp"

namespace snpd {

struct Thresholds {
  double eps_r = 6.8;    // ranging error bound, meters
  double eps_p = 5.0;    // position error bound, meters
  double range = 250.0;  // radio range, meters
  Ratio delta{1, 2};     // tolerated mismatch fraction

  // Slack when turning arrival differences into curves: noise can push a
  // difference slightly past the focal distance.
  double curve_slack = 27.2;  // 4 * eps_r
};

inline Thresholds thresholds_from(const ProtocolParams& p) {
  Thresholds th;
  th.eps_r = p.eps_r;
  th.eps_p = p.eps_p;
  th.range = p.range;
  th.delta = p.delta;
  th.curve_slack = 4.0 * p.eps_r;
  return th;
}

enum class Verdict { Verified, Unverifiable, Faulty };

struct NodeOutcome {
  Verdict verdict = Verdict::Unverifiable;
  bool failed_ds = false;     // dropped by the direct-symmetry test
  int links = 0;              // l: pairs with both directions reported
  int mismatches = 0;         // m: links that failed a consistency check
  bool ml_suspect = false;    // one-way reception asymmetry seen
  bool ml_insufficient = false;  // suspect, but too few usable curves
  bool ml_demoted = false;    // estimate contradicted the claimed position
  std::optional<Position> ml_estimate;
};

struct Classification {
  std::map<NodeId, NodeOutcome> nodes;

  Verdict verdict_of(NodeId id) const {
    const auto it = nodes.find(id);
    return it == nodes.end() ? Verdict::Unverifiable : it->second.verdict;
  }
};

namespace vdetail {

// Signed ranging estimate.  Ranging noise on a leg shorter than eps_r can
// place the reception before the transmission; the result stays a valid
// noisy measurement of a near-zero distance, so it is kept signed and left
// to the tolerance checks rather than rejected outright.
inline double ranged(double transmit_s, double receive_s) {
  return (receive_s - transmit_s) * kSpeedOfLight;
}

// Direct-symmetry failure: the verifier's two distance estimates for X must
// agree with each other, with the advertised positions, and with the radio
// range.  Position and range limits apply to both directions; the range
// limit carries eps_r of slack so a legitimate boundary neighbor with full
// ranging error is not discarded.
inline bool ds_fails(const ObservationSet& obs, const ResponderRecord& r,
                     const Thresholds& th) {
  const double d_sx = ranged(obs.poll_tx, r.poll_rx_claimed);
  const double d_xs = ranged(r.reply_tx_claimed, r.reply_rx_at_verifier);
  if (std::abs(d_sx - d_xs) > 2.0 * th.eps_r) return true;
  const double claimed = distance(obs.verifier_position, r.claimed_position);
  for (const double d : {d_sx, d_xs}) {
    if (std::abs(claimed - d) > 2.0 * th.eps_p + th.eps_r) return true;
    if (d > th.range + th.eps_r) return true;
  }
  return false;
}

// Cross-symmetry consistency of one mutual link.
inline bool link_consistent(const ResponderRecord& x, const ResponderRecord& y,
                            double t_xy, double t_yx, const Thresholds& th) {
  const double d_xy = ranged(x.reply_tx_claimed, t_xy);
  const double d_yx = ranged(y.reply_tx_claimed, t_yx);
  if (std::abs(d_xy - d_yx) > 2.0 * th.eps_r) return false;
  const double claimed = distance(x.claimed_position, y.claimed_position);
  for (const double d : {d_xy, d_yx}) {
    if (std::abs(claimed - d) > 2.0 * th.eps_p + th.eps_r) return false;
    if (d > th.range + th.eps_r) return false;
  }
  return true;
}

}  // namespace vdetail

// Full pipeline: direct symmetry drops blatant liars, cross symmetry votes
// over mutual links, multilateration demotes survivors whose transmissions
// betray a different emission point.  Later stages only narrow verdicts.
inline Classification classify(const ObservationSet& obs, const Thresholds& th) {
  Classification result;
  for (const auto& r : obs.responders) result.nodes[r.id] = NodeOutcome{};

  // Stage 1: direct symmetry.
  std::vector<const ResponderRecord*> survivors;
  for (const auto& r : obs.responders) {
    if (vdetail::ds_fails(obs, r, th)) {
      result.nodes[r.id].failed_ds = true;
      result.nodes[r.id].verdict = Verdict::Faulty;
    } else {
      survivors.push_back(&r);
    }
  }

  // Stage 2: cross symmetry over surviving pairs with both directions.
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    for (std::size_t j = i + 1; j < survivors.size(); ++j) {
      const ResponderRecord& x = *survivors[i];
      const ResponderRecord& y = *survivors[j];
      const auto t_xy = obs.cross.find({x.id, y.id});
      const auto t_yx = obs.cross.find({y.id, x.id});
      if (t_xy == obs.cross.end() || t_yx == obs.cross.end()) continue;
      NodeOutcome& ox = result.nodes[x.id];
      NodeOutcome& oy = result.nodes[y.id];
      ++ox.links;
      ++oy.links;
      if (!vdetail::link_consistent(x, y, t_xy->second, t_yx->second, th)) {
        ++ox.mismatches;
        ++oy.mismatches;
      }
    }
  }

  std::vector<const ResponderRecord*> verified;
  for (const ResponderRecord* r : survivors) {
    NodeOutcome& o = result.nodes[r->id];
    if (o.links < 2) {
      o.verdict = Verdict::Unverifiable;
    } else if (o.mismatches * th.delta.den > th.delta.num * o.links) {
      o.verdict = Verdict::Faulty;
    } else if (o.mismatches * th.delta.den == th.delta.num * o.links) {
      o.verdict = Verdict::Unverifiable;
    } else {
      o.verdict = Verdict::Verified;
      verified.push_back(r);
    }
  }

  // Stage 3: multilateration of one-way transmitters.  A verified node that
  // reported nothing about a peer which did hear it left that peer's claim
  // unchecked by stage 2; those claims trace the true emission point.
  for (const ResponderRecord* x : verified) {
    NodeOutcome& o = result.nodes[x->id];
    std::vector<Hyperbola> curves;
    for (const ResponderRecord* y : verified) {
      if (y == x) continue;
      const auto t_xy = obs.cross.find({x->id, y->id});
      if (t_xy == obs.cross.end()) continue;
      if (obs.cross.count({y->id, x->id})) continue;
      o.ml_suspect = true;
      const double tdoa = x->reply_rx_at_verifier - t_xy->second;
      const auto curve = hyperbola_from_tdoa(obs.verifier_position,
                                             y->claimed_position, tdoa,
                                             th.curve_slack);
      if (curve) curves.push_back(*curve);
    }
    if (!o.ml_suspect) continue;
    if (curves.size() < 2) {
      o.ml_insufficient = true;
      continue;
    }
    const auto est = multilaterate_full(curves);
    if (!est) {
      o.ml_insufficient = true;
      continue;
    }
    o.ml_estimate = est->estimate;
    // Demote only when the claim disagrees with every pair's intersection
    // evidence: a twin solution consistent with the claim keeps the benefit
    // of the doubt, while a claim parked on a single ghost intersection
    // still conflicts with the remaining pairs.
    if (est->support_gap(x->claimed_position) > 2.0 * th.eps_p) {
      o.ml_demoted = true;
      o.verdict = Verdict::Faulty;
    }
  }

  return result;
}

}  // namespace snpd
