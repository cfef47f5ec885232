#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "snpd/geometry.hpp"
#include "snpd/protocol.hpp"
#include "snpd/rng.hpp"

namespace snpd {

// ---- forgery primitives ----------------------------------------------------

// Extra flight time a claim gains when the claimant pretends to sit at
// `fake` instead of `truth`, as seen from reference point z.  Every timing
// forgery in this module is built from this one delay.
inline double displacement_delay(Position z, Position truth, Position fake) {
  return (distance(z, fake) - distance(z, truth)) / kSpeedOfLight;
}

// Verifier-facing self-forgery: shifting the claimed poll reception later
// and the claimed reply transmission earlier by the displacement delay
// makes both verifier distance estimates equal the fake distance, assuming
// the displacement is computed against the actual verifier.
struct SelfForgery {
  double poll_rx_claimed = 0;
  double reply_tx_claimed = 0;
};

inline SelfForgery forge_self_times(Position believed_verifier, Position truth,
                                    Position fake, double true_poll_rx,
                                    double true_reply_tx) {
  const double dl = displacement_delay(believed_verifier, truth, fake);
  return {true_poll_rx + dl, true_reply_tx - dl};
}

// Forged reception claim for an overheard reply: consistent with the fake
// position when the believed sender is the actual one.
inline double forge_reception(double true_rx, Position believed_sender,
                              Position truth, Position fake) {
  return true_rx + displacement_delay(believed_sender, truth, fake);
}

// ---- strategy definitions ---------------------------------------------------

enum class StrategyKind {
  Honest,
  UnknowledgeableLiar,
  KnowledgeableIndependent,
  CollinearExploit,
  ColludingBasic,
  ColludingHyperbola,
  ReplyDisregard,
};

struct AdversaryConfig {
  StrategyKind kind = StrategyKind::Honest;
  double min_fake_offset = 30.0;  // meters between truth and fake
  double fake_range_margin = 0.98;  // fake kept inside margin * range
  double collinear_tol = 3.0;       // lane tolerance for the road exploit
  // Group strategies keep their fakes inside this radius around the
  // verifier so every fabricated partner link stays in radio range, and
  // displace them radially by at least the gap so every truthfully kept
  // link fails its symmetry check instead of leaking through tolerances.
  double group_fake_radius = 125.0;
  double min_radial_gap = 33.6;
};

// What an adversary knows when its reply commitment must be fixed.  No
// field identifies the verifier or links overheard traffic to identities.
struct CommitView {
  Position self_position;
  double poll_rx_s = 0;  // true measured poll reception
  double range = 250.0;
  // Known neighbors (id, believed position); empty for an adversary with
  // no knowledge of its surroundings.
  std::vector<std::pair<NodeId, Position>> roster;
};

// Added knowledge at report time: the anonymous replies it overheard and
// its own true transmit instant.
struct ReportView {
  std::vector<double> overheard_rx;  // indexed by handle; senders unknown
  double reply_tx_s = 0;
};

struct CommitDecision {
  Position fake;
  double poll_rx_claimed = 0;
  std::optional<NodeId> believed_verifier;
  std::optional<NodeId> chosen_witness;
  bool used_locus = false;
  bool collinear_mode = false;
};

struct ReportDecision {
  double reply_tx_claimed = 0;
  // handle -> claimed reception; a missing handle is silently disregarded.
  std::map<std::size_t, double> receptions;
  // handle -> identity the forgery assumed (diagnostics).
  std::map<std::size_t, NodeId> believed_senders;
};

namespace adetail {

// Uniform point in the disk around c, at least min_off from avoid.
inline Position disk_fake(Position c, double radius, Position avoid,
                          double min_off, Rng& rng) {
  Position p = c;
  for (int tries = 0; tries < 64; ++tries) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    if (x * x + y * y > 1.0) continue;
    p = {c.x + radius * x, c.y + radius * y};
    if (distance(p, avoid) >= min_off) return p;
  }
  return p;
}

// Uniform draw (grid-quantized) along the branch through `self`, kept
// inside radius around the believed verifier and away from the truth.
inline std::optional<Position> locus_fake(const Hyperbola& h, Position self,
                                          Position believed_verifier,
                                          double radius, double min_off,
                                          Rng& rng) {
  const double t0 = parameter_of(h, self);
  constexpr int kGrid = 512;
  std::vector<double> ts;
  for (int i = 0; i <= kGrid; ++i) {
    const double t = t0 - 6.0 + 12.0 * i / kGrid;
    const Position p = sample_point(h, t);
    if (distance(p, believed_verifier) > radius) continue;
    if (distance(p, self) < min_off) continue;
    ts.push_back(t);
  }
  if (ts.empty()) return std::nullopt;
  const double step = 12.0 / kGrid;
  const double t = ts[rng.below(ts.size())] + rng.uniform(-0.5, 0.5) * step;
  const Position p = sample_point(h, t);
  if (distance(p, believed_verifier) > radius || distance(p, self) < min_off)
    return std::nullopt;
  return p;
}

// Least-squares line through points; returns (origin, unit direction) and
// the largest perpendicular residual.
struct LineFit {
  Position origin;
  Position dir;
  double max_residual = 0;
};

inline LineFit fit_line(const std::vector<Position>& pts) {
  LineFit f;
  Position mean{0, 0};
  for (const auto& p : pts) mean = mean + p;
  mean = (1.0 / pts.size()) * mean;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : pts) {
    const Position d = p - mean;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  // Dominant eigenvector of the 2x2 scatter matrix.
  const double tr = sxx + syy;
  const double det = sxx * syy - sxy * sxy;
  const double lam = 0.5 * tr + std::sqrt(std::max(0.25 * tr * tr - det, 0.0));
  Position dir{lam - syy, sxy};
  const double n = std::hypot(dir.x, dir.y);
  dir = n > 1e-12 ? (1.0 / n) * dir : Position{1, 0};
  f.origin = mean;
  f.dir = dir;
  for (const auto& p : pts) {
    const Position d = p - mean;
    f.max_residual =
        std::max(f.max_residual, std::abs(d.x * dir.y - d.y * dir.x));
  }
  return f;
}

}  // namespace adetail

// Believed common repliers: roster members in range of the believed
// verifier.  These are the identities the adversary expects to answer the
// poll it answered itself.
inline std::vector<std::pair<NodeId, Position>> believed_repliers(
    const CommitView& view, NodeId believed_verifier, Position believed_pos) {
  std::vector<std::pair<NodeId, Position>> out;
  for (const auto& [id, pos] : view.roster) {
    if (id == believed_verifier) continue;
    if (distance(pos, believed_pos) <= view.range) out.push_back({id, pos});
  }
  return out;
}

// Independent adversary, commit phase.  The verifier is guessed uniformly
// over the roster; the fake goes on the constant-range-difference branch
// through its own position with foci at the guessed verifier and one
// expected co-replier when at least two co-repliers are expected (so one
// pair check can come out consistent), and into a free disk around the
// guessed verifier otherwise, where no pair evidence is reachable anyway.
// An empty roster degenerates to the unknowledgeable behavior.
inline CommitDecision independent_commit(const AdversaryConfig& cfg,
                                         const CommitView& view, Rng& rng) {
  CommitDecision d;
  if (view.roster.empty() || cfg.kind == StrategyKind::UnknowledgeableLiar) {
    d.fake = adetail::disk_fake(view.self_position,
                                cfg.fake_range_margin * view.range,
                                view.self_position, cfg.min_fake_offset, rng);
    d.poll_rx_claimed = view.poll_rx_s;  // no basis for timing forgery
    return d;
  }

  const auto& [b_id, b_pos] = view.roster[rng.below(view.roster.size())];
  d.believed_verifier = b_id;
  const auto repliers = believed_repliers(view, b_id, b_pos);

  // Road exploit: when the believed verifier and co-repliers line up, a
  // fake displaced along the lane keeps every same-side range difference
  // intact.
  if (cfg.kind == StrategyKind::CollinearExploit && repliers.size() >= 1) {
    std::vector<Position> pts{b_pos, view.self_position};
    for (const auto& [id, pos] : repliers) pts.push_back(pos);
    const auto line = adetail::fit_line(pts);
    if (line.max_residual <= cfg.collinear_tol) {
      // Displace along the lane, away from the co-replier centroid.
      Position centroid{0, 0};
      for (const auto& [id, pos] : repliers) centroid = centroid + pos;
      centroid = (1.0 / repliers.size()) * centroid;
      const double side =
          (centroid - view.self_position).x * line.dir.x +
                      (centroid - view.self_position).y * line.dir.y >
                  0
              ? -1.0
              : 1.0;
      for (int tries = 0; tries < 32; ++tries) {
        const double s =
            side * rng.uniform(cfg.min_fake_offset, 3.0 * cfg.min_fake_offset);
        const Position p = view.self_position + s * line.dir;
        if (distance(p, b_pos) <= cfg.fake_range_margin * view.range) {
          d.fake = p;
          d.collinear_mode = true;
          break;
        }
      }
    }
  }

  if (!d.collinear_mode) {
    if (repliers.size() >= 2) {
      const auto& [w_id, w_pos] = repliers[rng.below(repliers.size())];
      d.chosen_witness = w_id;
      const Hyperbola h =
          hyperbola_through_point(b_pos, w_pos, view.self_position);
      const auto p = adetail::locus_fake(h, view.self_position, b_pos,
                                         cfg.fake_range_margin * view.range,
                                         cfg.min_fake_offset, rng);
      if (p) {
        d.fake = *p;
        d.used_locus = true;
      }
    }
    if (!d.used_locus) {
      d.fake = adetail::disk_fake(b_pos, cfg.fake_range_margin * view.range,
                                  view.self_position, cfg.min_fake_offset, rng);
      d.chosen_witness.reset();
    }
  }

  d.poll_rx_claimed =
      view.poll_rx_s + displacement_delay(b_pos, view.self_position, d.fake);
  return d;
}

// Independent adversary, report phase.  Overheard replies get identities
// assigned by a uniform injection into the expected co-replier set (the
// adversary cannot tell who sent what); each reception claim is then
// forged against the assigned identity.  Surplus replies beyond the
// expected set fall back to uniform roster guesses.
inline ReportDecision independent_report(const AdversaryConfig& cfg,
                                         const CommitView& view,
                                         const CommitDecision& commit,
                                         const ReportView& report, Rng& rng) {
  (void)cfg;
  ReportDecision out;
  if (!commit.believed_verifier) {
    // No knowledge: keep every true reception and the true transmit time.
    out.reply_tx_claimed = report.reply_tx_s;
    for (std::size_t h = 0; h < report.overheard_rx.size(); ++h)
      out.receptions[h] = report.overheard_rx[h];
    return out;
  }

  Position b_pos{};
  for (const auto& [id, pos] : view.roster)
    if (id == *commit.believed_verifier) b_pos = pos;
  out.reply_tx_claimed =
      report.reply_tx_s -
      displacement_delay(b_pos, view.self_position, commit.fake);

  auto repliers = believed_repliers(view, *commit.believed_verifier, b_pos);
  std::vector<std::size_t> handles(report.overheard_rx.size());
  for (std::size_t h = 0; h < handles.size(); ++h) handles[h] = h;
  // Uniform assignment: shuffle both sides, zip.
  for (std::size_t i = handles.size(); i > 1; --i)
    std::swap(handles[i - 1], handles[rng.below(i)]);
  for (std::size_t i = repliers.size(); i > 1; --i)
    std::swap(repliers[i - 1], repliers[rng.below(i)]);

  for (std::size_t k = 0; k < handles.size(); ++k) {
    const std::size_t h = handles[k];
    Position sender_pos;
    NodeId sender_id;
    if (k < repliers.size()) {
      sender_id = repliers[k].first;
      sender_pos = repliers[k].second;
    } else {
      // More replies than expected: guess among the known neighbors.
      std::size_t pick = rng.below(view.roster.size());
      if (view.roster[pick].first == *commit.believed_verifier)
        pick = (pick + 1) % view.roster.size();
      sender_id = view.roster[pick].first;
      sender_pos = view.roster[pick].second;
    }
    out.believed_senders[h] = sender_id;
    out.receptions[h] = forge_reception(report.overheard_rx[h], sender_pos,
                                        view.self_position, commit.fake);
  }
  return out;
}

// ---- colluding groups -------------------------------------------------------

// How many overheard correct replies a disregarding colluder keeps in its
// report, given n_correct of them and n_partners responding partners.  The
// ledger reasoning: kept correct links always mismatch, partner links are
// forged consistent, and a single silenced witness cannot place the node.
// Below the budget it keeps everything; at the budget it sheds one witness
// to stay verified; one past the budget it rides the exact mismatch
// boundary; beyond that it sheds witnesses down to a verified ledger,
// which hands the remaining witnesses to the multilateration stage.
inline int disregard_keep_count(int n_correct, int n_partners) {
  if (n_correct <= n_partners - 1) return n_correct;
  if (n_correct == n_partners) return n_correct - 1;
  if (n_correct == n_partners + 1) return n_partners;
  return n_partners - 1;
}

struct GroupMemberView {
  NodeId id = 0;
  Position true_position;
  double poll_rx_s = 0;  // true
  CommitView commit_view;  // roster knowledge, range
};

// Colluders pool everything over an out-of-band channel and, unlike the
// independents, are modeled as knowing the actual verifier.
struct GroupCommitInput {
  AdversaryConfig config;
  NodeId verifier = 0;
  Position verifier_position;
  std::vector<GroupMemberView> members;
};

struct GroupCommitPlan {
  std::vector<CommitDecision> members;
  std::optional<NodeId> witness;  // hyperbola variant's involuntary ally
  Position witness_position;
};

inline GroupCommitPlan colluding_commit(const GroupCommitInput& in, Rng& rng) {
  GroupCommitPlan plan;
  const AdversaryConfig& cfg = in.config;

  if (cfg.kind == StrategyKind::ColludingHyperbola) {
    // Agreed witness: the lowest-id node every member knows, in range of
    // the verifier and of every member (so each pair check exists).
    std::map<NodeId, std::pair<Position, std::size_t>> seen;
    std::set<NodeId> member_ids;
    for (const auto& m : in.members) member_ids.insert(m.id);
    for (const auto& m : in.members) {
      for (const auto& [id, pos] : m.commit_view.roster) {
        if (id == in.verifier || member_ids.count(id)) continue;
        if (distance(pos, in.verifier_position) > m.commit_view.range) continue;
        if (distance(pos, m.true_position) > m.commit_view.range) continue;
        auto it = seen.find(id);
        if (it == seen.end())
          seen[id] = {pos, 1};
        else
          ++it->second.second;
      }
    }
    for (const auto& [id, entry] : seen) {
      if (entry.second == in.members.size()) {
        plan.witness = id;
        plan.witness_position = entry.first;
        break;
      }
    }
  }

  for (const auto& m : in.members) {
    CommitDecision d;
    d.believed_verifier = in.verifier;
    const double witness_range = cfg.fake_range_margin * m.commit_view.range;
    const auto radial_ok = [&](Position p) {
      return std::abs(distance(p, in.verifier_position) -
                      distance(m.true_position, in.verifier_position)) >=
             cfg.min_radial_gap;
    };
    if (plan.witness) {
      d.chosen_witness = plan.witness;
      const Hyperbola h = hyperbola_through_point(
          in.verifier_position, plan.witness_position, m.true_position);
      // The fake must stay in range of the witness too, or the passing
      // pair it buys would die on the range check.
      for (int tries = 0; tries < 48 && !d.used_locus; ++tries) {
        const auto p = adetail::locus_fake(h, m.true_position,
                                           in.verifier_position,
                                           cfg.group_fake_radius,
                                           cfg.min_fake_offset, rng);
        if (p && distance(*p, plan.witness_position) <= witness_range &&
            radial_ok(*p)) {
          d.fake = *p;
          d.used_locus = true;
        }
      }
    }
    if (!d.used_locus) {
      for (int tries = 0; tries < 96; ++tries) {
        d.fake = adetail::disk_fake(in.verifier_position,
                                    cfg.group_fake_radius, m.true_position,
                                    cfg.min_fake_offset, rng);
        if (radial_ok(d.fake)) break;
      }
    }
    d.poll_rx_claimed =
        m.poll_rx_s +
        displacement_delay(in.verifier_position, m.true_position, d.fake);
    plan.members.push_back(d);
  }
  return plan;
}

// One member's report-time knowledge inside a group.  `uid` tags let the
// members match the same overheard reply across their vantage points (the
// commitment bytes are identical at every receiver); partner replies are
// recognized outright because partners share their link material.
struct GroupReportMemberView {
  std::vector<std::uint64_t> overheard_uid;
  std::vector<double> overheard_rx;
  double reply_tx_s = 0;
  // uid -> index into GroupCommitInput::members for partner replies.
  std::map<std::uint64_t, std::size_t> partner_of_uid;
};

// Pooled arrival differences identify an anonymous replier among known
// candidates: the sender's position fixes every pairwise reception-time
// difference across the group's vantage points.  Independents cannot do
// this with a single vantage point, which is exactly the knowledge edge a
// group has.
inline std::map<std::uint64_t, NodeId> match_repliers_by_tdoa(
    const GroupCommitInput& in,
    const std::vector<GroupReportMemberView>& reports,
    const std::vector<std::pair<NodeId, Position>>& candidates) {
  struct Sighting {
    Position vantage;
    double rx;
  };
  std::map<std::uint64_t, std::vector<Sighting>> sightings;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t h = 0; h < reports[i].overheard_uid.size(); ++h) {
      const std::uint64_t uid = reports[i].overheard_uid[h];
      if (reports[i].partner_of_uid.count(uid)) continue;
      sightings[uid].push_back(
          {in.members[i].true_position, reports[i].overheard_rx[h]});
    }
  }

  std::map<std::uint64_t, NodeId> out;
  std::set<NodeId> taken;
  for (const auto& [uid, seen] : sightings) {
    double best = std::numeric_limits<double>::infinity();
    std::optional<NodeId> best_id;
    for (const auto& [id, pos] : candidates) {
      if (taken.count(id)) continue;
      double res = 0;
      for (std::size_t a = 0; a < seen.size(); ++a) {
        for (std::size_t b = a + 1; b < seen.size(); ++b) {
          const double model = (distance(pos, seen[a].vantage) -
                                distance(pos, seen[b].vantage)) /
                               kSpeedOfLight;
          res += std::abs((seen[a].rx - seen[b].rx) - model);
        }
      }
      if (res < best) {
        best = res;
        best_id = id;
      }
    }
    if (best_id) {
      out[uid] = *best_id;
      taken.insert(*best_id);
    }
  }
  return out;
}

// Joint report planning.  Partner cross-receptions are fabricated to be
// exactly consistent with the agreed fakes; the witness reply (hyperbola
// variant) is identified by pooled arrival differences and forged against
// its real position; other correct replies are kept truthfully or shed
// per the disregard budget.
inline std::vector<ReportDecision> colluding_report(
    const GroupCommitInput& in, const GroupCommitPlan& plan,
    const std::vector<GroupReportMemberView>& reports) {
  const AdversaryConfig& cfg = in.config;
  std::vector<ReportDecision> out(reports.size());

  // Claimed transmit times, shared out-of-band.
  std::vector<double> claimed_tx(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    claimed_tx[i] =
        reports[i].reply_tx_s - displacement_delay(in.verifier_position,
                                                   in.members[i].true_position,
                                                   plan.members[i].fake);
    out[i].reply_tx_claimed = claimed_tx[i];
  }

  std::map<std::uint64_t, NodeId> witness_uid_match;
  if (plan.witness) {
    const std::vector<std::pair<NodeId, Position>> cand{
        {*plan.witness, plan.witness_position}};
    witness_uid_match = match_repliers_by_tdoa(in, reports, cand);
  }

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& view = reports[i];
    const Position fake_i = plan.members[i].fake;

    // Gather correct (non-partner) handles in overhearing order.
    std::vector<std::size_t> correct_handles;
    int n_partners = 0;
    for (std::size_t h = 0; h < view.overheard_uid.size(); ++h) {
      if (view.partner_of_uid.count(view.overheard_uid[h]))
        ++n_partners;
      else
        correct_handles.push_back(h);
    }

    int keep = static_cast<int>(correct_handles.size());
    if (cfg.kind == StrategyKind::ReplyDisregard)
      keep = disregard_keep_count(static_cast<int>(correct_handles.size()),
                                  n_partners);

    for (std::size_t h = 0; h < view.overheard_uid.size(); ++h) {
      const std::uint64_t uid = view.overheard_uid[h];
      const auto partner = view.partner_of_uid.find(uid);
      if (partner != view.partner_of_uid.end()) {
        const std::size_t j = partner->second;
        // Fabricated to the meter: claimed transmit plus fake-to-fake
        // flight.
        out[i].receptions[h] =
            claimed_tx[j] + distance(plan.members[j].fake, fake_i) / kSpeedOfLight;
        out[i].believed_senders[h] = in.members[j].id;
        continue;
      }
      const auto w = witness_uid_match.find(uid);
      if (w != witness_uid_match.end() && plan.members[i].used_locus) {
        out[i].receptions[h] =
            forge_reception(view.overheard_rx[h], plan.witness_position,
                            in.members[i].true_position, fake_i);
        out[i].believed_senders[h] = w->second;
        continue;
      }
      // Correct replies: keep truthful measurements up to the budget.
      if (keep > 0) {
        out[i].receptions[h] = view.overheard_rx[h];
        --keep;
      }
    }
  }
  return out;
}

}  // namespace snpd
