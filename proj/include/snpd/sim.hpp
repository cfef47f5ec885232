#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "snpd/adversary.hpp"
#include "snpd/crypto.hpp"
#include "snpd/metrics.hpp"
#include "snpd/protocol.hpp"
#include "snpd/trace.hpp"
#include "snpd/verification.hpp"

namespace snpd {

// Channel simulation: deliveries only within `range`; every reception
// timestamp gets an independent ranging draw in [-eps_r, eps_r]; every
// advertised own position an independent draw in the eps_p disk.  Loss
// removes deliveries, never adds them.
struct RadioModel {
  double range = 250.0;
  double eps_p = 5.0;
  double eps_r = 6.8;
  double loss_probability = 0.0;
};

struct NodeBehavior {
  StrategyKind kind = StrategyKind::Honest;
  int group = -1;  // index into StrategyAssignment::groups, -1 for none
};

struct StrategyAssignment {
  AdversaryConfig tuning;  // offsets and radii; kind comes from the node
  std::map<NodeId, NodeBehavior> nodes;  // absent means honest
  std::vector<std::vector<NodeId>> groups;

  NodeBehavior of(NodeId id) const {
    const auto it = nodes.find(id);
    return it == nodes.end() ? NodeBehavior{} : it->second;
  }
};

namespace simd {

// Every random quantity comes from its own stream keyed by (seed, tag,
// ids), so results never depend on iteration order or on how many draws
// another path consumed.
enum StreamTag : std::uint64_t {
  kKeys = 1,
  kVerifierSession,
  kReplyLink,
  kReveal,
  kReportLink,
  kPosError,
  kReplyDelay,
  kPollLoss,
  kReplyLoss,
  kCrossLoss,
  kReportLoss,
  kPollNoise,
  kReplyNoise,
  kCrossNoise,
  kCommit,
  kReport,
  kGroupPlan,
  kVerifiers,
  kAssign,
  kRound,
};

inline std::uint64_t subseed(std::uint64_t seed, std::uint64_t tag,
                             std::uint64_t a = 0, std::uint64_t b = 0) {
  return seed_combine(seed_combine(seed, tag), a, b);
}

inline Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                  std::uint64_t b = 0) {
  return Rng(subseed(seed, tag, a, b));
}

inline bool lost(std::uint64_t seed, std::uint64_t tag, NodeId a, NodeId b,
                 double p) {
  if (p <= 0) return false;
  Rng rng = stream(seed, tag, a, b);
  return rng.uniform() < p;
}

// Ranging noise as a time offset: uniform over [-eps_r, eps_r] meters.
inline double tof_noise(std::uint64_t seed, std::uint64_t tag, NodeId a,
                        NodeId b, double eps_r) {
  Rng rng = stream(seed, tag, a, b);
  return rng.uniform(-eps_r, eps_r) / kSpeedOfLight;
}

// Own-position estimate: uniform over the disk of radius eps_p.
inline Position advertised_position(std::uint64_t seed, NodeId id,
                                    Position truth, double eps_p) {
  Rng rng = stream(seed, kPosError, id);
  for (int tries = 0; tries < 64; ++tries) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    if (x * x + y * y <= 1.0)
      return {truth.x + eps_p * x, truth.y + eps_p * y};
  }
  return truth;
}

}  // namespace simd

// One full poll -> replies -> reveal -> reports -> classify exchange over
// frozen positions.  Propagation is distance / c; honest participants only
// ever touch their own truth, everything else reaches them as messages.
inline RoundResult run_round(const Snapshot& snap, NodeId verifier,
                             const ProtocolParams& params,
                             const StrategyAssignment& strategies,
                             const RadioModel& radio, std::uint64_t seed) {
  RoundResult out;
  out.verifier = verifier;
  const Position v_pos = snap.positions.at(verifier);

  SimAuth auth;
  Rng vkeys_rng = simd::stream(seed, simd::kKeys, verifier);
  const KeyPair v_keys = auth.make_key(vkeys_rng);
  Rng vses_rng = simd::stream(seed, simd::kVerifierSession, verifier);
  VerifierSession vs(auth, v_keys, vses_rng, 0.0);
  const Poll poll = vs.poll();

  std::map<PubKey, NodeId> directory;
  directory[v_keys.pub] = verifier;

  struct Live {
    NodeId id = 0;
    Position pos;
    NodeBehavior behavior;
    double poll_rx_true = 0;
    double poll_rx_meas = 0;
    double reply_tx = 0;  // physical transmit instant
    KeyPair keys;
    std::unique_ptr<ResponderSession> session;
    Reply reply;
    CommitView view;        // independents keep it for the report phase
    CommitDecision commit;  // adversaries only
    Position advertised;
    double claimed_poll_rx = 0;
    std::vector<NodeId> handle_sender;  // overheard replies, arrival order
    std::vector<double> handle_rx;
  };
  std::vector<Live> live;

  for (const auto& [id, pos] : snap.positions) {
    if (id == verifier) continue;
    const double d = distance(pos, v_pos);
    if (d > radio.range) continue;
    if (simd::lost(seed, simd::kPollLoss, verifier, id,
                   radio.loss_probability))
      continue;
    Live n;
    n.id = id;
    n.pos = pos;
    n.behavior = strategies.of(id);
    n.poll_rx_true = d / kSpeedOfLight;
    n.poll_rx_meas = n.poll_rx_true + simd::tof_noise(seed, simd::kPollNoise,
                                                      verifier, id,
                                                      radio.eps_r);
    Rng delay_rng = simd::stream(seed, simd::kReplyDelay, id);
    n.reply_tx = n.poll_rx_true + delay_rng.uniform(0.0, params.t_max);
    Rng keys_rng = simd::stream(seed, simd::kKeys, id);
    n.keys = auth.make_key(keys_rng);
    n.session =
        std::make_unique<ResponderSession>(auth, n.keys, poll, n.poll_rx_meas);
    directory[n.keys.pub] = id;
    live.push_back(std::move(n));
  }

  // Oracle snapshot handed to knowledgeable adversaries: true positions of
  // everything in their own range.
  const auto roster_for = [&](const Live& n) {
    std::vector<std::pair<NodeId, Position>> roster;
    for (const auto& [id, pos] : snap.positions)
      if (id != n.id && distance(pos, n.pos) <= radio.range)
        roster.push_back({id, pos});
    return roster;
  };

  // Commit phase: settle every claimed position and poll reception.
  std::map<int, std::vector<std::size_t>> members_present;
  for (std::size_t i = 0; i < live.size(); ++i) {
    Live& n = live[i];
    switch (n.behavior.kind) {
      case StrategyKind::Honest:
        n.advertised =
            simd::advertised_position(seed, n.id, n.pos, radio.eps_p);
        n.claimed_poll_rx = n.poll_rx_meas;
        break;
      case StrategyKind::UnknowledgeableLiar:
      case StrategyKind::KnowledgeableIndependent:
      case StrategyKind::CollinearExploit: {
        AdversaryConfig cfg = strategies.tuning;
        cfg.kind = n.behavior.kind;
        n.view.self_position = n.pos;
        n.view.poll_rx_s = n.poll_rx_meas;
        n.view.range = radio.range;
        if (n.behavior.kind != StrategyKind::UnknowledgeableLiar)
          n.view.roster = roster_for(n);
        Rng commit_rng = simd::stream(seed, simd::kCommit, n.id);
        n.commit = independent_commit(cfg, n.view, commit_rng);
        n.advertised = n.commit.fake;
        n.claimed_poll_rx = n.commit.poll_rx_claimed;
        break;
      }
      default:
        members_present[n.behavior.group].push_back(i);
        break;
    }
  }

  struct GroupRound {
    GroupCommitInput input;
    GroupCommitPlan plan;
    std::vector<std::size_t> live_idx;  // parallel to input.members
  };
  std::map<int, GroupRound> group_rounds;
  std::map<std::size_t, std::pair<int, std::size_t>> member_slot;
  for (const auto& [g, idxs] : members_present) {
    GroupRound gr;
    gr.live_idx = idxs;
    gr.input.config = strategies.tuning;
    gr.input.config.kind = live[idxs.front()].behavior.kind;
    gr.input.verifier = verifier;
    gr.input.verifier_position = v_pos;
    for (std::size_t k = 0; k < idxs.size(); ++k) {
      Live& n = live[idxs[k]];
      GroupMemberView m;
      m.id = n.id;
      m.true_position = n.pos;
      m.poll_rx_s = n.poll_rx_meas;
      m.commit_view.self_position = n.pos;
      m.commit_view.poll_rx_s = n.poll_rx_meas;
      m.commit_view.range = radio.range;
      m.commit_view.roster = roster_for(n);
      gr.input.members.push_back(std::move(m));
      member_slot[idxs[k]] = {g, k};
    }
    Rng group_rng =
        simd::stream(seed, simd::kGroupPlan, static_cast<std::uint64_t>(g));
    gr.plan = colluding_commit(gr.input, group_rng);
    for (std::size_t k = 0; k < idxs.size(); ++k) {
      Live& n = live[idxs[k]];
      n.commit = gr.plan.members[k];
      n.advertised = n.commit.fake;
      n.claimed_poll_rx = n.commit.poll_rx_claimed;
    }
    group_rounds.emplace(g, std::move(gr));
  }

  // Replies: commitments carry the claimed poll reception; transmission
  // happens at the physical instant regardless of any lie.
  for (Live& n : live) {
    Rng link_rng = simd::stream(seed, simd::kReplyLink, n.id);
    n.reply = n.session->make_reply(n.claimed_poll_rx, n.reply_tx, link_rng);
  }

  for (Live& n : live) {
    if (simd::lost(seed, simd::kReplyLoss, n.id, verifier,
                   radio.loss_probability))
      continue;
    const double rx =
        n.reply_tx + distance(n.pos, v_pos) / kSpeedOfLight +
        simd::tof_noise(seed, simd::kReplyNoise, n.id, verifier, radio.eps_r);
    vs.on_reply(n.reply, rx);
  }

  // Cross receptions, delivered in arrival order so the anonymous handle
  // numbering matches what a real receiver would build up.
  for (std::size_t i = 0; i < live.size(); ++i) {
    Live& rcv = live[i];
    std::vector<std::tuple<double, NodeId, std::size_t>> arrivals;
    for (std::size_t j = 0; j < live.size(); ++j) {
      if (j == i) continue;
      const Live& snd = live[j];
      const double d = distance(snd.pos, rcv.pos);
      if (d > radio.range) continue;
      if (simd::lost(seed, simd::kCrossLoss, snd.id, rcv.id,
                     radio.loss_probability))
        continue;
      arrivals.push_back({snd.reply_tx + d / kSpeedOfLight, snd.id, j});
    }
    std::sort(arrivals.begin(), arrivals.end());
    for (const auto& [true_rx, sender, j] : arrivals) {
      const double rx = true_rx + simd::tof_noise(seed, simd::kCrossNoise,
                                                  sender, rcv.id, radio.eps_r);
      rcv.session->on_overheard(live[j].reply, rx);
      rcv.handle_sender.push_back(sender);
      rcv.handle_rx.push_back(rx);
    }
  }

  Rng reveal_rng = simd::stream(seed, simd::kReveal, verifier);
  const Reveal rv = vs.reveal(reveal_rng);
  for (Live& n : live) n.session->on_reveal(rv);

  // Group report planning pools the members' vantage points.
  std::map<int, std::vector<ReportDecision>> group_decisions;
  for (const auto& [g, gr] : group_rounds) {
    std::vector<GroupReportMemberView> views(gr.live_idx.size());
    for (std::size_t k = 0; k < gr.live_idx.size(); ++k) {
      const Live& n = live[gr.live_idx[k]];
      views[k].reply_tx_s = n.reply_tx;
      views[k].overheard_rx = n.handle_rx;
      for (const NodeId sender : n.handle_sender) {
        // The reply's link-layer id is the shared anonymous handle.
        std::uint64_t uid = 0;
        for (const Live& cand : live)
          if (cand.id == sender) uid = cand.reply.link;
        views[k].overheard_uid.push_back(uid);
        for (std::size_t k2 = 0; k2 < gr.live_idx.size(); ++k2)
          if (live[gr.live_idx[k2]].id == sender)
            views[k].partner_of_uid[uid] = k2;
      }
    }
    group_decisions[g] = colluding_report(gr.input, gr.plan, views);
  }

  std::vector<Report> reports;
  for (std::size_t i = 0; i < live.size(); ++i) {
    Live& n = live[i];
    const auto& observed = n.session->observed();
    std::vector<ReportEntry> entries;
    double claimed_tx = n.reply_tx;

    if (n.behavior.kind == StrategyKind::Honest) {
      entries = observed;
    } else if (member_slot.count(i)) {
      const auto [g, k] = member_slot.at(i);
      const ReportDecision& d = group_decisions.at(g)[k];
      claimed_tx = d.reply_tx_claimed;
      for (std::size_t h = 0; h < observed.size(); ++h)
        if (d.receptions.count(h))
          entries.push_back({d.receptions.at(h), observed[h].commitment});
    } else {
      AdversaryConfig cfg = strategies.tuning;
      cfg.kind = n.behavior.kind;
      ReportView view;
      view.overheard_rx = n.handle_rx;
      view.reply_tx_s = n.reply_tx;
      Rng report_rng = simd::stream(seed, simd::kReport, n.id);
      const ReportDecision d =
          independent_report(cfg, n.view, n.commit, view, report_rng);
      claimed_tx = d.reply_tx_claimed;
      for (std::size_t h = 0; h < observed.size(); ++h)
        if (d.receptions.count(h))
          entries.push_back({d.receptions.at(h), observed[h].commitment});
    }

    if (simd::lost(seed, simd::kReportLoss, n.id, verifier,
                   radio.loss_probability))
      continue;
    Rng link_rng = simd::stream(seed, simd::kReportLink, n.id);
    reports.push_back(n.session->make_report(n.advertised, claimed_tx,
                                             std::move(entries), link_rng));
  }

  const Position v_advertised =
      simd::advertised_position(seed, verifier, v_pos, radio.eps_p);
  const auto id_of = [&](const PubKey& key) -> std::optional<NodeId> {
    const auto it = directory.find(key);
    if (it == directory.end()) return std::nullopt;
    return it->second;
  };
  ObservationSet obs = vs.ingest(verifier, v_advertised, reports, id_of);
  out.classification = classify(obs, thresholds_from(params));
  for (const auto& r : obs.responders) {
    out.responders.push_back(r.id);
    out.adversary[r.id] =
        strategies.of(r.id).kind != StrategyKind::Honest;
  }
  out.observations = std::move(obs);
  return out;
}

inline bool is_colluding(StrategyKind k) {
  return k == StrategyKind::ColludingBasic ||
         k == StrategyKind::ColludingHyperbola ||
         k == StrategyKind::ReplyDisregard;
}

struct ScenarioConfig {
  ProtocolParams params;
  double loss_probability = 0;
  StrategyKind adversary_kind = StrategyKind::KnowledgeableIndependent;
  double adversary_ratio = 0;
  int group_size = 2;  // colluding kinds only
  double verifier_ratio = 0.01;
  std::uint64_t seed = 1;
  AdversaryConfig tuning;

  bool valid() const {
    return params.valid() && loss_probability >= 0 && loss_probability < 1 &&
           adversary_ratio >= 0 && adversary_ratio <= 1 &&
           verifier_ratio >= 0 && verifier_ratio <= 1 && group_size >= 1;
  }
};

// Node behaviors for a whole run.  Independents are a uniform sample of
// the requested ratio; colluders form groups of `group_size` around random
// seeds, filled with the nearest free neighbors in range at the first
// snapshot, or fewer where density runs out.
inline StrategyAssignment assign_adversaries(const MobilityTrace& trace,
                                             const ScenarioConfig& cfg) {
  StrategyAssignment a;
  a.tuning = cfg.tuning;
  if (trace.snapshots.empty()) return a;
  const auto& first = trace.snapshots.front().positions;
  std::vector<NodeId> pool;
  for (const auto& [id, pos] : first) pool.push_back(id);
  const int want =
      static_cast<int>(std::lround(cfg.adversary_ratio * pool.size()));
  if (want <= 0) return a;
  Rng rng(simd::subseed(cfg.seed, simd::kAssign));
  for (std::size_t k = 0; k + 1 < pool.size(); ++k)
    std::swap(pool[k], pool[k + rng.below(pool.size() - k)]);

  if (!is_colluding(cfg.adversary_kind)) {
    for (int k = 0; k < want; ++k)
      a.nodes[pool[k]] = {cfg.adversary_kind, -1};
    return a;
  }

  std::set<NodeId> taken;
  int assigned = 0;
  std::size_t cursor = 0;
  while (assigned < want && cursor < pool.size()) {
    const NodeId seed_id = pool[cursor++];
    if (taken.count(seed_id)) continue;
    const Position sp = first.at(seed_id);
    std::vector<std::pair<double, NodeId>> near;
    for (const auto& [id, pos] : first)
      if (id != seed_id && !taken.count(id) &&
          distance(pos, sp) <= cfg.params.range)
        near.push_back({distance(pos, sp), id});
    std::sort(near.begin(), near.end());

    std::vector<NodeId> members{seed_id};
    const int room = std::min(cfg.group_size, want - assigned);
    for (const auto& [d, id] : near) {
      if (static_cast<int>(members.size()) >= room) break;
      members.push_back(id);
    }
    const int g = static_cast<int>(a.groups.size());
    for (const NodeId id : members) {
      taken.insert(id);
      a.nodes[id] = {cfg.adversary_kind, g};
    }
    assigned += static_cast<int>(members.size());
    a.groups.push_back(std::move(members));
  }
  return a;
}

// Whole-trace evaluation: every snapshot, a fresh verifier sample polls its
// neighborhood; rounds are serialized so no node responds to two overlapping
// verifications.
inline Metrics run_scenario(const MobilityTrace& trace,
                            const ScenarioConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("invalid scenario config");
  const StrategyAssignment strategies = assign_adversaries(trace, cfg);
  const RadioModel radio{cfg.params.range, cfg.params.eps_p, cfg.params.eps_r,
                         cfg.loss_probability};

  std::vector<RoundResult> results;
  double deg_sum = 0, deg_sq = 0;
  long deg_n = 0;
  for (std::size_t si = 0; si < trace.snapshots.size(); ++si) {
    const Snapshot& snap = trace.snapshots[si];
    for (const auto& [id, nbrs] : neighbor_graph(snap, radio.range)) {
      const double deg = static_cast<double>(nbrs.size());
      deg_sum += deg;
      deg_sq += deg * deg;
      ++deg_n;
    }

    // Adversaries have nothing to gain from polling; verifiers come from
    // the correct population.
    std::vector<NodeId> pool;
    for (const auto& [id, pos] : snap.positions)
      if (strategies.of(id).kind == StrategyKind::Honest) pool.push_back(id);
    const long want = std::min<long>(
        std::lround(cfg.verifier_ratio * snap.positions.size()),
        static_cast<long>(pool.size()));
    Rng vrng = simd::stream(cfg.seed, simd::kVerifiers, si);
    for (long k = 0; k < want; ++k)
      std::swap(pool[k], pool[k + vrng.below(pool.size() - k)]);
    for (long k = 0; k < want; ++k) {
      const std::uint64_t round_seed =
          simd::subseed(cfg.seed, simd::kRound, si, static_cast<std::uint64_t>(k));
      results.push_back(
          run_round(snap, pool[k], cfg.params, strategies, radio, round_seed));
    }
  }

  Metrics m = compute_metrics(results);
  if (deg_n > 0) {
    m.mean_degree = deg_sum / deg_n;
    m.degree_variance = deg_sq / deg_n - m.mean_degree * m.mean_degree;
  }
  return m;
}

}  // namespace snpd
