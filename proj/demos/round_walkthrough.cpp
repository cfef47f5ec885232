// Walks one protocol round end to end with the raw session API: an
// anonymous poll, commitment-bearing replies, the reveal, unicast reports,
// ingestion, and the verdicts.  One responder lies about its position.

#include <cstdio>
#include <map>
#include <optional>
#include <vector>

#include "snpd/adversary.hpp"
#include "snpd/protocol.hpp"
#include "snpd/verification.hpp"

using namespace snpd;

int main() {
  WireAuth auth;
  Rng rng(7);

  // Node 0 verifies; 1..4 respond.  Node 4 claims a position 60 m off and
  // forges its timings toward the verifier, which it happens to know.
  const std::vector<Position> pos = {
      {0, 0}, {120, 30}, {-90, 80}, {40, -140}, {-60, -70}};
  const Position fake{-112.4, -103.7};

  std::vector<KeyPair> keys;
  for (std::size_t i = 0; i < pos.size(); ++i) keys.push_back(auth.make_key(rng));

  VerifierSession verifier(auth, keys[0], rng, 0.0);
  const Poll poll = verifier.poll();
  std::printf("poll: anonymous one-time key, %zu responders in range\n\n",
              pos.size() - 1);

  std::vector<ResponderSession> responders;
  for (std::size_t i = 1; i < pos.size(); ++i)
    responders.emplace_back(auth, keys[i], poll,
                            distance(pos[0], pos[i]) / kSpeedOfLight);

  std::map<NodeId, double> claimed_tx;
  std::vector<Reply> replies;
  for (std::size_t i = 0; i < responders.size(); ++i) {
    const NodeId id = static_cast<NodeId>(i + 1);
    const double tx = responders[i].poll_rx() + 0.001 * (i + 1);
    claimed_tx[id] = tx;
    double claimed_rx = responders[i].poll_rx();
    if (id == 4) {
      // The liar shifts both self-reported timestamps by the displacement
      // delay so the direct-symmetry test sees the fake position.
      const SelfForgery forged =
          forge_self_times(pos[0], pos[4], fake, claimed_rx, tx);
      claimed_rx = forged.poll_rx_claimed;
      claimed_tx[id] = forged.reply_tx_claimed;
    }
    replies.push_back(responders[i].make_reply(claimed_rx, tx, rng));
    verifier.on_reply(replies.back(),
                      tx + distance(pos[0], pos[i + 1]) / kSpeedOfLight);
    for (std::size_t j = 0; j < responders.size(); ++j)
      if (j != i)
        responders[j].on_overheard(
            replies.back(), tx + distance(pos[i + 1], pos[j + 1]) / kSpeedOfLight);
  }

  const Reveal reveal = verifier.reveal(rng);
  std::vector<Report> reports;
  for (std::size_t i = 0; i < responders.size(); ++i) {
    const NodeId id = static_cast<NodeId>(i + 1);
    if (!responders[i].on_reveal(reveal)) continue;
    const Position claim = id == 4 ? fake : pos[i + 1];
    reports.push_back(responders[i].make_report(claim, claimed_tx.at(id),
                                                responders[i].observed(), rng));
  }
  std::printf("collected %zu reports after the reveal\n\n", reports.size());

  const auto id_of = [&](const PubKey& k) -> std::optional<NodeId> {
    for (std::size_t i = 0; i < keys.size(); ++i)
      if (keys[i].pub == k) return static_cast<NodeId>(i);
    return std::nullopt;
  };
  const ObservationSet obs = verifier.ingest(0, pos[0], reports, id_of);

  const Classification cls = classify(obs, Thresholds{});
  const char* names[] = {"verified", "unverifiable", "faulty"};
  for (const auto& [id, o] : cls.nodes) {
    const ResponderRecord* r = obs.find(id);
    std::printf("node %u: claims (%7.1f, %7.1f)  links=%d mismatches=%d  -> %s\n",
                id, r->claimed_position.x, r->claimed_position.y, o.links,
                o.mismatches, names[static_cast<int>(o.verdict)]);
  }
  std::printf("\nthe liar forged its own timings (passing direct symmetry)\n"
              "but every cross link against a truthful neighbor mismatches.\n");
  return 0;
}
