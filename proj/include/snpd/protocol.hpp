#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "snpd/bytes.hpp"
#include "snpd/crypto.hpp"
#include "snpd/geometry.hpp"
#include "snpd/rng.hpp"

namespace snpd {

using NodeId = std::uint32_t;
using LinkId = std::uint32_t;

// Exact fraction for the mismatch threshold; the equality boundary decides
// verdicts, so it must never be float-rounded.
struct Ratio {
  int num = 1;
  int den = 2;
};

// Round constants shared by every participant.  Times are seconds; the
// reply window, reveal guard, and jitter keep the whole exchange within a
// few hundred milliseconds.
struct ProtocolParams {
  double range = 250.0;  // proximity range R, meters
  double eps_p = 5.0;    // own-position error bound, meters
  double eps_r = 6.8;    // ranging error bound, meters
  double t_max = 0.2;    // reply delay window
  double reveal_guard = 0.03;  // wait after the window before revealing
  double jitter_max = 0.05;    // extra random reveal delay
  Ratio delta{1, 2};           // tolerated mismatch fraction

  bool valid() const {
    return range > 0 && eps_p >= 0 && eps_r >= 0 && t_max > 0 &&
           reveal_guard > 0 && jitter_max > 0 && delta.num > 0 &&
           delta.den > delta.num;
  }
};

// In-memory message forms.  Every time value is seconds relative to the
// round epoch (the poll transmission instant) at full double precision;
// the wire codec quantizes at the boundary.
//
// None of the broadcast messages carries a sender identity in the clear:
// the poll and reply are anonymous until the reveal closes the round.

struct Poll {
  LinkId link = 0;
  PubKey session_key{};  // fresh one-time key, the only handle on the round
};

struct Reply {
  LinkId link = 0;
  Hash20 session_key_hash{};  // binds the reply to the poll it answers
  Bytes commitment;           // encrypted for the poll's session key
};

struct Reveal {
  LinkId link = 0;
  Bytes ownership;        // proof the sender owns the poll's session key
  PubKey verifier_key{};  // long-term identity, disclosed only now
  Signature sig{};
};

struct Report {
  LinkId link = 0;
  LinkId dest = 0;  // the reveal's link id
  Bytes payload;    // encrypted for the verifier's identity key
};

// Decrypted commitment body.
struct CommitmentContent {
  double poll_rx_s = 0;  // claimed poll reception time
  PubKey identity{};
  Signature sig{};
};

// One overheard reply inside a report: claimed reception time plus the
// commitment blob exactly as received (the reporter cannot open it).
struct ReportEntry {
  double rx_s = 0;
  Bytes commitment;
};

// Decrypted report body.
struct ReportContent {
  Position claimed_position;
  double reply_tx_s = 0;  // claimed own transmission time
  std::vector<ReportEntry> entries;
  PubKey identity{};
  Signature sig{};
};

namespace detail {

inline Bytes commitment_sign_payload(double poll_rx_s, const PubKey& identity,
                                     const Hash20& session_key_hash) {
  ByteWriter w;
  w.f64(poll_rx_s);
  w.raw(identity);
  w.raw(session_key_hash);
  return w.take();
}

inline Bytes encode_commitment(const CommitmentContent& c) {
  ByteWriter w;
  w.f64(c.poll_rx_s);
  w.raw(c.identity);
  w.raw(c.sig);
  return w.take();
}

inline std::optional<CommitmentContent> decode_commitment(
    std::span<const std::uint8_t> data) {
  ByteReader r(data);
  CommitmentContent c;
  c.poll_rx_s = r.f64();
  r.raw(c.identity);
  r.raw(c.sig);
  if (!r.at_end()) return std::nullopt;
  return c;
}

inline Bytes reveal_sign_payload(std::span<const std::uint8_t> ownership,
                                 const PubKey& verifier_key, LinkId link) {
  ByteWriter w;
  w.raw(ownership);
  w.raw(verifier_key);
  w.u32(link);
  return w.take();
}

inline Bytes encode_report_body(const ReportContent& c, bool with_sig) {
  ByteWriter w;
  w.f64(c.claimed_position.x);
  w.f64(c.claimed_position.y);
  w.f64(c.reply_tx_s);
  w.u16(static_cast<std::uint16_t>(c.entries.size()));
  for (const auto& e : c.entries) {
    w.f64(e.rx_s);
    w.u16(static_cast<std::uint16_t>(e.commitment.size()));
    w.raw(e.commitment);
  }
  w.raw(c.identity);
  if (with_sig) w.raw(c.sig);
  return w.take();
}

inline std::optional<ReportContent> decode_report_body(
    std::span<const std::uint8_t> data) {
  ByteReader r(data);
  ReportContent c;
  c.claimed_position.x = r.f64();
  c.claimed_position.y = r.f64();
  c.reply_tx_s = r.f64();
  const std::uint16_t n = r.u16();
  for (std::uint16_t i = 0; i < n && r.ok(); ++i) {
    ReportEntry e;
    e.rx_s = r.f64();
    e.commitment.resize(r.u16());
    r.raw(e.commitment);
    c.entries.push_back(std::move(e));
  }
  r.raw(c.identity);
  r.raw(c.sig);
  if (!r.at_end()) return std::nullopt;
  return c;
}

}  // namespace detail

// Everything the classifier needs about one responder, as claimed by the
// responder itself plus the verifier's own reply-arrival measurement.
struct ResponderRecord {
  NodeId id = 0;
  Position claimed_position;
  double poll_rx_claimed = 0;      // from the commitment
  double reply_tx_claimed = 0;     // from the report
  double reply_rx_at_verifier = 0; // measured locally by the verifier
};

// Snapshot handed from the protocol round to the classifier.
struct ObservationSet {
  NodeId verifier = 0;
  Position verifier_position;  // the verifier's advertised position
  double poll_tx = 0;
  std::vector<ResponderRecord> responders;
  // (sender, receiver) -> receiver's claimed reception of sender's reply.
  std::map<std::pair<NodeId, NodeId>, double> cross;

  const ResponderRecord* find(NodeId id) const {
    for (const auto& r : responders)
      if (r.id == id) return &r;
    return nullptr;
  }
};

// Counters for reports and entries dropped during ingestion.
struct IngestStats {
  int bad_reports = 0;      // undecryptable, malformed, or bad signature
  int unknown_reporters = 0;  // valid report from a non-responder
  int reply_only = 0;       // replied but never reported
  int dropped_entries = 0;  // unresolvable or duplicate commitments
};

// Verifier state for one discovery round.
class VerifierSession {
 public:
  VerifierSession(AuthScheme& auth, KeyPair identity, Rng& rng, double poll_tx_s)
      : auth_(&auth),
        identity_(identity),
        session_(auth.make_key(rng)),
        poll_link_(static_cast<LinkId>(rng.next_u64() | 1)),
        poll_tx_(poll_tx_s) {}

  Poll poll() const { return Poll{poll_link_, session_.pub}; }
  double poll_tx() const { return poll_tx_; }
  const PubKey& session_key() const { return session_.pub; }

  // Replies for other polls are silently ignored.
  void on_reply(const Reply& r, double rx_s) {
    if (r.session_key_hash != auth_->hash(session_.pub)) return;
    heard_.push_back({rx_s, r.commitment});
  }

  // The ownership proof is made with the poll's one-time secret over the
  // identity key digest: it shows the poll author is this identity, and is
  // checkable by anyone holding the poll.
  Reveal reveal(Rng& rng) {
    Reveal rv;
    rv.link = static_cast<LinkId>(rng.next_u64() | 1);
    rv.ownership = auth_->ownership_proof(session_.secret, auth_->hash(identity_.pub));
    rv.verifier_key = identity_.pub;
    const Bytes payload =
        detail::reveal_sign_payload(rv.ownership, rv.verifier_key, rv.link);
    rv.sig = auth_->sign(identity_.secret, payload);
    return rv;
  }

  // Opens commitments and reports, authenticates both, and assembles the
  // classifier input.  A node counts as a responder only if its reply was
  // heard and a matching valid report arrived; times claimed for unknown
  // parties are dropped.  `verifier_id`/`advertised` describe the verifier
  // itself; `id_of` resolves identity keys to node ids.
  ObservationSet ingest(
      NodeId verifier_id, Position advertised, std::span<const Report> reports,
      const std::function<std::optional<NodeId>(const PubKey&)>& id_of,
      IngestStats* stats = nullptr) const {
    IngestStats local;
    IngestStats& st = stats ? *stats : local;

    struct Opened {
      NodeId id;
      CommitmentContent content;
      double reply_rx;
    };
    std::vector<Opened> responders;
    for (const auto& h : heard_) {
      auto c = open_commitment(h.commitment);
      if (!c) continue;
      const auto id = id_of(c->identity);
      if (!id) continue;
      bool dup = false;
      for (const auto& o : responders) dup = dup || o.id == *id;
      if (dup) continue;
      responders.push_back({*id, *c, h.rx_s});
    }

    ObservationSet obs;
    obs.verifier = verifier_id;
    obs.verifier_position = advertised;
    obs.poll_tx = poll_tx_;

    std::vector<ReportContent> accepted;
    std::vector<NodeId> accepted_ids;
    for (const auto& rep : reports) {
      const auto pt = auth_->decrypt(identity_.secret, rep.payload);
      if (!pt) {
        ++st.bad_reports;
        continue;
      }
      auto body = detail::decode_report_body(*pt);
      if (!body) {
        ++st.bad_reports;
        continue;
      }
      const Bytes signed_part = detail::encode_report_body(*body, false);
      if (!auth_->verify(body->identity, signed_part, body->sig)) {
        ++st.bad_reports;
        continue;
      }
      const auto id = id_of(body->identity);
      if (!id) {
        ++st.unknown_reporters;
        continue;
      }
      const Opened* own = nullptr;
      for (const auto& o : responders)
        if (o.id == *id) own = &o;
      if (!own) {
        ++st.unknown_reporters;
        continue;
      }
      bool dup = false;
      for (NodeId a : accepted_ids) dup = dup || a == *id;
      if (dup) {
        ++st.bad_reports;
        continue;
      }

      obs.responders.push_back({*id, body->claimed_position,
                                own->content.poll_rx_s, body->reply_tx_s,
                                own->reply_rx});
      accepted.push_back(std::move(*body));
      accepted_ids.push_back(*id);
    }

    // Cross-observations only between identified responders.
    for (std::size_t i = 0; i < accepted.size(); ++i) {
      for (const auto& e : accepted[i].entries) {
        const auto c = open_commitment(e.commitment);
        if (!c) {
          ++st.dropped_entries;
          continue;
        }
        const auto sender = id_of(c->identity);
        if (!sender || !obs.find(*sender) || *sender == accepted_ids[i]) {
          ++st.dropped_entries;
          continue;
        }
        const auto key = std::make_pair(*sender, accepted_ids[i]);
        if (obs.cross.count(key)) {
          ++st.dropped_entries;
          continue;
        }
        obs.cross[key] = e.rx_s;
      }
    }

    st.reply_only = static_cast<int>(responders.size() - accepted.size());
    return obs;
  }

 private:
  std::optional<CommitmentContent> open_commitment(const Bytes& blob) const {
    const auto pt = auth_->decrypt(session_.secret, blob);
    if (!pt) return std::nullopt;
    auto c = detail::decode_commitment(*pt);
    if (!c) return std::nullopt;
    const Bytes payload = detail::commitment_sign_payload(
        c->poll_rx_s, c->identity, auth_->hash(session_.pub));
    if (!auth_->verify(c->identity, payload, c->sig)) return std::nullopt;
    return c;
  }

  struct HeardReply {
    double rx_s;
    Bytes commitment;
  };

  AuthScheme* auth_;
  KeyPair identity_;
  KeyPair session_;
  LinkId poll_link_;
  double poll_tx_;
  std::vector<HeardReply> heard_;
};

// Responder state for one discovery round.  Honest callers pass their
// measured and true values; an adversary feeds forged ones through the
// same interface, so the message mechanics stay identical.
class ResponderSession {
 public:
  ResponderSession(AuthScheme& auth, KeyPair identity, const Poll& poll,
                   double poll_rx_s)
      : auth_(&auth),
        identity_(identity),
        poll_key_(poll.session_key),
        poll_key_hash_(auth.hash(poll.session_key)),
        poll_rx_(poll_rx_s) {}

  double poll_rx() const { return poll_rx_; }

  Reply make_reply(double claimed_poll_rx_s, double tx_s, Rng& rng) {
    reply_tx_ = tx_s;
    CommitmentContent c;
    c.poll_rx_s = claimed_poll_rx_s;
    c.identity = identity_.pub;
    c.sig = auth_->sign(identity_.secret,
                        detail::commitment_sign_payload(
                            claimed_poll_rx_s, identity_.pub, poll_key_hash_));
    Reply r;
    r.link = static_cast<LinkId>(rng.next_u64() | 1);
    r.session_key_hash = poll_key_hash_;
    r.commitment = auth_->encrypt(poll_key_, detail::encode_commitment(c));
    return r;
  }

  // Overheard replies are only kept when they answer the same poll.
  void on_overheard(const Reply& r, double rx_s) {
    if (r.session_key_hash != poll_key_hash_) return;
    observed_.push_back({rx_s, r.commitment});
  }

  // Validates the reveal: ownership of the poll's one-time key plus the
  // identity signature.  Returns false (and stays unarmed) on failure.
  bool on_reveal(const Reveal& rv) {
    // The proof must come from the poll's one-time key and commit to the
    // disclosed identity; the signature then closes the loop.
    if (!auth_->verify_ownership(poll_key_, rv.ownership,
                                 auth_->hash(rv.verifier_key)))
      return false;
    const Bytes payload =
        detail::reveal_sign_payload(rv.ownership, rv.verifier_key, rv.link);
    if (!auth_->verify(rv.verifier_key, payload, rv.sig)) return false;
    verifier_key_ = rv.verifier_key;
    dest_link_ = rv.link;
    return true;
  }

  bool revealed() const { return dest_link_ != 0; }
  const std::vector<ReportEntry>& observed() const { return observed_; }
  double reply_tx() const { return reply_tx_; }

  // Honest callers pass their true position estimate, the recorded
  // transmit time, and observed() verbatim.
  Report make_report(Position claimed_position, double claimed_reply_tx_s,
                     std::vector<ReportEntry> entries, Rng& rng) const {
    ReportContent c;
    c.claimed_position = claimed_position;
    c.reply_tx_s = claimed_reply_tx_s;
    c.entries = std::move(entries);
    c.identity = identity_.pub;
    c.sig = auth_->sign(identity_.secret, detail::encode_report_body(c, false));
    Report rep;
    rep.link = static_cast<LinkId>(rng.next_u64() | 1);
    rep.dest = dest_link_;
    rep.payload = auth_->encrypt(verifier_key_, detail::encode_report_body(c, true));
    return rep;
  }

 private:
  AuthScheme* auth_;
  KeyPair identity_;
  PubKey poll_key_;
  Hash20 poll_key_hash_;
  double poll_rx_;
  double reply_tx_ = 0;
  PubKey verifier_key_{};
  LinkId dest_link_ = 0;
  std::vector<ReportEntry> observed_;
};

}  // namespace snpd
