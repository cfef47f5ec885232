#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "snpd/bytes.hpp"
#include "snpd/crypto.hpp"
#include "snpd/geometry.hpp"
#include "snpd/protocol.hpp"

// Radio frame encodings.  All integers big-endian.  Timestamps are 32-bit
// counts of 2^-33 s (~0.12 ns, 3.5 cm of flight) relative to the round
// epoch, spanning half a second; out-of-range values clamp.  Positions are
// 32-bit signed counts of 1/256 m.  The in-memory protocol keeps full
// double precision; this codec is the lossy boundary.
namespace snpd::wire {

inline constexpr std::uint8_t kPollType = 0x01;
inline constexpr std::uint8_t kReplyType = 0x02;
inline constexpr std::uint8_t kRevealType = 0x03;
inline constexpr std::uint8_t kReportType = 0x04;

inline constexpr std::size_t kPollBytes = 26;
inline constexpr std::size_t kReplyBytes = 71;
inline constexpr std::size_t kRevealBytes = 67;
inline constexpr std::size_t kCommitmentBytes = 46;

constexpr std::size_t report_bytes(std::size_t entries) {
  // 11-byte header, 13-byte position+time+count, 50 per entry, 21-byte tag.
  return 11 + 13 + 50 * entries + 21;
}

// Largest report fitting a 1500-byte frame.
inline constexpr std::size_t kMaxReportEntries = 29;
static_assert(report_bytes(kMaxReportEntries) <= 1500);
static_assert(report_bytes(kMaxReportEntries + 1) > 1500);
static_assert(report_bytes(5) == 295);

inline constexpr double kTimeUnit = 0x1.0p-33;  // seconds per tick
inline constexpr double kPosUnit = 1.0 / 256.0; // meters per count

inline std::uint32_t encode_time(double seconds) {
  const double ticks = std::nearbyint(seconds / kTimeUnit);
  if (ticks <= 0.0) return 0;
  if (ticks >= 4294967295.0) return 0xffffffffu;
  return static_cast<std::uint32_t>(ticks);
}

inline double decode_time(std::uint32_t ticks) { return ticks * kTimeUnit; }

inline std::int32_t encode_coord(double meters) {
  const double counts = std::nearbyint(meters / kPosUnit);
  if (counts <= -2147483648.0) return INT32_MIN;
  if (counts >= 2147483647.0) return INT32_MAX;
  return static_cast<std::int32_t>(counts);
}

inline double decode_coord(std::int32_t counts) { return counts * kPosUnit; }

// ---- POLL ----------------------------------------------------------------

inline Bytes encode_poll(const Poll& p) {
  ByteWriter w;
  w.u8(kPollType);
  w.u32(p.link);
  w.raw(p.session_key);
  return w.take();
}

inline std::optional<Poll> decode_poll(std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  if (r.u8() != kPollType) return std::nullopt;
  Poll p;
  p.link = r.u32();
  r.raw(p.session_key);
  if (!r.at_end()) return std::nullopt;
  return p;
}

// ---- REPLY ---------------------------------------------------------------

// The commitment travels opaque: 46 encrypted bytes holding a quantized
// reception time, the identity key, and its signature.
struct WireCommitment {
  double poll_rx_s = 0;
  PubKey identity{};
  Signature sig{};
};

inline Bytes encode_commitment_plain(const WireCommitment& c) {
  ByteWriter w;
  w.u32(encode_time(c.poll_rx_s));
  w.raw(c.identity);
  w.raw(c.sig);
  return w.take();
}

inline std::optional<WireCommitment> decode_commitment_plain(
    std::span<const std::uint8_t> data) {
  ByteReader r(data);
  WireCommitment c;
  c.poll_rx_s = decode_time(r.u32());
  r.raw(c.identity);
  r.raw(c.sig);
  if (!r.at_end()) return std::nullopt;
  return c;
}

// The commitment signature covers the quantized time, the identity key,
// and the poll's session key hash, binding it to one poll.
inline Bytes commitment_sign_payload(std::uint32_t rx_ticks, const PubKey& identity,
                                     const Hash20& session_key_hash) {
  ByteWriter w;
  w.u32(rx_ticks);
  w.raw(identity);
  w.raw(session_key_hash);
  return w.take();
}

inline std::array<std::uint8_t, kCommitmentBytes> seal_commitment(
    AuthScheme& auth, SecretRef identity_secret, const PubKey& identity,
    const PubKey& session_key, double poll_rx_s) {
  WireCommitment c;
  c.poll_rx_s = poll_rx_s;
  c.identity = identity;
  c.sig = auth.sign(identity_secret,
                    commitment_sign_payload(encode_time(poll_rx_s), identity,
                                            auth.hash(session_key)));
  const Bytes ct = auth.encrypt(session_key, encode_commitment_plain(c));
  std::array<std::uint8_t, kCommitmentBytes> out{};
  std::copy(ct.begin(), ct.end(), out.begin());
  return out;
}

inline std::optional<WireCommitment> open_commitment(
    AuthScheme& auth, SecretRef session_secret, const Hash20& session_key_hash,
    std::span<const std::uint8_t> sealed) {
  const auto pt = auth.decrypt(session_secret, sealed);
  if (!pt) return std::nullopt;
  auto c = decode_commitment_plain(*pt);
  if (!c) return std::nullopt;
  const Bytes payload = commitment_sign_payload(encode_time(c->poll_rx_s),
                                                c->identity, session_key_hash);
  if (!auth.verify(c->identity, payload, c->sig)) return std::nullopt;
  return c;
}

struct WireReply {
  LinkId link = 0;
  Hash20 session_key_hash{};
  std::array<std::uint8_t, kCommitmentBytes> commitment{};
};

inline Bytes encode_reply(const WireReply& rp) {
  ByteWriter w;
  w.u8(kReplyType);
  w.u32(rp.link);
  w.raw(rp.session_key_hash);
  w.raw(rp.commitment);
  return w.take();
}

inline std::optional<WireReply> decode_reply(
    std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  if (r.u8() != kReplyType) return std::nullopt;
  WireReply rp;
  rp.link = r.u32();
  r.raw(rp.session_key_hash);
  r.raw(rp.commitment);
  if (!r.at_end()) return std::nullopt;
  return rp;
}

// ---- REVEAL ----------------------------------------------------------------

inline std::optional<Bytes> encode_reveal(const Reveal& rv) {
  if (rv.ownership.size() != kHashBytes) return std::nullopt;
  ByteWriter w;
  w.u8(kRevealType);
  w.u32(rv.link);
  w.raw(rv.ownership);
  w.raw(rv.verifier_key);
  w.raw(rv.sig);
  return w.take();
}

inline std::optional<Reveal> decode_reveal(
    std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  if (r.u8() != kRevealType) return std::nullopt;
  Reveal rv;
  rv.link = r.u32();
  rv.ownership.resize(kHashBytes);
  r.raw(rv.ownership);
  r.raw(rv.verifier_key);
  r.raw(rv.sig);
  if (!r.at_end()) return std::nullopt;
  return rv;
}

// ---- REPORT ----------------------------------------------------------------

struct WireReportEntry {
  double rx_s = 0;
  std::array<std::uint8_t, kCommitmentBytes> commitment{};
};

struct WireReportBody {
  Position claimed_position;
  double reply_tx_s = 0;
  std::vector<WireReportEntry> entries;
  Signature sig{};
};

struct WireReport {
  LinkId link = 0;
  LinkId dest = 0;
  Bytes payload;  // encrypted body
};

inline Bytes encode_report_body(const WireReportBody& b, bool with_sig) {
  ByteWriter w;
  w.i32(encode_coord(b.claimed_position.x));
  w.i32(encode_coord(b.claimed_position.y));
  w.u32(encode_time(b.reply_tx_s));
  w.u8(static_cast<std::uint8_t>(b.entries.size()));
  for (const auto& e : b.entries) {
    w.u32(encode_time(e.rx_s));
    w.raw(e.commitment);
  }
  if (with_sig) w.raw(b.sig);
  return w.take();
}

inline std::optional<WireReportBody> decode_report_body(
    std::span<const std::uint8_t> data) {
  ByteReader r(data);
  WireReportBody b;
  b.claimed_position.x = decode_coord(r.i32());
  b.claimed_position.y = decode_coord(r.i32());
  b.reply_tx_s = decode_time(r.u32());
  const std::uint8_t n = r.u8();
  for (std::uint8_t i = 0; i < n && r.ok(); ++i) {
    WireReportEntry e;
    e.rx_s = decode_time(r.u32());
    r.raw(e.commitment);
    b.entries.push_back(e);
  }
  r.raw(b.sig);
  if (!r.at_end()) return std::nullopt;
  return b;
}

inline Bytes encode_report(const WireReport& rep) {
  ByteWriter w;
  w.u8(kReportType);
  w.u32(rep.link);
  w.u32(rep.dest);
  w.u16(static_cast<std::uint16_t>(rep.payload.size()));
  w.raw(rep.payload);
  return w.take();
}

inline std::optional<WireReport> decode_report(
    std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  if (r.u8() != kReportType) return std::nullopt;
  WireReport rep;
  rep.link = r.u32();
  rep.dest = r.u32();
  rep.payload.resize(r.u16());
  r.raw(rep.payload);
  if (!r.at_end()) return std::nullopt;
  return rep;
}

// A report names no author; the verifier attributes it by trying the inner
// signature against each candidate identity.
inline WireReport seal_report(AuthScheme& auth, SecretRef identity_secret,
                              const PubKey& verifier_key, LinkId link,
                              LinkId dest, WireReportBody body) {
  body.sig = auth.sign(identity_secret, encode_report_body(body, false));
  WireReport rep;
  rep.link = link;
  rep.dest = dest;
  rep.payload = auth.encrypt(verifier_key, encode_report_body(body, true));
  return rep;
}

inline std::optional<WireReportBody> open_report(AuthScheme& auth,
                                                 SecretRef verifier_secret,
                                                 const WireReport& rep) {
  const auto pt = auth.decrypt(verifier_secret, rep.payload);
  if (!pt) return std::nullopt;
  return decode_report_body(*pt);
}

inline std::optional<std::size_t> attribute_report(
    AuthScheme& auth, const WireReportBody& body,
    std::span<const PubKey> candidates) {
  const Bytes signed_part = encode_report_body(body, false);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (auth.verify(candidates[i], signed_part, body.sig)) return i;
  return std::nullopt;
}

}  // namespace snpd::wire
