#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "snpd/rng.hpp"

namespace snpd {

using Bytes = std::vector<std::uint8_t>;
using Hash20 = std::array<std::uint8_t, 20>;

// Wire widths shared by every scheme: 21-byte public key handles and
// signatures, 20-byte digests, size-preserving encryption.
inline constexpr std::size_t kPubKeyBytes = 21;
inline constexpr std::size_t kSignatureBytes = 21;
inline constexpr std::size_t kHashBytes = 20;

using PubKey = std::array<std::uint8_t, kPubKeyBytes>;
using Signature = std::array<std::uint8_t, kSignatureBytes>;

// Opaque capability for the private half of a key pair.  Only the holder
// can sign, decrypt, or prove ownership; the token never leaves the party
// it was issued to, which is what enforces knowledge isolation between
// simulated nodes.
struct SecretRef {
  std::uint64_t token = 0;
};

struct KeyPair {
  PubKey pub{};
  SecretRef secret;
};

namespace detail {

// Compact SHA-1, sufficient for simulation-grade commitments and tags.
class Sha1 {
 public:
  Sha1() { reset(); }

  void reset() {
    h_ = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u, 0xc3d2e1f0u};
    len_ = 0;
    buf_used_ = 0;
  }

  void update(const std::uint8_t* data, std::size_t n) {
    len_ += n;
    while (n > 0) {
      const std::size_t take = std::min(n, std::size_t{64} - buf_used_);
      std::memcpy(buf_.data() + buf_used_, data, take);
      buf_used_ += take;
      data += take;
      n -= take;
      if (buf_used_ == 64) {
        process(buf_.data());
        buf_used_ = 0;
      }
    }
  }

  Hash20 digest() {
    const std::uint64_t bits = len_ * 8;
    std::uint8_t pad = 0x80;
    update(&pad, 1);
    const std::uint8_t zero = 0;
    while (buf_used_ != 56) update(&zero, 1);
    std::array<std::uint8_t, 8> lenb;
    for (int i = 0; i < 8; ++i)
      lenb[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    update(lenb.data(), 8);

    Hash20 out;
    for (int i = 0; i < 5; ++i) {
      out[4 * i + 0] = static_cast<std::uint8_t>(h_[i] >> 24);
      out[4 * i + 1] = static_cast<std::uint8_t>(h_[i] >> 16);
      out[4 * i + 2] = static_cast<std::uint8_t>(h_[i] >> 8);
      out[4 * i + 3] = static_cast<std::uint8_t>(h_[i]);
    }
    return out;
  }

 private:
  static std::uint32_t rol(std::uint32_t v, int s) {
    return (v << s) | (v >> (32 - s));
  }

  void process(const std::uint8_t* p) {
    std::array<std::uint32_t, 80> w;
    for (int i = 0; i < 16; ++i) {
      w[i] = (std::uint32_t{p[4 * i]} << 24) | (std::uint32_t{p[4 * i + 1]} << 16) |
             (std::uint32_t{p[4 * i + 2]} << 8) | std::uint32_t{p[4 * i + 3]};
    }
    for (int i = 16; i < 80; ++i)
      w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5a827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ed9eba1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8f1bbcdcu;
      } else {
        f = b ^ c ^ d;
        k = 0xca62c1d6u;
      }
      const std::uint32_t t = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = t;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  std::array<std::uint32_t, 5> h_;
  std::array<std::uint8_t, 64> buf_;
  std::uint64_t len_ = 0;
  std::size_t buf_used_ = 0;
};

inline Hash20 sha1(std::span<const std::uint8_t> data) {
  Sha1 s;
  s.update(data.data(), data.size());
  return s.digest();
}

}  // namespace detail

// Authentication and confidentiality service for the simulation.  Parties
// never exchange private material; they hold SecretRef capabilities and the
// scheme keeps the matching secrets in an internal ring, which models
// asymmetric crypto at the stated wire widths without a real 21-byte
// signature scheme existing.
class AuthScheme {
 public:
  virtual ~AuthScheme() = default;

  virtual KeyPair make_key(Rng& rng) = 0;
  virtual Hash20 hash(std::span<const std::uint8_t> data) const = 0;

  virtual Signature sign(SecretRef secret,
                         std::span<const std::uint8_t> payload) = 0;
  virtual bool verify(const PubKey& pub, std::span<const std::uint8_t> payload,
                      const Signature& sig) = 0;

  // Size-preserving; only the key owner's SecretRef decrypts.
  virtual Bytes encrypt(const PubKey& to, std::span<const std::uint8_t> pt) = 0;
  virtual std::optional<Bytes> decrypt(SecretRef secret,
                                       std::span<const std::uint8_t> ct) = 0;

  // Proof of ownership of the key behind `pub`, bound to `h`.  Stands in
  // for encrypting a digest with the private half of a one-time key.
  virtual Bytes ownership_proof(SecretRef secret, const Hash20& h) = 0;
  virtual bool verify_ownership(const PubKey& pub, std::span<const std::uint8_t> proof,
                                const Hash20& h) = 0;
};

namespace detail {

struct PubKeyHasher {
  std::size_t operator()(const PubKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto b : k) h = (h ^ b) * 1099511628211ull;
    return static_cast<std::size_t>(h);
  }
};

// Common keyring plumbing; derived schemes supply the digest primitive.
class KeyedScheme : public AuthScheme {
 public:
  KeyPair make_key(Rng& rng) override {
    std::array<std::uint8_t, 32> priv;
    for (int i = 0; i < 4; ++i) {
      const std::uint64_t v = rng.next_u64();
      for (int j = 0; j < 8; ++j)
        priv[8 * i + j] = static_cast<std::uint8_t>(v >> (8 * j));
    }
    KeyPair kp;
    const Hash20 d = prf(priv, {}, 0x01);
    kp.pub[0] = 0x02;  // handle tag byte
    std::memcpy(kp.pub.data() + 1, d.data(), kHashBytes);
    kp.secret.token = next_token_++;
    secrets_[kp.secret.token] = priv;
    ring_[kp.pub] = priv;
    return kp;
  }

  Hash20 hash(std::span<const std::uint8_t> data) const override {
    return prf({}, data, 0x00);
  }

  Signature sign(SecretRef secret, std::span<const std::uint8_t> payload) override {
    const auto& priv = secrets_.at(secret.token);
    Signature sig;
    sig[0] = 0x30;  // signature tag byte
    const Hash20 d = prf(priv, payload, 0x02);
    std::memcpy(sig.data() + 1, d.data(), kHashBytes);
    return sig;
  }

  bool verify(const PubKey& pub, std::span<const std::uint8_t> payload,
              const Signature& sig) override {
    const auto it = ring_.find(pub);
    if (it == ring_.end()) return false;
    Signature expect;
    expect[0] = 0x30;
    const Hash20 d = prf(it->second, payload, 0x02);
    std::memcpy(expect.data() + 1, d.data(), kHashBytes);
    return expect == sig;
  }

  Bytes encrypt(const PubKey& to, std::span<const std::uint8_t> pt) override {
    const auto it = ring_.find(to);
    if (it == ring_.end()) return Bytes(pt.begin(), pt.end());
    return stream_xor(it->second, pt);
  }

  std::optional<Bytes> decrypt(SecretRef secret,
                               std::span<const std::uint8_t> ct) override {
    const auto it = secrets_.find(secret.token);
    if (it == secrets_.end()) return std::nullopt;
    return stream_xor(it->second, ct);
  }

  Bytes ownership_proof(SecretRef secret, const Hash20& h) override {
    const auto& priv = secrets_.at(secret.token);
    const Hash20 d = prf(priv, h, 0x03);
    return Bytes(d.begin(), d.end());
  }

  bool verify_ownership(const PubKey& pub, std::span<const std::uint8_t> proof,
                        const Hash20& h) override {
    const auto it = ring_.find(pub);
    if (it == ring_.end()) return false;
    const Hash20 d = prf(it->second, h, 0x03);
    return proof.size() == d.size() &&
           std::memcmp(proof.data(), d.data(), d.size()) == 0;
  }

 protected:
  using Priv = std::array<std::uint8_t, 32>;

  // Keyed digest over (key, domain, data).
  virtual Hash20 prf(std::span<const std::uint8_t> key,
                     std::span<const std::uint8_t> data,
                     std::uint8_t domain) const = 0;

 private:
  Bytes stream_xor(const Priv& key, std::span<const std::uint8_t> data) const {
    Bytes out(data.begin(), data.end());
    std::size_t off = 0;
    std::uint32_t counter = 0;
    while (off < out.size()) {
      const std::array<std::uint8_t, 4> ctr = {
          static_cast<std::uint8_t>(counter >> 24),
          static_cast<std::uint8_t>(counter >> 16),
          static_cast<std::uint8_t>(counter >> 8),
          static_cast<std::uint8_t>(counter)};
      const Hash20 ks = prf(key, ctr, 0x04);
      const std::size_t take = std::min(out.size() - off, ks.size());
      for (std::size_t i = 0; i < take; ++i) out[off + i] ^= ks[i];
      off += take;
      ++counter;
    }
    return out;
  }

  std::unordered_map<std::uint64_t, Priv> secrets_;
  std::unordered_map<PubKey, Priv, PubKeyHasher> ring_;
  std::uint64_t next_token_ = 1;
};

}  // namespace detail

// SHA-1 backed scheme used for wire-format work and anonymity checks.
class WireAuth final : public detail::KeyedScheme {
 protected:
  Hash20 prf(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data,
             std::uint8_t domain) const override {
    detail::Sha1 s;
    s.update(&domain, 1);
    const std::uint8_t klen = static_cast<std::uint8_t>(key.size());
    s.update(&klen, 1);
    s.update(key.data(), key.size());
    s.update(data.data(), data.size());
    return s.digest();
  }
};

// Cheap mixer with the same widths, for bulk simulation runs.
class SimAuth final : public detail::KeyedScheme {
 protected:
  Hash20 prf(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data,
             std::uint8_t domain) const override {
    std::uint64_t h1 = 0x9368e53c2f6af274ull ^ domain;
    std::uint64_t h2 = 0x586dcd208f7cd3fdull + key.size() * 1315423911ull;
    auto mix = [](std::uint64_t& h, std::uint8_t b) {
      h ^= b;
      h *= 0x100000001b3ull;
      h ^= h >> 29;
    };
    for (auto b : key) mix(h1, b);
    for (auto b : data) {
      mix(h1, b);
      mix(h2, static_cast<std::uint8_t>(b ^ 0x5a));
    }
    h2 ^= h1 * 0x9e3779b97f4a7c15ull;
    Hash20 out{};
    std::uint64_t v = h1;
    for (int i = 0; i < 20; ++i) {
      if (i == 8) v = h2;
      if (i == 16) v = seed_combine(h1, h2);
      out[i] = static_cast<std::uint8_t>(v >> (8 * (i % 8)));
    }
    return out;
  }
};

}  // namespace snpd
