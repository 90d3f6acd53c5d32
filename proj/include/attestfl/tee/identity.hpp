#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>

#include "attestfl/tee/digest.hpp"
#include "attestfl/tee/encoding.hpp"

namespace attestfl {

using VerifyKey = std::array<std::uint8_t, kVerifyKeyBytes>;

class TeeIdentity;
TeeIdentity tee_keygen(std::uint32_t client_id, std::uint64_t seed);
Signature tee_sign(const TeeIdentity& identity, const ReportBody& body);

/// A client's TEE-resident Ed25519 key pair. The secret half has no
/// accessor; only `tee_sign` can use it.
class TeeIdentity {
 public:
  std::uint32_t client_id() const noexcept { return client_id_; }
  const VerifyKey& verify_key() const noexcept { return verify_key_; }

 private:
  TeeIdentity() = default;

  friend TeeIdentity tee_keygen(std::uint32_t, std::uint64_t);
  friend Signature tee_sign(const TeeIdentity&, const ReportBody&);
  friend Signature tee_sign_digest(const TeeIdentity&, const Digest&);

  std::uint32_t client_id_ = 0;
  VerifyKey verify_key_{};
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> secret_{};
};

/// Deterministic key pair: the Ed25519 seed is
/// SHA-256("attestfl-tee-key" || client_id u32 || seed u64).
inline TeeIdentity tee_keygen(std::uint32_t client_id, std::uint64_t seed) {
  detail::ensure_sodium();
  Hasher h;
  h.update(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>("attestfl-tee-key"), 16));
  h.u32(client_id).u64(seed);
  Digest key_seed = h.finish();
  TeeIdentity id;
  id.client_id_ = client_id;
  crypto_sign_seed_keypair(id.verify_key_.data(), id.secret_.data(),
                           key_seed.bytes.data());
  sodium_memzero(key_seed.bytes.data(), key_seed.bytes.size());
  return id;
}

inline Signature tee_sign_digest(const TeeIdentity& identity, const Digest& d) {
  Signature sig(kSignatureBytes);
  crypto_sign_detached(sig.data(), nullptr, d.bytes.data(), d.bytes.size(),
                       identity.secret_.data());
  return sig;
}

/// Signs H(canonical_encode(body)).
inline Signature tee_sign(const TeeIdentity& identity, const ReportBody& body) {
  return tee_sign_digest(identity, body_digest(body));
}

inline bool tee_verify_digest(const VerifyKey& key, const Digest& d,
                              std::span<const std::uint8_t> sig) {
  detail::ensure_sodium();
  if (sig.size() != kSignatureBytes) {
    throw Error(Errc::kMalformedSignature,
                "expected 64 bytes, got " + std::to_string(sig.size()));
  }
  return crypto_sign_verify_detached(sig.data(), d.bytes.data(),
                                     d.bytes.size(), key.data()) == 0;
}

inline bool tee_verify(const VerifyKey& key, const ReportBody& body,
                       std::span<const std::uint8_t> sig) {
  if (sig.size() != kSignatureBytes) {
    throw Error(Errc::kMalformedSignature,
                "expected 64 bytes, got " + std::to_string(sig.size()));
  }
  return tee_verify_digest(key, body_digest(body), sig);
}

}  // namespace attestfl
