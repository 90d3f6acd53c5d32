#pragma once

#include <sodium.h>

#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <string>

#include "attestfl/bytes.hpp"
#include "attestfl/error.hpp"
#include "attestfl/model/dataset.hpp"

namespace attestfl {

namespace detail {
inline void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error(Errc::kIo, "libsodium initialisation failed");
}
}  // namespace detail

/// 32-byte SHA-256 output.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const { return to_hex(bytes); }

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

/// Incremental SHA-256 with little-endian helpers matching ByteWriter.
class Hasher {
 public:
  Hasher() {
    detail::ensure_sodium();
    crypto_hash_sha256_init(&state_);
  }

  Hasher& update(std::span<const std::uint8_t> data) {
    crypto_hash_sha256_update(&state_, data.data(), data.size());
    return *this;
  }
  Hasher& u8(std::uint8_t v) { return update({&v, 1}); }
  Hasher& u32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return update(b);
  }
  Hasher& u64(std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return update(b);
  }
  Hasher& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }
  Hasher& f64s(std::span<const double> vs) {
    if constexpr (std::endian::native == std::endian::little) {
      return update({reinterpret_cast<const std::uint8_t*>(vs.data()),
                     vs.size() * sizeof(double)});
    } else {
      for (double v : vs) f64(v);
      return *this;
    }
  }
  Hasher& digest(const Digest& d) { return update(d.bytes); }

  Digest finish() {
    Digest d;
    crypto_hash_sha256_final(&state_, d.bytes.data());
    return d;
  }

 private:
  crypto_hash_sha256_state state_;
};

inline Digest sha256(std::span<const std::uint8_t> data) {
  return Hasher().update(data).finish();
}

/// Hash of a raw value span: the concatenated binary64 little-endian bytes.
inline Digest digest_values(std::span<const double> values) {
  return Hasher().f64s(values).finish();
}

/// Canonical hyperparameter bytes (49 bytes): learning_rate f64,
/// local_epochs u32, batch_size u32, optimizer u8, beta1 f64, beta2 f64,
/// epsilon f64, seed u64.
inline Bytes canonical_hyperparams(const Hyperparams& hp) {
  ByteWriter w(49);
  w.f64(hp.learning_rate);
  w.u32(hp.local_epochs);
  w.u32(hp.batch_size);
  w.u8(static_cast<std::uint8_t>(hp.optimizer));
  w.f64(hp.beta1);
  w.f64(hp.beta2);
  w.f64(hp.epsilon);
  w.u64(hp.seed);
  return std::move(w).take();
}

/// H(rows u32 || cols u32 || classes u32 || inputs f64... || labels u32...).
inline Digest dataset_digest(const Dataset& ds) {
  Hasher h;
  h.u32(static_cast<std::uint32_t>(ds.size()));
  h.u32(static_cast<std::uint32_t>(ds.features()));
  h.u32(ds.num_classes);
  h.f64s(ds.inputs.data());
  for (auto y : ds.labels) h.u32(y);
  return h.finish();
}

/// Static snapshot digest: H(canonical_hyperparams(hp) || dataset digest).
inline Digest static_digest(const Hyperparams& hp, const Digest& ds_digest) {
  return Hasher().update(canonical_hyperparams(hp)).digest(ds_digest).finish();
}

/// H(d u32 || values f64...), the encoding the report body uses for deltas.
inline Digest delta_digest(std::span<const double> delta) {
  return Hasher().u32(static_cast<std::uint32_t>(delta.size())).f64s(delta).finish();
}

}  // namespace attestfl
