#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "attestfl/bytes.hpp"
#include "attestfl/tee/digest.hpp"
#include "attestfl/trace/events.hpp"

namespace attestfl {

/// Per-(round, client) challenge value.
struct Nonce {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const { return to_hex(bytes); }

  friend bool operator==(const Nonce&, const Nonce&) = default;
  friend auto operator<=>(const Nonce&, const Nonce&) = default;
};

using Signature = std::vector<std::uint8_t>;

inline constexpr std::size_t kSignatureBytes = 64;
inline constexpr std::size_t kVerifyKeyBytes = 32;

/// Everything covered by the signature.
struct ReportBody {
  ControlFlowTrace cf;
  CriticalVariableLog cv;
  std::vector<double> delta;
  Nonce challenge;
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;

  friend bool operator==(const ReportBody&, const ReportBody&) = default;
};

struct ReportMsg {
  ReportBody body;
  Signature signature;

  friend bool operator==(const ReportMsg&, const ReportMsg&) = default;
};

// Canonical body layout, all integers little-endian:
//
//   magic "ATFL" (4) | version u16 | client_id u32 | round u32 | ch (32)
//   | cf_len u32 | cf_len x {kind u8, site u32, target u32, seq u32}
//   | cv_static (32) | cv_len u32 | cv_len x cv event (78)
//   | final_delta_digest (32) | d u32 | d x f64 (IEEE-754 binary64)
//
// A cv event is: var_kind u8 | var_layer u8 | op u8 | site u32 | epoch u32
// | batch u32 | dep_count u8 | 15 x {kind u8, layer u8} (unused slots zero)
// | value_digest (32).

inline constexpr std::array<std::uint8_t, 4> kBodyMagic{'A', 'T', 'F', 'L'};
inline constexpr std::uint16_t kBodyVersion = 1;
inline constexpr std::size_t kCfEventBytes = 13;
inline constexpr std::size_t kCvEventBytes = 78;
inline constexpr std::size_t kBodyFixedBytes = 4 + 2 + 4 + 4 + 32 + 4 + 32 + 4 + 32 + 4;

/// Throws OversizeField when `count` elements of `elem_bytes` each would
/// exceed a u32 length.
inline void check_field_size(std::size_t count, std::size_t elem_bytes,
                             const char* field) {
  constexpr std::size_t kMax = std::numeric_limits<std::uint32_t>::max();
  if (count > kMax || (elem_bytes != 0 && count > kMax / elem_bytes)) {
    throw Error(Errc::kOversizeField, field);
  }
}

inline std::size_t encoded_body_size(const ReportBody& b) {
  return kBodyFixedBytes + b.cf.events.size() * kCfEventBytes +
         b.cv.dynamic.size() * kCvEventBytes + b.delta.size() * 8;
}

inline Bytes canonical_encode(const ReportBody& b) {
  check_field_size(b.cf.events.size(), kCfEventBytes, "cf events");
  check_field_size(b.cv.dynamic.size(), kCvEventBytes, "cv events");
  check_field_size(b.delta.size(), 8, "delta");
  ByteWriter w(encoded_body_size(b));
  w.raw(kBodyMagic);
  w.u16(kBodyVersion);
  w.u32(b.client_id);
  w.u32(b.round);
  w.raw(b.challenge.bytes);
  w.u32(static_cast<std::uint32_t>(b.cf.events.size()));
  for (const auto& ev : b.cf.events) {
    w.u8(static_cast<std::uint8_t>(ev.kind));
    w.u32(ev.site);
    w.u32(ev.target);
    w.u32(ev.seq);
  }
  w.raw(b.cv.static_snapshot.bytes);
  w.u32(static_cast<std::uint32_t>(b.cv.dynamic.size()));
  for (const auto& ev : b.cv.dynamic) {
    if (ev.deps.size() > kMaxCvDeps) {
      throw Error(Errc::kOversizeField, "cv event dependencies");
    }
    w.u8(static_cast<std::uint8_t>(ev.var.kind));
    w.u8(ev.var.layer);
    w.u8(static_cast<std::uint8_t>(ev.op));
    w.u32(ev.site);
    w.u32(ev.step.epoch);
    w.u32(ev.step.batch);
    w.u8(static_cast<std::uint8_t>(ev.deps.size()));
    for (std::size_t i = 0; i < kMaxCvDeps; ++i) {
      if (i < ev.deps.size()) {
        w.u8(static_cast<std::uint8_t>(ev.deps[i].kind));
        w.u8(ev.deps[i].layer);
      } else {
        w.u8(0);
        w.u8(0);
      }
    }
    w.raw(ev.value_digest.bytes);
  }
  w.raw(b.cv.final_delta_digest.bytes);
  w.u32(static_cast<std::uint32_t>(b.delta.size()));
  for (double v : b.delta) w.f64(v);
  return std::move(w).take();
}

inline Digest body_digest(const ReportBody& b) {
  return sha256(canonical_encode(b));
}

namespace detail {

template <std::size_t N>
std::array<std::uint8_t, N> read_array(ByteReader& r, const char* what) {
  std::array<std::uint8_t, N> out{};
  auto s = r.raw(N, what);
  std::copy(s.begin(), s.end(), out.begin());
  return out;
}

inline VarRef read_var(ByteReader& r, const char* what) {
  auto at = r.offset();
  auto kind = r.u8();
  auto layer = r.u8();
  if (kind < 1 || kind > 4) {
    throw MalformedMessage(at, std::string("bad variable kind in ") + what);
  }
  return {static_cast<VarKind>(kind), layer};
}

}  // namespace detail

/// Inverse of canonical_encode. Rejects anything canonical_encode could not
/// have produced, so decode(encode(b)) == b and encode(decode(x)) == x.
inline ReportBody canonical_decode(std::span<const std::uint8_t> data,
                                   std::size_t base_offset = 0) {
  ByteReader r(data, base_offset);
  ReportBody b;
  auto magic_at = r.offset();
  if (detail::read_array<4>(r, "magic") != kBodyMagic) {
    throw MalformedMessage(magic_at, "bad magic");
  }
  auto version_at = r.offset();
  if (r.u16() != kBodyVersion) {
    throw MalformedMessage(version_at, "unsupported version");
  }
  b.client_id = r.u32();
  b.round = r.u32();
  b.challenge.bytes = detail::read_array<32>(r, "challenge");

  auto cf_len_at = r.offset();
  std::uint32_t cf_len = r.u32();
  if (static_cast<std::uint64_t>(cf_len) * kCfEventBytes > r.remaining()) {
    throw MalformedMessage(cf_len_at, "cf_len exceeds buffer");
  }
  b.cf.events.resize(cf_len);
  for (auto& ev : b.cf.events) {
    auto at = r.offset();
    auto kind = r.u8();
    if (kind < 1 || kind > 3) throw MalformedMessage(at, "bad cf event kind");
    ev.kind = static_cast<CfKind>(kind);
    ev.site = r.u32();
    ev.target = r.u32();
    ev.seq = r.u32();
  }

  b.cv.static_snapshot.bytes = detail::read_array<32>(r, "cv static");
  auto cv_len_at = r.offset();
  std::uint32_t cv_len = r.u32();
  if (static_cast<std::uint64_t>(cv_len) * kCvEventBytes > r.remaining()) {
    throw MalformedMessage(cv_len_at, "cv_len exceeds buffer");
  }
  b.cv.dynamic.resize(cv_len);
  for (auto& ev : b.cv.dynamic) {
    ev.var = detail::read_var(r, "cv event");
    auto op_at = r.offset();
    auto op = r.u8();
    if (op < 1 || op > 2) throw MalformedMessage(op_at, "bad cv op");
    ev.op = static_cast<CvOp>(op);
    ev.site = r.u32();
    ev.step.epoch = r.u32();
    ev.step.batch = r.u32();
    auto count_at = r.offset();
    auto count = r.u8();
    if (count > kMaxCvDeps) throw MalformedMessage(count_at, "too many deps");
    for (std::size_t i = 0; i < kMaxCvDeps; ++i) {
      if (i < count) {
        ev.deps.push_back(detail::read_var(r, "dependency"));
      } else {
        auto pad_at = r.offset();
        if (r.u16() != 0) throw MalformedMessage(pad_at, "non-zero dep padding");
      }
    }
    ev.value_digest.bytes = detail::read_array<32>(r, "value digest");
  }
  b.cv.final_delta_digest.bytes = detail::read_array<32>(r, "delta digest");

  auto d_at = r.offset();
  std::uint32_t d = r.u32();
  if (static_cast<std::uint64_t>(d) * 8 != r.remaining()) {
    throw MalformedMessage(d_at, "delta length does not match buffer");
  }
  b.delta.resize(d);
  for (auto& v : b.delta) v = r.f64();
  return b;
}

}  // namespace attestfl
