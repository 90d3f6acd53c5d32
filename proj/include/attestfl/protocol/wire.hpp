#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "attestfl/bytes.hpp"
#include "attestfl/tee/encoding.hpp"

namespace attestfl {

/// `sigma_len u16 || sigma || canonical body`.
inline Bytes encode_msg(const ReportMsg& msg) {
  if (msg.signature.size() > 0xffff) {
    throw Error(Errc::kOversizeField, "signature longer than 65535 bytes");
  }
  Bytes body = canonical_encode(msg.body);
  ByteWriter w(2 + msg.signature.size() + body.size());
  w.u16(static_cast<std::uint16_t>(msg.signature.size()));
  w.raw(msg.signature);
  w.raw(body);
  return std::move(w).take();
}

/// Offsets in MalformedMessage are relative to the start of the body;
/// problems in the signature prefix report offset 0.
inline ReportMsg decode_msg(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) throw MalformedMessage(0, "missing signature length");
  const std::size_t sig_len = bytes[0] | (static_cast<std::size_t>(bytes[1]) << 8);
  if (bytes.size() < 2 + sig_len) {
    throw MalformedMessage(0, "signature runs past end of message");
  }
  ReportMsg msg;
  msg.signature.assign(bytes.begin() + 2, bytes.begin() + 2 + static_cast<long>(sig_len));
  msg.body = canonical_decode(bytes.subspan(2 + sig_len));
  return msg;
}

/// Transcripts: one hex-encoded message per line.
inline void write_transcript(std::ostream& out, const std::vector<Bytes>& msgs) {
  for (const auto& m : msgs) out << to_hex(m) << '\n';
}

inline std::vector<Bytes> read_transcript(std::istream& in) {
  std::vector<Bytes> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(from_hex(line));
  }
  return out;
}

}  // namespace attestfl
