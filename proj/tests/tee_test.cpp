#include <gtest/gtest.h>

#include <random>

#include "attestfl/tee/session.hpp"
#include "oracles.hpp"

using namespace attestfl;

namespace {

ReportBody random_body(std::mt19937_64& rng) {
  ReportBody b;
  b.client_id = static_cast<std::uint32_t>(rng());
  b.round = static_cast<std::uint32_t>(rng() % 1000);
  for (auto& x : b.challenge.bytes) x = static_cast<std::uint8_t>(rng());
  const std::size_t cf = rng() % 40;
  for (std::size_t i = 0; i < cf; ++i) {
    b.cf.events.push_back({static_cast<CfKind>(1 + rng() % 3),
                           static_cast<SiteId>(rng()), static_cast<SiteId>(rng()),
                           static_cast<std::uint32_t>(rng())});
  }
  for (auto& x : b.cv.static_snapshot.bytes) x = static_cast<std::uint8_t>(rng());
  const std::size_t cv = rng() % 12;
  for (std::size_t i = 0; i < cv; ++i) {
    CvEvent ev;
    ev.var = {static_cast<VarKind>(1 + rng() % 4), static_cast<std::uint8_t>(rng())};
    ev.op = static_cast<CvOp>(1 + rng() % 2);
    ev.site = static_cast<SiteId>(rng());
    ev.step = {static_cast<std::uint32_t>(rng()), static_cast<std::uint32_t>(rng())};
    const std::size_t deps = rng() % (kMaxCvDeps + 1);
    for (std::size_t d = 0; d < deps; ++d) {
      ev.deps.push_back({static_cast<VarKind>(1 + rng() % 4),
                         static_cast<std::uint8_t>(rng())});
    }
    for (auto& x : ev.value_digest.bytes) x = static_cast<std::uint8_t>(rng());
    b.cv.dynamic.push_back(ev);
  }
  for (auto& x : b.cv.final_delta_digest.bytes) x = static_cast<std::uint8_t>(rng());
  std::normal_distribution<double> g;
  b.delta.resize(rng() % 64);
  for (auto& v : b.delta) v = g(rng);
  return b;
}

// Independent packing of the documented layout.
std::vector<std::uint8_t> reference_encode(const ReportBody& b) {
  using oracle::put;
  std::vector<std::uint8_t> o{'A', 'T', 'F', 'L'};
  put(o, 1, 2);
  put(o, b.client_id, 4);
  put(o, b.round, 4);
  o.insert(o.end(), b.challenge.bytes.begin(), b.challenge.bytes.end());
  put(o, b.cf.events.size(), 4);
  for (const auto& e : b.cf.events) {
    put(o, static_cast<std::uint8_t>(e.kind), 1);
    put(o, e.site, 4);
    put(o, e.target, 4);
    put(o, e.seq, 4);
  }
  o.insert(o.end(), b.cv.static_snapshot.bytes.begin(), b.cv.static_snapshot.bytes.end());
  put(o, b.cv.dynamic.size(), 4);
  for (const auto& e : b.cv.dynamic) {
    const std::size_t start = o.size();
    put(o, static_cast<std::uint8_t>(e.var.kind), 1);
    put(o, e.var.layer, 1);
    put(o, static_cast<std::uint8_t>(e.op), 1);
    put(o, e.site, 4);
    put(o, e.step.epoch, 4);
    put(o, e.step.batch, 4);
    put(o, e.deps.size(), 1);
    for (std::size_t i = 0; i < 15; ++i) {
      if (i < e.deps.size()) {
        put(o, static_cast<std::uint8_t>(e.deps[i].kind), 1);
        put(o, e.deps[i].layer, 1);
      } else {
        put(o, 0, 2);
      }
    }
    o.insert(o.end(), e.value_digest.bytes.begin(), e.value_digest.bytes.end());
    EXPECT_EQ(o.size() - start, 78u);
  }
  o.insert(o.end(), b.cv.final_delta_digest.bytes.begin(),
           b.cv.final_delta_digest.bytes.end());
  put(o, b.delta.size(), 4);
  for (double v : b.delta) oracle::put_f64(o, v);
  return o;
}

}  // namespace

TEST(Keygen, DeterministicAndDistinct) {
  auto a = tee_keygen(1, 42);
  auto b = tee_keygen(1, 42);
  EXPECT_EQ(a.verify_key(), b.verify_key());
  EXPECT_NE(a.verify_key(), tee_keygen(1, 43).verify_key());
  EXPECT_NE(a.verify_key(), tee_keygen(2, 42).verify_key());
}

TEST(Encoding, MatchesReferenceLayout) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    auto b = random_body(rng);
    auto enc = canonical_encode(b);
    EXPECT_EQ(enc, reference_encode(b));
    EXPECT_EQ(enc.size(), encoded_body_size(b));
  }
}

TEST(Encoding, RoundTrip) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    auto b = random_body(rng);
    auto enc = canonical_encode(b);
    auto back = canonical_decode(enc);
    EXPECT_EQ(back, b);
    EXPECT_EQ(canonical_encode(back), enc);
  }
}

TEST(Encoding, EmptyBodyIsFixedHeader) {
  ReportBody b;
  auto enc = canonical_encode(b);
  EXPECT_EQ(enc.size(), kBodyFixedBytes);
  EXPECT_EQ(enc.size(), 122u);
}

TEST(Encoding, DeltaCoordinateChangesBytes) {
  std::mt19937_64 rng(3);
  auto b = random_body(rng);
  b.delta = {1.0, 2.0, 3.0};
  auto enc = canonical_encode(b);
  for (std::size_t i = 0; i < 3; ++i) {
    auto c = b;
    c.delta[i] = -c.delta[i];
    EXPECT_NE(canonical_encode(c), enc);
  }
}

TEST(Encoding, DecodeRejectsMalformed) {
  std::mt19937_64 rng(4);
  auto b = random_body(rng);
  b.delta = {1.0};
  auto enc = canonical_encode(b);

  auto bad_magic = enc;
  bad_magic[0] = 'X';
  try {
    canonical_decode(bad_magic);
    FAIL();
  } catch (const MalformedMessage& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  auto bad_version = enc;
  bad_version[4] = 2;
  try {
    canonical_decode(bad_version);
    FAIL();
  } catch (const MalformedMessage& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  for (std::size_t cut = 0; cut < enc.size(); ++cut) {
    std::vector<std::uint8_t> t(enc.begin(), enc.begin() + static_cast<long>(cut));
    EXPECT_THROW(canonical_decode(t), MalformedMessage) << cut;
  }
  auto trailing = enc;
  trailing.push_back(0);
  EXPECT_THROW(canonical_decode(trailing), MalformedMessage);

  auto huge = enc;
  huge[46] = huge[47] = huge[48] = huge[49] = 0xff;  // cf_len
  EXPECT_THROW(canonical_decode(huge), MalformedMessage);
}

TEST(Encoding, OversizeField) {
  EXPECT_NO_THROW(check_field_size(0, 8, "delta"));
  EXPECT_NO_THROW(check_field_size(0xffffffffULL / 8, 8, "delta"));
  try {
    check_field_size(0xffffffffULL / 8 + 1, 8, "delta");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kOversizeField);
  }
  EXPECT_THROW(check_field_size(0x100000000ULL, 1, "cf"), Error);
}

TEST(Signing, SignVerifyAndTamper) {
  auto id = tee_keygen(7, 1);
  std::mt19937_64 rng(5);
  auto b = random_body(rng);
  auto sig = tee_sign(id, b);
  ASSERT_EQ(sig.size(), kSignatureBytes);
  EXPECT_TRUE(tee_verify(id.verify_key(), b, sig));

  auto enc = canonical_encode(b);
  for (std::size_t byte = 0; byte < enc.size(); byte += 3) {
    auto flipped = enc;
    flipped[byte] ^= 0x10;
    ReportBody other;
    try {
      other = canonical_decode(flipped);
    } catch (const MalformedMessage&) {
      continue;
    }
    EXPECT_FALSE(tee_verify(id.verify_key(), other, sig)) << byte;
  }
  EXPECT_FALSE(tee_verify(tee_keygen(8, 1).verify_key(), b, sig));
}

TEST(Signing, OldSignatureOverNewChallenge) {
  auto id = tee_keygen(3, 9);
  std::mt19937_64 rng(6);
  auto b = random_body(rng);
  auto sig = tee_sign(id, b);
  b.round += 1;
  b.challenge.bytes[0] ^= 1;
  EXPECT_FALSE(tee_verify(id.verify_key(), b, sig));
}

TEST(Signing, MalformedSignature) {
  auto id = tee_keygen(3, 9);
  ReportBody b;
  auto sig = tee_sign(id, b);
  sig.pop_back();
  try {
    tee_verify(id.verify_key(), b, sig);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kMalformedSignature);
  }
  EXPECT_THROW(tee_verify(id.verify_key(), b, Signature{}), Error);
}

TEST(Signing, RandomForgeriesFail) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    auto id = tee_keygen(static_cast<std::uint32_t>(i), rng());
    auto b = random_body(rng);
    Signature sig(kSignatureBytes);
    for (auto& x : sig) x = static_cast<std::uint8_t>(rng());
    EXPECT_FALSE(tee_verify(id.verify_key(), b, sig));
  }
}

TEST(Signing, Binding) {
  auto id = tee_keygen(1, 1);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    auto b = random_body(rng);
    auto sig = tee_sign(id, b);
    auto other = random_body(rng);
    if (canonical_encode(other) != canonical_encode(b)) {
      EXPECT_FALSE(tee_verify(id.verify_key(), other, sig));
    }
  }
}

TEST(Session, AttestsRecordedRun) {
  SyntheticSpec spec;
  Dataset shard = SyntheticTask(spec).sample(20, 1);
  Hyperparams hp;
  auto arch = mlp_architecture(16, {32}, 10);
  auto id = tee_keygen(5, 5);
  auto w0 = ModelParams::xavier(arch, 0);
  TeeSession session(id, make_site_table(arch.size()), hp, shard, w0);
  auto res = local_train(w0, shard, hp, session.hooks());
  EXPECT_EQ(session.observed_delta(), res.delta.vector());
  Nonce ch;
  ch.bytes[0] = 0xaa;
  auto msg = session.attest(res.delta.values(), ch, 4);
  EXPECT_TRUE(tee_verify(id.verify_key(), msg.body, msg.signature));
  EXPECT_EQ(msg.body.round, 4u);
  EXPECT_EQ(msg.body.client_id, 5u);
  EXPECT_EQ(msg.body.challenge, ch);
  EXPECT_EQ(msg.body.delta, res.delta.vector());
  auto expected = build_expected(arch, hp, shard.size());
  EXPECT_TRUE(conform_cf(msg.body.cf, expected).ok);
  EXPECT_TRUE(conform_cv(msg.body.cv, expected, hp, dataset_digest(shard),
                         msg.body.delta).ok());
  EXPECT_THROW(session.attest(res.delta.values(), ch, 4), Error);
}
