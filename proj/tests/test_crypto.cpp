#include <doctest.h>

#include <cstring>
#include <set>

#include "d2d/crypto.hpp"
#include "d2d/rng.hpp"
#include "oracles.hpp"

using namespace d2d;
using namespace d2d::crypto;

namespace {

Bytes str(const char* s) { return Bytes(s, s + std::strlen(s)); }

SymKey random_key(Rng& rng, KeyKind kind = KeyKind::Session) {
    return SymKey{rng.block32(), kind};
}

}  // namespace

TEST_CASE("sha256 known-answer vectors") {
    CHECK(to_hex(raw::sha256({}).bytes) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(to_hex(raw::sha256(str("abc")).bytes) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(raw::sha256(str("The quick brown fox jumps over the lazy dog")).bytes) ==
          "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
    // 56-byte input exercises the two-block padding path
    CHECK(to_hex(raw::sha256(str("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")).bytes) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("hash is deterministic, 32 bytes, and counted") {
    CryptoCtx ctx;
    Bytes m = str("payload");
    Digest a = ctx.hash(m);
    Digest b = ctx.hash(m);
    CHECK(a == b);
    CHECK(a.bytes.size() == 32);
    CHECK(ctx.counters().hash == 2);
    CHECK(ctx.counters().enc == 0);
    CHECK(ctx.counters().dec == 0);
}

TEST_CASE("hash separates near-identical inputs") {
    Rng rng(11);
    std::set<Block32> outputs;
    for (int i = 0; i < 1000; ++i) {
        Bytes x = rng.bytes(24);
        Bytes x1 = x;
        x1.push_back(0x01);
        Digest h = raw::sha256(x);
        Digest h1 = raw::sha256(x1);
        CHECK(h != h1);
        outputs.insert(h.bytes);
    }
    CHECK(outputs.size() == 1000);
}

TEST_CASE("mac determinism and key separation") {
    Rng rng(12);
    CryptoCtx ctx;
    SymKey k = random_key(rng);
    Bytes m = str("message");
    CHECK(ctx.mac(k, m) == ctx.mac(k, m));
    CHECK(ctx.counters().hash == 2);

    std::set<Block32> tags;
    for (int i = 0; i < 1000; ++i) {
        SymKey k1 = random_key(rng);
        SymKey k2 = random_key(rng);
        MacTag t1 = raw::mac(k1, m);
        MacTag t2 = raw::mac(k2, m);
        CHECK(t1 != t2);
        tags.insert(t1.bytes);
        tags.insert(t2.bytes);
    }
    CHECK(tags.size() == 2000);
}

TEST_CASE("mac verification rejects wrong keys across random messages") {
    Rng rng(13);
    int rejected = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        SymKey k = random_key(rng);
        SymKey wrong = random_key(rng);
        Bytes m = rng.bytes(1 + rng.below(40));
        MacTag real = raw::mac(k, m);
        if (raw::mac(wrong, m) != real) ++rejected;
    }
    CHECK(rejected == trials);
}

TEST_CASE("encrypt produces one 256-bit block and is deterministic") {
    Rng rng(14);
    CryptoCtx ctx;
    SymKey k = random_key(rng);
    Bytes m = str("hello");
    Block32 c1 = ctx.encrypt(k, m);
    Block32 c2 = ctx.encrypt(k, m);
    CHECK(c1.size() == 32);
    CHECK(c1 == c2);
    CHECK(ctx.counters().enc == 2);
}

TEST_CASE("decrypt inverts encrypt") {
    Rng rng(15);
    CryptoCtx ctx;

    SUBCASE("full-block plaintext round-trips exactly") {
        for (int i = 0; i < 200; ++i) {
            SymKey k = random_key(rng);
            Block32 m = rng.block32();
            Block32 back = ctx.decrypt(k, ctx.encrypt(k, m));
            CHECK(back == m);
        }
    }

    SUBCASE("short plaintext comes back zero-padded to the block") {
        SymKey k = random_key(rng);
        Bytes m = str("short");
        Block32 back = ctx.decrypt(k, ctx.encrypt(k, m));
        for (size_t i = 0; i < m.size(); ++i) CHECK(back[i] == m[i]);
        for (size_t i = m.size(); i < 32; ++i) CHECK(back[i] == 0);
    }

    SUBCASE("wrong key never recovers the plaintext") {
        int mismatches = 0;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i) {
            SymKey k = random_key(rng);
            SymKey wrong = random_key(rng);
            Block32 m = rng.block32();
            Block32 c = raw::encrypt(k, m);
            if (raw::decrypt(wrong, c) != m) ++mismatches;
        }
        CHECK(mismatches == trials);
    }
}

TEST_CASE("encrypt and decrypt enforce block bounds") {
    Rng rng(16);
    CryptoCtx ctx;
    SymKey k = random_key(rng);
    CHECK_THROWS_AS((void)ctx.encrypt(k, Bytes(33, 0)), OversizedPlaintext);
    CHECK_THROWS_AS((void)ctx.decrypt(k, Bytes(31, 0)), MalformedCiphertext);
    CHECK_THROWS_AS((void)ctx.decrypt(k, Bytes(33, 0)), MalformedCiphertext);
}

TEST_CASE("session key derivation") {
    Rng rng(17);
    CryptoCtx ctx;
    SymKey k = random_key(rng);

    SymKey d1 = ctx.derive_session_key(k, Nonce{7});
    SymKey d2 = ctx.derive_session_key(k, Nonce{7});
    CHECK(d1 == d2);
    CHECK(d1.kind == KeyKind::Derived);
    CHECK(ctx.counters().enc == 2);  // derivation is tallied as Enc

    // all 16 nonce values give distinct keys
    std::set<Block32> keys;
    for (std::uint8_t n = 0; n < 16; ++n) keys.insert(raw::derive_session_key(k, Nonce{n}).bytes);
    CHECK(keys.size() == 16);

    SymKey pre = random_key(rng, KeyKind::Preshared);
    CHECK(raw::derive_session_key(pre, Nonce{3}).bytes.size() == 32);
}

TEST_CASE("chain_fold matches the per-link oracle and counts one H") {
    Rng rng(18);
    CryptoCtx ctx;
    Digest h0{rng.block32()};
    std::vector<std::uint8_t> ids{10, 11, 12, 13};
    Digest lib = ctx.chain_fold(h0, ids);
    CHECK(lib == oracle::chain_fold(h0, ids));
    CHECK(ctx.counters().hash == 1);  // one evaluation event, four links
}

TEST_CASE("counter conservation") {
    Rng rng(19);
    CryptoCtx ctx;
    SymKey k = random_key(rng);
    Block32 m = rng.block32();

    for (int i = 0; i < 5; ++i) (void)ctx.encrypt(k, m);
    for (int i = 0; i < 3; ++i) (void)ctx.decrypt(k, m);
    for (int i = 0; i < 7; ++i) (void)ctx.mac(k, m);
    for (int i = 0; i < 2; ++i) (void)ctx.hash(m);
    (void)ctx.derive_session_key(k, Nonce{1});

    CHECK(ctx.counters().enc == 6);   // 5 encrypts + 1 derivation
    CHECK(ctx.counters().dec == 3);
    CHECK(ctx.counters().hash == 9);  // 7 macs + 2 hashes

    ctx.reset_counters();
    CHECK(ctx.counters() == OpCounters{});
}

TEST_CASE("hex helpers") {
    Bytes b{0x00, 0x0f, 0xa5, 0xff};
    CHECK(to_hex(b) == "000fa5ff");
    CHECK(from_hex("000fa5ff") == b);
    CHECK(from_hex("") == Bytes{});
    CHECK_THROWS_AS(from_hex("abc"), std::invalid_argument);
    CHECK_THROWS_AS(from_hex("zz"), std::invalid_argument);
}
