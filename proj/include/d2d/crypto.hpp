#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "d2d/bytes.hpp"
#include "d2d/errors.hpp"

namespace d2d::crypto {

inline constexpr size_t kBlockBytes = 32;  // every primitive output is 256 bits

using Block32 = std::array<std::uint8_t, kBlockBytes>;

/// 256-bit hash output.
struct Digest {
    Block32 bytes{};
    auto operator<=>(const Digest&) const = default;
};

enum class KeyKind : std::uint8_t {
    Session,    // K issued by the MME
    Derived,    // K' built from K and a nonce
    Tesla,      // interval key from a one-way chain
    Preshared,  // out-of-band key for infrastructure-less runs
};

/// 256-bit symmetric key. The kind tag is bookkeeping only; it never reaches
/// the wire.
struct SymKey {
    Block32 bytes{};
    KeyKind kind = KeyKind::Session;
    auto operator<=>(const SymKey&) const = default;
};

struct MacTag {
    Block32 bytes{};
    auto operator<=>(const MacTag&) const = default;
};

/// 4-bit wire nonce.
struct Nonce {
    std::uint8_t value = 0;  // < 16
    auto operator<=>(const Nonce&) const = default;
};

/// Per-run operation tally. MAC evaluations land in `hash` — the cost model
/// has only Enc/Dec/H categories.
struct OpCounters {
    std::uint64_t enc = 0;
    std::uint64_t dec = 0;
    std::uint64_t hash = 0;

    void reset() { *this = OpCounters{}; }
    auto operator<=>(const OpCounters&) const = default;
};

// ---------------------------------------------------------------------------
// Raw primitives. Self-contained SHA-256 plus the constructions layered on
// it; no counting. The instrumented facade below is the protocol-facing
// entry point — raw calls are for offline work (TESLA chain setup, disclosed
// key authentication, deferred re-verification, attacker closure, oracles).
// ---------------------------------------------------------------------------
namespace raw {

Digest sha256(ByteView data);

/// Prefix-key MAC: tag = SHA256(key || message). Keys are fixed-width 32-byte
/// blocks so the prefix construction is unambiguous here.
MacTag mac(const SymKey& key, ByteView data);

/// Deterministic single-block cipher: keystream = SHA256(key || 0x01 pad tag),
/// ciphertext = keystream XOR zero-padded plaintext. Output is always one
/// 256-bit block; plaintexts shorter than a block decrypt back zero-padded.
Block32 encrypt(const SymKey& key, ByteView plaintext);
Block32 decrypt(const SymKey& key, ByteView ciphertext);

/// K' = SHA256(K || nonce-as-one-byte).
SymKey derive_session_key(const SymKey& k, Nonce n);

/// Hash-chain accumulator: h_i = SHA256(h_{i-1} || id_i) folded over `ids`.
Digest chain_fold(const Digest& h0, ByteView ids);

}  // namespace raw

// ---------------------------------------------------------------------------
// Instrumented facade. One context per simulation run; owns the counters.
// ---------------------------------------------------------------------------
class CryptoCtx {
public:
    Digest hash(ByteView data) {
        ++counters_.hash;
        return raw::sha256(data);
    }

    /// Counted as one hash evaluation (cost-model convention).
    MacTag mac(const SymKey& key, ByteView data) {
        ++counters_.hash;
        return raw::mac(key, data);
    }

    /// Throws OversizedPlaintext beyond one block.
    Block32 encrypt(const SymKey& key, ByteView plaintext) {
        if (plaintext.size() > kBlockBytes)
            throw OversizedPlaintext("encrypt: plaintext exceeds 32 bytes");
        ++counters_.enc;
        return raw::encrypt(key, plaintext);
    }

    /// Throws MalformedCiphertext unless the input is exactly one block.
    Block32 decrypt(const SymKey& key, ByteView ciphertext) {
        if (ciphertext.size() != kBlockBytes)
            throw MalformedCiphertext("decrypt: ciphertext must be 32 bytes");
        ++counters_.dec;
        return raw::decrypt(key, ciphertext);
    }

    /// Key derivation is tallied as an encryption (cost-model convention:
    /// the symmetric-op count covers the message cipher and the key build).
    SymKey derive_session_key(const SymKey& k, Nonce n) {
        ++counters_.enc;
        return raw::derive_session_key(k, n);
    }

    /// One hash-chain evaluation event. Counts a single H regardless of how
    /// many links the fold walks, mirroring how the cost model charges chain
    /// evaluation per event rather than per link.
    Digest chain_fold(const Digest& h0, ByteView ids) {
        ++counters_.hash;
        return raw::chain_fold(h0, ids);
    }

    const OpCounters& counters() const { return counters_; }
    void reset_counters() { counters_.reset(); }

private:
    OpCounters counters_;
};

}  // namespace d2d::crypto
