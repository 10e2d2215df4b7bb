#pragma once

#include <cstdint>
#include <vector>

#include "d2d/crypto.hpp"
#include "d2d/errors.hpp"

namespace d2d {

using NodeId = std::uint8_t;   // 8-bit wire identity
using Slot = std::uint64_t;    // unwrapped simulator timeslot

namespace tesla {

/// One-way key chain. keys[i] = H(keys[i+1]); keys[0] is the public
/// commitment and is never used as a MAC key; keys[L] is the seed end.
struct TeslaChain {
    NodeId owner = 0;
    std::vector<crypto::SymKey> keys;  // length L+1, index 0..L
    Slot interval_len = 1;
    Slot start_slot = 0;

    std::uint32_t length() const { return static_cast<std::uint32_t>(keys.size() - 1); }
};

/// The bootstrap record every node holds for every other node before any run:
/// the chain root plus its interval schedule.
struct TeslaCommitment {
    NodeId owner = 0;
    crypto::SymKey key0;
    Slot start_slot = 0;
    Slot interval_len = 1;
    std::uint32_t chain_len = 0;  // L; receivers need it to spot exhaustion
};

/// Builds the chain backwards from a 32-byte seed: keys[L] is the seed
/// itself, each earlier key is the hash of its successor. Setup is offline
/// precomputation and deliberately bypasses the counted facade.
TeslaChain generate_chain(NodeId owner, const crypto::Block32& seed, std::uint32_t length,
                          Slot interval_len, Slot start_slot);

TeslaCommitment commitment_of(const TeslaChain& chain);

/// MAC key for interval i, 1 <= i <= L. Throws IntervalOutOfRange otherwise
/// (the commitment at index 0 is never a MAC key).
const crypto::SymKey& key_for_interval(const TeslaChain& chain, std::uint32_t i);

/// True iff hashing `disclosed` i times reproduces the commitment root.
bool verify_disclosed_key(const TeslaCommitment& commitment, const crypto::SymKey& disclosed,
                          std::uint32_t i);

/// First slot at which the interval-i key may leave its owner.
Slot disclosure_slot(const TeslaCommitment& commitment, std::uint32_t i,
                     std::uint32_t disclosure_delay = 1);

/// Interval in force at `now`, clamped to [1, L] for MAC use. Throws
/// ChainExhausted once the schedule runs past the chain end.
std::uint32_t current_interval(const TeslaCommitment& commitment, Slot now);

}  // namespace tesla
}  // namespace d2d
