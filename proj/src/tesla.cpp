#include "d2d/tesla.hpp"

namespace d2d::tesla {

TeslaChain generate_chain(NodeId owner, const crypto::Block32& seed, std::uint32_t length,
                          Slot interval_len, Slot start_slot) {
    if (length == 0) throw InvalidLength("generate_chain: chain length must be >= 1");
    if (interval_len == 0) throw InvalidLength("generate_chain: interval_len must be >= 1");

    TeslaChain chain;
    chain.owner = owner;
    chain.interval_len = interval_len;
    chain.start_slot = start_slot;
    chain.keys.resize(length + 1);
    chain.keys[length] = crypto::SymKey{seed, crypto::KeyKind::Tesla};
    for (std::uint32_t i = length; i > 0; --i) {
        chain.keys[i - 1] = crypto::SymKey{crypto::raw::sha256(chain.keys[i].bytes).bytes,
                                           crypto::KeyKind::Tesla};
    }
    return chain;
}

TeslaCommitment commitment_of(const TeslaChain& chain) {
    return TeslaCommitment{chain.owner, chain.keys[0], chain.start_slot, chain.interval_len,
                           chain.length()};
}

const crypto::SymKey& key_for_interval(const TeslaChain& chain, std::uint32_t i) {
    if (i < 1 || i > chain.length())
        throw IntervalOutOfRange("key_for_interval: index outside [1, L]");
    return chain.keys[i];
}

bool verify_disclosed_key(const TeslaCommitment& commitment, const crypto::SymKey& disclosed,
                          std::uint32_t i) {
    if (i < 1 || i > commitment.chain_len) return false;
    crypto::Block32 cur = disclosed.bytes;
    for (std::uint32_t step = 0; step < i; ++step) cur = crypto::raw::sha256(cur).bytes;
    return cur == commitment.key0.bytes;
}

Slot disclosure_slot(const TeslaCommitment& commitment, std::uint32_t i,
                     std::uint32_t disclosure_delay) {
    return commitment.start_slot + (Slot{i} + disclosure_delay) * commitment.interval_len;
}

std::uint32_t current_interval(const TeslaCommitment& commitment, Slot now) {
    if (now < commitment.start_slot)
        throw IntervalOutOfRange("current_interval: before chain start");
    Slot idx = (now - commitment.start_slot) / commitment.interval_len;
    if (idx < 1) idx = 1;  // interval 0 holds the commitment, never a MAC key
    if (idx > commitment.chain_len)
        throw ChainExhausted("current_interval: chain has no key for this slot");
    return static_cast<std::uint32_t>(idx);
}

}  // namespace d2d::tesla
