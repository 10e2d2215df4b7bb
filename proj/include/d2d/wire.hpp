#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "d2d/crypto.hpp"
#include "d2d/errors.hpp"
#include "d2d/tesla.hpp"

namespace d2d::wire {

// Wire codes carried in the leading 4-bit field.
enum class MsgType : std::uint8_t {
    Request = 0x1,
    Reply = 0x2,
    RelayedRequest = 0x3,
    RelayedReply = 0x4,
    Disclosure = 0x5,  // scheduled TESLA key release; not part of the size model
};

/// Source request. Header fields are 4 bits except the two 8-bit identities;
/// ciphertext and MAC are one 256-bit block each. 544 bits total.
struct RequestPacket {
    NodeId src = 0;
    NodeId dst = 0;
    crypto::Nonce nonce;       // 4 bits
    std::uint8_t pkt_id = 0;   // 4 bits
    std::uint8_t t = 0;        // 4 bits, slot tag mod 16
    crypto::Block32 ciphertext{};
    crypto::MacTag h0;
    auto operator<=>(const RequestPacket&) const = default;
};

struct HopMac {
    NodeId relay = 0;
    crypto::MacTag mac;
    auto operator<=>(const HopMac&) const = default;
};

/// Request after one or more relays: the untouched base plus one
/// (identity, MAC) entry per hop in traversal order. Grows 264 bits per hop.
/// The hash-chain accumulator does not travel; verifiers refold it from h0
/// and the hop identities.
struct RelayedRequestPacket {
    RequestPacket base;
    std::vector<HopMac> hops;
    auto operator<=>(const RelayedRequestPacket&) const = default;
};

/// Destination reply: 28 header bits plus the 256-bit MAC = 284 bits.
struct ReplyPacket {
    NodeId dst = 0;  // the replying destination
    NodeId src = 0;  // the original requester
    std::uint8_t t = 0;
    std::uint8_t pkt_id = 0;
    crypto::MacTag reply_mac;
    auto operator<=>(const ReplyPacket&) const = default;
};

struct DisclosedKeyEntry {
    NodeId owner = 0;
    crypto::SymKey key;  // kind Tesla
    auto operator<=>(const DisclosedKeyEntry&) const = default;
};

/// Reply with the per-hop TESLA keys appended on the way back, reverse-path
/// order (the relay nearest the destination first).
struct RelayedReplyPacket {
    ReplyPacket base;
    std::vector<DisclosedKeyEntry> disclosed_keys;
    auto operator<=>(const RelayedReplyPacket&) const = default;
};

/// Standalone key release at the scheduled disclosure slot.
struct DisclosurePacket {
    NodeId owner = 0;
    std::uint16_t interval = 0;
    crypto::SymKey key;
    auto operator<=>(const DisclosurePacket&) const = default;
};

using Packet = std::variant<RequestPacket, RelayedRequestPacket, ReplyPacket,
                            RelayedReplyPacket, DisclosurePacket>;

/// Big-endian bit packing, zero-padded to a whole byte. Throws FieldOverflow
/// if a field value exceeds its width.
Bytes encode(const Packet& packet);

/// Strict inverse of encode. Throws TruncatedPacket on short or misaligned
/// input and FieldOverflow on an unknown message code.
Packet decode(ByteView bytes);

MsgType type_of(const Packet& packet);
std::uint64_t encoded_bits(const Packet& packet);

// Canonical MAC inputs. These are pinned byte strings, independent of any
// particular in-memory representation.

/// Everything in the request ahead of h0: header fields plus ciphertext,
/// exactly 36 bytes.
Bytes request_mac_input(const RequestPacket& req);

/// A hop MAC covers the entire packet as received, then the relay's own
/// identity and its chain value: encode(prior) || relay_id || h_i.
Bytes hop_mac_input(const Packet& prior, NodeId relay, const crypto::Digest& h_i);

/// The 28 reply header bits packed into 4 bytes (tail nibble zero).
Bytes reply_mac_input(const ReplyPacket& rep);

// ---------------------------------------------------------------------------
// Analytical size model. Formulas are evaluated exactly as documented even
// where mutually inconsistent (the 286-bit direct-reply constant cannot be
// rebuilt from the field widths, which give 284); concrete_size_check
// quantifies each gap against real encodings.
// ---------------------------------------------------------------------------

enum class SizeRole {
    SourceDirect,
    SourceRelaying,
    DestinationDirect,
    DestinationRelaying,
    IntermediateRequest,
    IntermediateReply,
};

inline constexpr std::uint32_t kDefaultKeyBits = 256;

/// Packet size in bits for a role at node count n (n >= 2).
std::uint64_t model_size(SizeRole role, std::uint32_t n, std::uint32_t ks = kDefaultKeyBits);

const char* size_role_name(SizeRole role);

struct SizeObservation {
    SizeRole role;
    std::uint32_t n_eff;         // nodes the packet has touched: hops + 2
    std::uint64_t concrete_bits;
};

struct SizeDelta {
    SizeRole role;
    std::uint32_t n_eff;
    std::uint64_t model_bits;
    std::uint64_t concrete_bits;
    std::int64_t delta_bits;  // model - concrete
};

/// Per-observation deltas against the model. For any honest run the delta is
/// constant across n within a role; the known values are +4 on the relayed
/// request path (the model's 28-bit header accounting drops the time tag the
/// concrete header carries), -2 for the direct reply (286 vs 284), and 0 for
/// the fully relayed reply.
std::vector<SizeDelta> concrete_size_check(const std::vector<SizeObservation>& observations,
                                           std::uint32_t ks = kDefaultKeyBits);

}  // namespace d2d::wire
