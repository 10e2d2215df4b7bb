#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <utility>

#include "d2d/crypto.hpp"
#include "d2d/events.hpp"
#include "d2d/rng.hpp"
#include "d2d/tesla.hpp"
#include "d2d/wire.hpp"

namespace d2d::roles {

enum class Scenario : std::uint8_t { DD2D = 1, RD2D, DD2DW, RD2DW };

const char* scenario_name(Scenario s);
std::optional<Scenario> scenario_from_name(const std::string& name);
inline bool has_infrastructure(Scenario s) { return s == Scenario::DD2D || s == Scenario::RD2D; }
inline bool is_relayed(Scenario s) { return s == Scenario::RD2D || s == Scenario::RD2DW; }

/// Protocol-level rejections. These are ordinary outcomes, not exceptions.
enum class Reject : std::uint8_t {
    ReplayedId = 1,
    StaleTimestamp,
    BadSourceMac,
    BadRelayMac,
    BadHashChain,
    BadReplyMac,
    BadDisclosedKey,
    UnknownSubscriber,
    NotInProximity,
    NoPendingRequest,
    UnknownSession,      // a relay saw a reply for a request it never carried
    AwaitingDisclosure,  // verification parked until a TESLA key arrives
};

const char* reject_name(Reject r);

struct RejectInfo {
    Reject reason{};
    int index = -1;  // hop index for BadRelayMac, owner id for BadDisclosedKey
};

template <typename T>
class Expected {
public:
    Expected(T value) : value_(std::move(value)) {}
    Expected(RejectInfo reject) : reject_(reject) {}

    bool ok() const { return value_.has_value(); }
    const T& value() const { return *value_; }
    T& value() { return *value_; }
    const RejectInfo& reject() const { return *reject_; }

private:
    std::optional<T> value_;
    std::optional<RejectInfo> reject_;
};

struct Accepted {};  // marker payload for checks with no data to return

// ---------------------------------------------------------------------------
// Shared machinery
// ---------------------------------------------------------------------------

/// Recovers the send slot of a packet that has traversed `hop_count` relay
/// hops, or nullopt if it is stale. A packet carrying h hop entries has been
/// on the air h+1 slots, so the expected send slot is now-h-1; the window
/// tolerates up to W slots of unexplained extra age on top of that.
std::optional<Slot> freshness_unwrap(Slot now, std::uint8_t tag, size_t hop_count, Slot window);

/// (src, pkt_id) replay cache, FIFO-evicted at a fixed capacity. The 4-bit
/// id space wraps quickly; the horizon is a simulation parameter.
class ReplayCache {
public:
    explicit ReplayCache(size_t capacity = 1024) : capacity_(capacity) {}

    bool contains(NodeId src, std::uint8_t pkt_id) const {
        return seen_.count(key(src, pkt_id)) != 0;
    }

    void insert(NodeId src, std::uint8_t pkt_id);

private:
    static std::uint16_t key(NodeId src, std::uint8_t pkt_id) {
        return static_cast<std::uint16_t>((src << 4) | (pkt_id & 0x0f));
    }

    size_t capacity_;
    std::set<std::uint16_t> seen_;
    std::deque<std::uint16_t> order_;
};

using CommitmentStore = std::map<NodeId, tesla::TeslaCommitment>;

/// Disclosed TESLA keys already authenticated against their commitments,
/// indexed by (owner, interval).
struct VerifiedKeyStore {
    std::map<std::pair<NodeId, std::uint32_t>, crypto::SymKey> keys;

    const crypto::SymKey* find(NodeId owner, std::uint32_t interval) const {
        auto it = keys.find({owner, interval});
        return it == keys.end() ? nullptr : &it->second;
    }
};

/// Rebuilds the packet exactly as hop `index` received it (hop 0 sees the
/// plain request; later hops see the relayed form with the earlier entries).
wire::Packet packet_before_hop(const wire::RequestPacket& base,
                               const std::vector<wire::HopMac>& hops, size_t index);

/// Unit-delay schedule: hop k of a request sent at `sent_slot` processes it
/// at sent_slot + k + 1. Verifiers use this to infer which TESLA interval a
/// relay MACed under.
Slot hop_process_slot(Slot sent_slot, size_t hop_index);

// ---------------------------------------------------------------------------
// MME
// ---------------------------------------------------------------------------

struct MmeState {
    NodeId self = 0;
    std::set<NodeId> subscribers;
    std::set<std::pair<NodeId, NodeId>> proximity;  // stored both ways
    std::map<std::pair<NodeId, NodeId>, crypto::SymKey> pending;  // (src, dst) -> K

    // Fault-injection hook for the key-agreement checker's negative test:
    // issue the destination a key unrelated to the pending entry.
    bool hook_issue_distinct_keys = false;

    void add_proximity(NodeId a, NodeId b) {
        proximity.insert({a, b});
        proximity.insert({b, a});
    }
    bool in_proximity(NodeId a, NodeId b) const { return proximity.count({a, b}) != 0; }
};

/// Authenticates both identities, checks proximity, mints a fresh session
/// key and records the pending (src, dst) entry.
Expected<crypto::SymKey> mme_handle_source_request(MmeState& mme, Rng& rng, NodeId src,
                                                   NodeId dst, Slot now,
                                                   ProtocolEventLog& events);

/// Releases the pending key to the destination iff a matching source request
/// exists; the entry is consumed by the release.
Expected<crypto::SymKey> mme_handle_destination_request(MmeState& mme, NodeId dst, NodeId src,
                                                        Slot now, ProtocolEventLog& events);

// ---------------------------------------------------------------------------
// Source
// ---------------------------------------------------------------------------

enum class SourcePhase : std::uint8_t { Idle, AwaitingKey, SentRequest, GotReply, Failed };

struct SourceState {
    NodeId self = 0;
    NodeId dst = 0;
    Scenario scenario = Scenario::DD2D;
    std::optional<crypto::SymKey> session_key;  // K (session or preshared)
    crypto::Nonce nonce;                        // fresh per request
    std::uint8_t pkt_id = 0;                    // fresh per request, wraps at 16
    SourcePhase phase = SourcePhase::Idle;
    std::optional<tesla::TeslaChain> chain;     // own chain (used without infrastructure)

    // Kept for the retroactive checks once keys are disclosed.
    std::optional<wire::RequestPacket> sent_request;
    Slot sent_slot = 0;
    std::uint32_t h0_interval = 0;  // interval of the TESLA key behind h0
};

/// Builds the request: K' from (K, nonce), one encrypted block, and h0 over
/// every header field plus the ciphertext. The MAC key is K when the network
/// issued one and the source's own TESLA interval key otherwise. Advances
/// nonce and pkt_id so back-to-back requests never repeat them.
wire::RequestPacket source_build_request(SourceState& st, crypto::CryptoCtx& ctx,
                                         ByteView message, Slot now,
                                         ProtocolEventLog& events);

/// Terminal acceptance. Checks the reply MAC (sealed with K in relayed
/// infrastructure runs, plain otherwise), authenticates every appended
/// TESLA key against its commitment, and replays the stored request-path
/// MACs under those keys. Runs on the raw primitives: the cost convention
/// scopes the counters to the steps of the message path itself, and this
/// step sits past the protocol's last transmission.
Expected<Accepted> source_verify_reply(SourceState& st, const wire::Packet& reply,
                                       const CommitmentStore& commitments,
                                       const VerifiedKeyStore& flood_keys, Slot now,
                                       ProtocolEventLog& events);

// ---------------------------------------------------------------------------
// Relay
// ---------------------------------------------------------------------------

struct RelaySession {
    std::uint32_t interval_used = 0;
    bool reply_forwarded = false;
};

struct RelayState {
    NodeId self = 0;
    tesla::TeslaChain chain;
    ReplayCache seen;
    Slot freshness_window = 2;
    std::map<std::uint16_t, RelaySession> sessions;  // (src<<4|pkt_id) -> session
};

/// Forwards a request: id and time checks, then extends the hash chain with
/// its identity and MACs everything received plus that extension under its
/// current TESLA interval key. Relays never hold K or K'.
Expected<wire::RelayedRequestPacket> relay_process_request(RelayState& st,
                                                           crypto::CryptoCtx& ctx,
                                                           const wire::Packet& pkt, Slot now,
                                                           ProtocolEventLog& events);

/// Forwards a reply for a session it carried, appending the TESLA key it
/// MACed with. Throws DisclosureTooEarly if the schedule has not released
/// that key yet — the honest path can never hit this.
Expected<wire::RelayedReplyPacket> relay_process_reply(RelayState& st, const wire::Packet& pkt,
                                                       Slot now);

// ---------------------------------------------------------------------------
// Destination
// ---------------------------------------------------------------------------

enum class DestinationPhase : std::uint8_t { Idle, AwaitingKey, Replied, Done, Failed };

/// A request parked while keys are outstanding (the session key in
/// infrastructure runs, disclosed TESLA keys otherwise).
struct PendingRequest {
    wire::RequestPacket base;
    std::vector<wire::HopMac> hops;
    Slot received_slot = 0;
    Slot sent_slot = 0;  // unwrapped from the time tag

    std::vector<crypto::Digest> chain_values;  // h_1..h_r, filled when folded
    bool chain_folded = false;
    bool h0_checked = false;
    std::set<size_t> hops_verified;
    bool replied = false;
    std::uint32_t reply_interval = 0;  // TESLA interval of the reply MAC key
    crypto::Block32 plaintext{};
    bool decrypted = false;
    bool failed = false;
    bool term_emitted = false;
};

struct DestinationState {
    NodeId self = 0;
    Scenario scenario = Scenario::DD2D;
    ReplayCache seen;
    Slot freshness_window = 2;
    std::optional<crypto::SymKey> session_key;
    std::optional<tesla::TeslaChain> chain;
    DestinationPhase phase = DestinationPhase::Idle;
    std::deque<PendingRequest> pending;
    size_t pending_capacity = 64;  // drop-oldest beyond this

    // Test hook: skip the (src, pkt_id) replay gate so a replayed request is
    // accepted twice. Exists to show the injective correspondence check
    // actually bites.
    bool hook_disable_replay_protection = false;
};

struct DestinationOutcome {
    wire::ReplyPacket reply;
    crypto::Block32 plaintext{};
};

/// Admission: replay and freshness gates, then buffering. Drop-oldest once
/// the buffer is full.
Expected<PendingRequest*> destination_admit(DestinationState& st, const wire::Packet& pkt,
                                            Slot now);

/// Recomputes h0 under `mac_key` and compares. Counted: this is the
/// receiver-side validation step of the message path.
bool destination_check_h0(crypto::CryptoCtx& ctx, PendingRequest& req,
                          const crypto::SymKey& mac_key);

/// One chain evaluation over the hop identities, caching h_1..h_r.
void destination_fold_chain(crypto::CryptoCtx& ctx, PendingRequest& req);

/// Replays hop MACs under disclosed keys (raw path; deferred TESLA work).
/// Keys may dribble in across slots: hops without a key yet are left for a
/// later call, already-verified hops are skipped.
Expected<Accepted> destination_verify_hops(PendingRequest& req,
                                           const CommitmentStore& commitments,
                                           const VerifiedKeyStore& flood_keys);

/// K' derivation, block decryption, and the reply build. The reply MAC key
/// is K with infrastructure (sealed with a second pass in the relayed case)
/// and the destination's TESLA interval key without.
DestinationOutcome destination_build_reply(DestinationState& st, crypto::CryptoCtx& ctx,
                                           PendingRequest& req, const crypto::SymKey& k,
                                           Slot now, ProtocolEventLog& events);

/// The whole receive-side pipeline in one call, for callers that already
/// hold every key: admit, fold, h0 check, hop verification, decrypt, reply.
/// With an empty disclosed-key store the hop MACs are deferred, matching the
/// staged flow the simulator drives.
Expected<DestinationOutcome> destination_validate_and_reply(
    DestinationState& st, crypto::CryptoCtx& ctx, const wire::Packet& pkt,
    const crypto::SymKey& k, const std::vector<wire::DisclosedKeyEntry>& disclosed,
    const CommitmentStore& commitments, Slot now, ProtocolEventLog& events);

}  // namespace d2d::roles
