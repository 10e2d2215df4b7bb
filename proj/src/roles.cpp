#include "d2d/roles.hpp"

#include <algorithm>
#include <cstring>

namespace d2d::roles {

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::DD2D: return "DD2D";
        case Scenario::RD2D: return "RD2D";
        case Scenario::DD2DW: return "DD2DW";
        case Scenario::RD2DW: return "RD2DW";
    }
    return "?";
}

std::optional<Scenario> scenario_from_name(const std::string& name) {
    if (name == "DD2D") return Scenario::DD2D;
    if (name == "RD2D") return Scenario::RD2D;
    if (name == "DD2DW") return Scenario::DD2DW;
    if (name == "RD2DW") return Scenario::RD2DW;
    return std::nullopt;
}

const char* reject_name(Reject r) {
    switch (r) {
        case Reject::ReplayedId: return "ReplayedId";
        case Reject::StaleTimestamp: return "StaleTimestamp";
        case Reject::BadSourceMac: return "BadSourceMac";
        case Reject::BadRelayMac: return "BadRelayMac";
        case Reject::BadHashChain: return "BadHashChain";
        case Reject::BadReplyMac: return "BadReplyMac";
        case Reject::BadDisclosedKey: return "BadDisclosedKey";
        case Reject::UnknownSubscriber: return "UnknownSubscriber";
        case Reject::NotInProximity: return "NotInProximity";
        case Reject::NoPendingRequest: return "NoPendingRequest";
        case Reject::UnknownSession: return "UnknownSession";
        case Reject::AwaitingDisclosure: return "AwaitingDisclosure";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Shared machinery
// ---------------------------------------------------------------------------

std::optional<Slot> freshness_unwrap(Slot now, std::uint8_t tag, size_t hop_count, Slot window) {
    if (now < hop_count + 1) return std::nullopt;
    Slot expected = now - hop_count - 1;  // unit propagation delay per hop
    for (Slot d = 0; d <= window && d <= expected; ++d) {
        Slot candidate = expected - d;
        if (candidate % 16 == (tag & 0x0f)) return candidate;
    }
    return std::nullopt;
}

void ReplayCache::insert(NodeId src, std::uint8_t pkt_id) {
    std::uint16_t k = key(src, pkt_id);
    if (!seen_.insert(k).second) return;
    order_.push_back(k);
    while (order_.size() > capacity_) {
        seen_.erase(order_.front());
        order_.pop_front();
    }
}

wire::Packet packet_before_hop(const wire::RequestPacket& base,
                               const std::vector<wire::HopMac>& hops, size_t index) {
    if (index == 0) return base;
    wire::RelayedRequestPacket p;
    p.base = base;
    p.hops.assign(hops.begin(), hops.begin() + static_cast<std::ptrdiff_t>(index));
    return p;
}

Slot hop_process_slot(Slot sent_slot, size_t hop_index) { return sent_slot + hop_index + 1; }

namespace {

std::uint16_t session_key_of(NodeId src, std::uint8_t pkt_id) {
    return static_cast<std::uint16_t>((src << 4) | (pkt_id & 0x0f));
}

struct RequestView {
    const wire::RequestPacket* base = nullptr;
    const std::vector<wire::HopMac>* hops = nullptr;
    bool relayed = false;
};

const std::vector<wire::HopMac>& no_hops() {
    static const std::vector<wire::HopMac> empty;
    return empty;
}

RequestView request_view(const wire::Packet& pkt) {
    if (const auto* plain = std::get_if<wire::RequestPacket>(&pkt))
        return {plain, &no_hops(), false};
    if (const auto* relayed = std::get_if<wire::RelayedRequestPacket>(&pkt))
        return {&relayed->base, &relayed->hops, true};
    throw Error("expected a request packet");
}

struct ReplyView {
    const wire::ReplyPacket* base = nullptr;
    const std::vector<wire::DisclosedKeyEntry>* keys = nullptr;
};

const std::vector<wire::DisclosedKeyEntry>& no_keys() {
    static const std::vector<wire::DisclosedKeyEntry> empty;
    return empty;
}

ReplyView reply_view(const wire::Packet& pkt) {
    if (const auto* plain = std::get_if<wire::ReplyPacket>(&pkt)) return {plain, &no_keys()};
    if (const auto* relayed = std::get_if<wire::RelayedReplyPacket>(&pkt))
        return {&relayed->base, &relayed->disclosed_keys};
    throw Error("expected a reply packet");
}

Bytes key_bytes(const crypto::SymKey& k) { return Bytes(k.bytes.begin(), k.bytes.end()); }

}  // namespace

// ---------------------------------------------------------------------------
// MME
// ---------------------------------------------------------------------------

Expected<crypto::SymKey> mme_handle_source_request(MmeState& mme, Rng& rng, NodeId src,
                                                   NodeId dst, Slot now,
                                                   ProtocolEventLog& events) {
    if (!mme.subscribers.count(src) || !mme.subscribers.count(dst))
        return RejectInfo{Reject::UnknownSubscriber};
    if (!mme.in_proximity(src, dst)) return RejectInfo{Reject::NotInProximity};

    crypto::SymKey k{rng.block32(), crypto::KeyKind::Session};
    mme.pending[{src, dst}] = k;
    events.push_back({PEventKind::MmeRunning, now, mme.self, 0, RoleTag::Mme, key_bytes(k)});
    return k;
}

Expected<crypto::SymKey> mme_handle_destination_request(MmeState& mme, NodeId dst, NodeId src,
                                                        Slot now, ProtocolEventLog& events) {
    if (!mme.subscribers.count(dst)) return RejectInfo{Reject::UnknownSubscriber};
    auto it = mme.pending.find({src, dst});
    if (it == mme.pending.end()) return RejectInfo{Reject::NoPendingRequest};

    crypto::SymKey k = it->second;
    mme.pending.erase(it);  // the entry is consumed by the release
    if (mme.hook_issue_distinct_keys) {
        for (auto& b : k.bytes) b ^= 0xff;  // deliberately unrelated key
    }
    events.push_back({PEventKind::MmeCommit, now, mme.self, 0, RoleTag::Mme, key_bytes(k)});
    events.push_back({PEventKind::Reachable, now, mme.self, 0, RoleTag::Mme, {}});
    return k;
}

// ---------------------------------------------------------------------------
// Source
// ---------------------------------------------------------------------------

wire::RequestPacket source_build_request(SourceState& st, crypto::CryptoCtx& ctx,
                                         ByteView message, Slot now,
                                         ProtocolEventLog& events) {
    if (!st.session_key) throw NoSessionKey("source_build_request: no key installed");

    wire::RequestPacket pkt;
    pkt.src = st.self;
    pkt.dst = st.dst;
    pkt.nonce = st.nonce;
    pkt.pkt_id = st.pkt_id;
    pkt.t = static_cast<std::uint8_t>(now % 16);

    crypto::SymKey derived = ctx.derive_session_key(*st.session_key, pkt.nonce);
    pkt.ciphertext = ctx.encrypt(derived, message);

    if (has_infrastructure(st.scenario)) {
        pkt.h0 = ctx.mac(*st.session_key, wire::request_mac_input(pkt));
        st.h0_interval = 0;
    } else {
        if (!st.chain) throw NoSessionKey("source_build_request: no TESLA chain installed");
        auto commitment = tesla::commitment_of(*st.chain);
        std::uint32_t interval = tesla::current_interval(commitment, now);
        pkt.h0 = ctx.mac(tesla::key_for_interval(*st.chain, interval),
                         wire::request_mac_input(pkt));
        st.h0_interval = interval;
    }

    events.push_back(
        {PEventKind::SourceRunning, now, st.self, 0, RoleTag::Source, key_bytes(*st.session_key)});

    st.sent_request = pkt;
    st.sent_slot = now;
    st.phase = SourcePhase::SentRequest;
    // Neither the id nor the nonce may repeat across back-to-back requests.
    st.pkt_id = static_cast<std::uint8_t>((st.pkt_id + 1) & 0x0f);
    st.nonce.value = static_cast<std::uint8_t>((st.nonce.value + 1) & 0x0f);
    return pkt;
}

Expected<Accepted> source_verify_reply(SourceState& st, const wire::Packet& reply,
                                       const CommitmentStore& commitments,
                                       const VerifiedKeyStore& flood_keys, Slot now,
                                       ProtocolEventLog& events) {
    if (!st.sent_request) throw Error("source_verify_reply: no request outstanding");
    ReplyView view = reply_view(reply);
    const wire::ReplyPacket& base = *view.base;

    if (base.src != st.self || base.dst != st.dst ||
        base.pkt_id != st.sent_request->pkt_id)
        return RejectInfo{Reject::UnknownSession};
    bool relayed_form = std::holds_alternative<wire::RelayedReplyPacket>(reply);
    if (relayed_form != is_relayed(st.scenario)) {
        st.phase = SourcePhase::Failed;
        return RejectInfo{Reject::BadHashChain};
    }

    // Reply MAC. Everything here runs on the raw primitives: the counters
    // cover the message path through the destination's reply; this terminal
    // acceptance check is out of the cost model's scope.
    crypto::MacTag expected;
    if (has_infrastructure(st.scenario)) {
        crypto::MacTag inner = crypto::raw::mac(*st.session_key, wire::reply_mac_input(base));
        expected = (st.scenario == Scenario::RD2D)
                       ? crypto::raw::mac(*st.session_key, inner.bytes)  // sealed pass
                       : inner;
    } else {
        auto it = commitments.find(base.dst);
        if (it == commitments.end()) return RejectInfo{Reject::BadDisclosedKey, base.dst};
        // The destination answers the moment the request lands, so the reply
        // slot follows from our own send slot and the path length; the tag
        // must agree with it (a small slack covers scheduling wobble).
        Slot expected_slot = st.sent_slot + view.keys->size() + 1;
        std::optional<Slot> reply_slot;
        for (Slot d = 0; d <= 2; ++d) {
            if ((expected_slot + d) % 16 == (base.t & 0x0f)) {
                reply_slot = expected_slot + d;
                break;
            }
        }
        if (!reply_slot) {
            st.phase = SourcePhase::Failed;
            return RejectInfo{Reject::BadReplyMac};
        }
        std::uint32_t interval = tesla::current_interval(it->second, *reply_slot);
        const crypto::SymKey* dest_key = flood_keys.find(base.dst, interval);
        if (!dest_key) return RejectInfo{Reject::AwaitingDisclosure};
        expected = crypto::raw::mac(*dest_key, wire::reply_mac_input(base));
    }
    if (expected != base.reply_mac) {
        st.phase = SourcePhase::Failed;
        return RejectInfo{Reject::BadReplyMac};
    }

    // Keys appended on the way back arrive in reverse-path order; entry j
    // belongs to request hop (r-1-j). Each must authenticate against its
    // owner's commitment at the interval that hop MACed under.
    const auto& entries = *view.keys;
    size_t hop_count = entries.size();
    for (size_t j = 0; j < hop_count; ++j) {
        size_t hop_index = hop_count - 1 - j;
        const auto& entry = entries[j];
        auto it = commitments.find(entry.owner);
        if (it == commitments.end()) {
            st.phase = SourcePhase::Failed;
            return RejectInfo{Reject::BadDisclosedKey, entry.owner};
        }
        std::uint32_t interval =
            tesla::current_interval(it->second, hop_process_slot(st.sent_slot, hop_index));
        if (!tesla::verify_disclosed_key(it->second, entry.key, interval)) {
            st.phase = SourcePhase::Failed;
            return RejectInfo{Reject::BadDisclosedKey, entry.owner};
        }
        events.push_back({PEventKind::AcceptsServerClient, now, st.self, entry.owner,
                          RoleTag::Relay, key_bytes(entry.key)});
    }

    events.push_back({PEventKind::AcceptsServerDestination, now, st.self, base.dst,
                      RoleTag::Destination, key_bytes(*st.session_key)});
    events.push_back(
        {PEventKind::SourceCommit, now, st.self, 0, RoleTag::Source, key_bytes(*st.session_key)});
    events.push_back({PEventKind::Reachable, now, st.self, 0, RoleTag::Source, {}});
    st.phase = SourcePhase::GotReply;
    return Accepted{};
}

// ---------------------------------------------------------------------------
// Relay
// ---------------------------------------------------------------------------

Expected<wire::RelayedRequestPacket> relay_process_request(RelayState& st,
                                                           crypto::CryptoCtx& ctx,
                                                           const wire::Packet& pkt, Slot now,
                                                           ProtocolEventLog& events) {
    RequestView view = request_view(pkt);
    const wire::RequestPacket& base = *view.base;

    if (st.seen.contains(base.src, base.pkt_id)) return RejectInfo{Reject::ReplayedId};
    if (!freshness_unwrap(now, base.t, view.hops->size(), st.freshness_window))
        return RejectInfo{Reject::StaleTimestamp};
    st.seen.insert(base.src, base.pkt_id);

    auto commitment = tesla::commitment_of(st.chain);
    std::uint32_t interval = tesla::current_interval(commitment, now);
    const crypto::SymKey& mac_key = tesla::key_for_interval(st.chain, interval);

    // Extend the accumulator with our identity, then MAC everything received
    // plus the extension.
    Bytes ids;
    for (const auto& hop : *view.hops) ids.push_back(hop.relay);
    ids.push_back(st.self);
    crypto::Digest h_i = ctx.chain_fold(crypto::Digest{base.h0.bytes}, ids);
    crypto::MacTag hop_mac = ctx.mac(mac_key, wire::hop_mac_input(pkt, st.self, h_i));

    wire::RelayedRequestPacket out;
    out.base = base;
    out.hops = *view.hops;
    out.hops.push_back({st.self, hop_mac});

    st.sessions[session_key_of(base.src, base.pkt_id)] = RelaySession{interval, false};
    events.push_back(
        {PEventKind::ClientRunning, now, st.self, st.self, RoleTag::Relay, key_bytes(mac_key)});
    events.push_back({PEventKind::Reachable, now, st.self, 0, RoleTag::Relay, {}});
    return out;
}

Expected<wire::RelayedReplyPacket> relay_process_reply(RelayState& st, const wire::Packet& pkt,
                                                       Slot now) {
    ReplyView view = reply_view(pkt);
    const wire::ReplyPacket& base = *view.base;

    auto it = st.sessions.find(session_key_of(base.src, base.pkt_id));
    if (it == st.sessions.end()) return RejectInfo{Reject::UnknownSession};
    if (it->second.reply_forwarded) return RejectInfo{Reject::ReplayedId};

    std::uint32_t interval = it->second.interval_used;
    auto commitment = tesla::commitment_of(st.chain);
    if (now < tesla::disclosure_slot(commitment, interval))
        throw DisclosureTooEarly("relay_process_reply: interval key still sealed");

    wire::RelayedReplyPacket out;
    out.base = base;
    out.disclosed_keys = *view.keys;
    out.disclosed_keys.push_back({st.self, tesla::key_for_interval(st.chain, interval)});
    it->second.reply_forwarded = true;
    return out;
}

// ---------------------------------------------------------------------------
// Destination
// ---------------------------------------------------------------------------

Expected<PendingRequest*> destination_admit(DestinationState& st, const wire::Packet& pkt,
                                            Slot now) {
    RequestView view = request_view(pkt);
    const wire::RequestPacket& base = *view.base;

    // A relayed-form packet in a direct scenario (or the reverse) can only
    // be a forgery; the chain structure does not fit the protocol.
    if (view.relayed != is_relayed(st.scenario)) return RejectInfo{Reject::BadHashChain};
    if (!st.hook_disable_replay_protection && st.seen.contains(base.src, base.pkt_id))
        return RejectInfo{Reject::ReplayedId};
    auto sent = freshness_unwrap(now, base.t, view.hops->size(), st.freshness_window);
    if (!sent) return RejectInfo{Reject::StaleTimestamp};
    st.seen.insert(base.src, base.pkt_id);

    PendingRequest req;
    req.base = base;
    req.hops = *view.hops;
    req.received_slot = now;
    req.sent_slot = *sent;

    while (st.pending.size() >= st.pending_capacity) st.pending.pop_front();
    st.pending.push_back(std::move(req));
    return &st.pending.back();
}

bool destination_check_h0(crypto::CryptoCtx& ctx, PendingRequest& req,
                          const crypto::SymKey& mac_key) {
    crypto::MacTag expected = ctx.mac(mac_key, wire::request_mac_input(req.base));
    req.h0_checked = (expected == req.base.h0);
    return req.h0_checked;
}

void destination_fold_chain(crypto::CryptoCtx& ctx, PendingRequest& req) {
    if (req.chain_folded || req.hops.empty()) {
        req.chain_folded = true;
        return;
    }
    // One counted evaluation over the whole hop list; the intermediate links
    // are kept as the per-hop MAC inputs.
    Bytes ids;
    for (const auto& hop : req.hops) ids.push_back(hop.relay);
    (void)ctx.chain_fold(crypto::Digest{req.base.h0.bytes}, ids);

    req.chain_values.clear();
    crypto::Digest h{req.base.h0.bytes};
    for (const auto& hop : req.hops) {
        std::uint8_t id = hop.relay;
        h = crypto::raw::chain_fold(h, {&id, 1});
        req.chain_values.push_back(h);
    }
    req.chain_folded = true;
}

Expected<Accepted> destination_verify_hops(PendingRequest& req,
                                           const CommitmentStore& commitments,
                                           const VerifiedKeyStore& flood_keys) {
    if (!req.chain_folded && !req.hops.empty())
        throw Error("destination_verify_hops: fold the chain first");

    bool waiting = false;
    for (size_t i = 0; i < req.hops.size(); ++i) {
        if (req.hops_verified.count(i)) continue;
        const auto& hop = req.hops[i];
        auto it = commitments.find(hop.relay);
        if (it == commitments.end())
            return RejectInfo{Reject::BadDisclosedKey, hop.relay};
        std::uint32_t interval =
            tesla::current_interval(it->second, hop_process_slot(req.sent_slot, i));
        const crypto::SymKey* key = flood_keys.find(hop.relay, interval);
        if (!key) {
            waiting = true;
            continue;
        }
        crypto::MacTag expected = crypto::raw::mac(
            *key, wire::hop_mac_input(packet_before_hop(req.base, req.hops, i), hop.relay,
                                      req.chain_values[i]));
        if (expected != hop.mac) return RejectInfo{Reject::BadRelayMac, static_cast<int>(i)};
        req.hops_verified.insert(i);
    }
    if (waiting) return RejectInfo{Reject::AwaitingDisclosure};
    return Accepted{};
}

DestinationOutcome destination_build_reply(DestinationState& st, crypto::CryptoCtx& ctx,
                                           PendingRequest& req, const crypto::SymKey& k,
                                           Slot now, ProtocolEventLog& events) {
    events.push_back(
        {PEventKind::DestinationRunning, now, st.self, 0, RoleTag::Destination, key_bytes(k)});

    crypto::SymKey derived = ctx.derive_session_key(k, req.base.nonce);
    DestinationOutcome out;
    out.plaintext = ctx.decrypt(derived, req.base.ciphertext);
    req.plaintext = out.plaintext;
    req.decrypted = true;

    out.reply.dst = st.self;
    out.reply.src = req.base.src;
    out.reply.t = static_cast<std::uint8_t>(now % 16);
    out.reply.pkt_id = req.base.pkt_id;

    if (has_infrastructure(st.scenario)) {
        crypto::MacTag inner = ctx.mac(k, wire::reply_mac_input(out.reply));
        // The relayed-infrastructure reply is additionally sealed with K: a
        // second keyed pass over the tag before it travels the open path.
        out.reply.reply_mac =
            (st.scenario == Scenario::RD2D) ? ctx.mac(k, inner.bytes) : inner;
        req.reply_interval = 0;
    } else {
        if (!st.chain) throw NoSessionKey("destination_build_reply: no TESLA chain");
        auto commitment = tesla::commitment_of(*st.chain);
        std::uint32_t interval = tesla::current_interval(commitment, now);
        out.reply.reply_mac = ctx.mac(tesla::key_for_interval(*st.chain, interval),
                                      wire::reply_mac_input(out.reply));
        req.reply_interval = interval;
    }

    req.replied = true;
    st.phase = DestinationPhase::Replied;
    return out;
}

Expected<DestinationOutcome> destination_validate_and_reply(
    DestinationState& st, crypto::CryptoCtx& ctx, const wire::Packet& pkt,
    const crypto::SymKey& k, const std::vector<wire::DisclosedKeyEntry>& disclosed,
    const CommitmentStore& commitments, Slot now, ProtocolEventLog& events) {
    auto admitted = destination_admit(st, pkt, now);
    if (!admitted.ok()) return admitted.reject();
    PendingRequest& req = *admitted.value();

    destination_fold_chain(ctx, req);

    // Authenticate whatever keys the caller handed us before using them.
    VerifiedKeyStore store;
    for (const auto& entry : disclosed) {
        auto it = commitments.find(entry.owner);
        if (it == commitments.end()) return RejectInfo{Reject::BadDisclosedKey, entry.owner};
        for (std::uint32_t i = 1; i <= it->second.chain_len; ++i) {
            if (tesla::verify_disclosed_key(it->second, entry.key, i)) {
                store.keys[{entry.owner, i}] = entry.key;
                break;
            }
        }
    }

    const crypto::SymKey* h0_key = &k;
    if (!has_infrastructure(st.scenario)) {
        auto it = commitments.find(req.base.src);
        if (it == commitments.end()) return RejectInfo{Reject::BadDisclosedKey, req.base.src};
        std::uint32_t interval = tesla::current_interval(it->second, req.sent_slot);
        h0_key = store.find(req.base.src, interval);
        if (!h0_key) return RejectInfo{Reject::AwaitingDisclosure};
    }
    if (!destination_check_h0(ctx, req, *h0_key)) {
        st.phase = DestinationPhase::Failed;
        return RejectInfo{Reject::BadSourceMac};
    }

    if (!req.hops.empty() && !disclosed.empty()) {
        auto verified = destination_verify_hops(req, commitments, store);
        if (!verified.ok() && verified.reject().reason != Reject::AwaitingDisclosure) {
            st.phase = DestinationPhase::Failed;
            return verified.reject();
        }
    }

    DestinationOutcome out = destination_build_reply(st, ctx, req, k, now, events);
    events.push_back(
        {PEventKind::DestinationCommit, now, st.self, 0, RoleTag::Destination, key_bytes(k)});

    bool hops_outstanding = req.hops_verified.size() != req.hops.size();
    if (!hops_outstanding) {
        req.term_emitted = true;
        events.push_back(
            {PEventKind::TermDestination, now, st.self, 0, RoleTag::Destination, key_bytes(k)});
        events.push_back({PEventKind::Reachable, now, st.self, 0, RoleTag::Destination, {}});
        st.phase = DestinationPhase::Done;
    }
    return out;
}

}  // namespace d2d::roles
