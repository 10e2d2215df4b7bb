#include "d2d/netsim.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

namespace d2d::netsim {

// ---------------------------------------------------------------------------
// Topology / config
// ---------------------------------------------------------------------------

std::vector<NodeId> Topology::d2d_nodes() const {
    std::vector<NodeId> out;
    out.push_back(source);
    out.insert(out.end(), relays.begin(), relays.end());
    out.push_back(destination);
    std::sort(out.begin(), out.end());
    return out;
}

bool Topology::adjacent(NodeId a, NodeId b) const {
    auto it = adjacency.find(a);
    return it != adjacency.end() && it->second.count(b) != 0;
}

namespace {

constexpr NodeId kSourceId = 1;
constexpr NodeId kDestinationId = 2;
constexpr NodeId kFirstRelayId = 10;
constexpr NodeId kMmeId = 200;
constexpr NodeId kAttackerId = 255;

void validate(const ScenarioConfig& cfg) {
    using roles::Scenario;
    if (cfg.n < 2) throw ConfigInvalid("config: n must be >= 2");
    if (roles::is_relayed(cfg.scenario)) {
        if (cfg.n < 3) throw ConfigInvalid("config: relayed scenarios need n >= 3");
    } else if (cfg.n != 2) {
        throw ConfigInvalid("config: direct scenarios take exactly n = 2");
    }
    if (cfg.T < 1 || cfg.T_prime < 1 || cfg.T < cfg.T_prime)
        throw ConfigInvalid("config: need T >= T' >= 1");
    if (cfg.M < 1) throw ConfigInvalid("config: M must be >= 1");
    if (cfg.B < 1) throw ConfigInvalid("config: B must be >= 1");
    if (cfg.W < 1) throw ConfigInvalid("config: W must be >= 1");
    if (cfg.tesla_L < 1 || cfg.tesla_interval < 1)
        throw ConfigInvalid("config: TESLA chain parameters must be >= 1");
    if (std::uint64_t{cfg.tesla_L} * cfg.tesla_interval < cfg.T)
        throw ConfigInvalid("config: TESLA chain too short for T slots");
    if (cfg.n > 200) throw ConfigInvalid("config: n too large for the id plan");
}

}  // namespace

ScenarioConfig default_config(roles::Scenario scenario, std::uint32_t n) {
    ScenarioConfig cfg;
    cfg.scenario = scenario;
    cfg.n = n;
    cfg.tesla_L = std::max<std::uint32_t>(32, static_cast<std::uint32_t>(cfg.T) + 1);
    return cfg;
}

void require_coverage(const Topology& topo, NodeId from, NodeId to) {
    if (!topo.has_mme || !topo.cellular_coverage.count(from) ||
        !topo.cellular_coverage.count(to))
        throw NoCoverage("cellular_send: endpoint out of coverage");
}

Topology build_topology(const ScenarioConfig& cfg) {
    validate(cfg);
    Topology topo;
    topo.source = kSourceId;
    topo.destination = kDestinationId;
    topo.enodeb_count = cfg.B;
    for (std::uint32_t i = 0; i + 2 < cfg.n; ++i)
        topo.relays.push_back(static_cast<NodeId>(kFirstRelayId + i));

    auto link = [&](NodeId a, NodeId b) {
        topo.adjacency[a].insert(b);
        topo.adjacency[b].insert(a);
    };
    // Line topology: source - relays... - destination. Direct scenarios are
    // the two-node degenerate line.
    NodeId prev = topo.source;
    for (NodeId r : topo.relays) {
        link(prev, r);
        prev = r;
    }
    link(prev, topo.destination);

    if (roles::has_infrastructure(cfg.scenario)) {
        topo.has_mme = true;
        topo.mme = kMmeId;
        for (NodeId node : topo.d2d_nodes()) topo.cellular_coverage.insert(node);
        topo.cellular_coverage.insert(kMmeId);
    }
    return topo;
}

// ---------------------------------------------------------------------------
// Config file format
// ---------------------------------------------------------------------------

namespace {

std::uint64_t parse_u64(const std::string& s, const char* what) {
    try {
        size_t pos = 0;
        std::uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigInvalid(std::string("config: bad number for ") + what + ": " + s);
    }
}

std::optional<wire::MsgType> msg_type_from_name(const std::string& s) {
    if (s == "request") return wire::MsgType::Request;
    if (s == "relayed_request") return wire::MsgType::RelayedRequest;
    if (s == "reply") return wire::MsgType::Reply;
    if (s == "relayed_reply") return wire::MsgType::RelayedReply;
    if (s == "disclosure") return wire::MsgType::Disclosure;
    return std::nullopt;
}

AdvAction parse_adv_action(const std::string& line) {
    std::istringstream in(line);
    AdvAction action;
    std::string slot_tok, verb;
    if (!(in >> slot_tok >> verb)) throw ConfigInvalid("config: malformed adv line: " + line);
    action.slot = parse_u64(slot_tok, "adv slot");

    std::map<std::string, std::string> kv;
    std::string tok;
    while (in >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw ConfigInvalid("config: bad adv argument: " + tok);
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    auto need_kind = [&]() {
        auto it = kv.find("kind");
        if (it == kv.end()) throw ConfigInvalid("config: adv action needs kind=");
        auto t = msg_type_from_name(it->second);
        if (!t) throw ConfigInvalid("config: unknown packet kind: " + it->second);
        return *t;
    };

    if (verb == "eavesdrop_all") {
        action.kind = AdvKind::EavesdropAll;
    } else if (verb == "drop") {
        action.kind = AdvKind::Drop;
        action.match = need_kind();
        if (kv.count("nth")) action.nth = static_cast<std::uint32_t>(parse_u64(kv["nth"], "nth"));
    } else if (verb == "tamper") {
        action.kind = AdvKind::Tamper;
        action.match = need_kind();
        if (!kv.count("bit")) throw ConfigInvalid("config: tamper needs bit=");
        action.bit_index = static_cast<std::uint32_t>(parse_u64(kv["bit"], "bit"));
        if (kv.count("nth")) action.nth = static_cast<std::uint32_t>(parse_u64(kv["nth"], "nth"));
    } else if (verb == "replay") {
        action.kind = AdvKind::Replay;
        action.match = need_kind();
    } else if (verb == "inject") {
        action.kind = AdvKind::Inject;
        if (!kv.count("hex")) throw ConfigInvalid("config: inject needs hex=");
        action.raw = from_hex(kv["hex"]);
    } else {
        throw ConfigInvalid("config: unknown adv verb: " + verb);
    }
    return action;
}

}  // namespace

void apply_override(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "scenario") {
        auto s = roles::scenario_from_name(value);
        if (!s) throw ConfigInvalid("config: unknown scenario: " + value);
        cfg.scenario = *s;
    } else if (key == "n") {
        cfg.n = static_cast<std::uint32_t>(parse_u64(value, "n"));
    } else if (key == "seed") {
        cfg.seed = parse_u64(value, "seed");
    } else if (key == "T") {
        cfg.T = parse_u64(value, "T");
    } else if (key == "T_prime") {
        cfg.T_prime = parse_u64(value, "T_prime");
    } else if (key == "M") {
        cfg.M = static_cast<std::uint32_t>(parse_u64(value, "M"));
    } else if (key == "B") {
        cfg.B = static_cast<std::uint32_t>(parse_u64(value, "B"));
    } else if (key == "W") {
        cfg.W = parse_u64(value, "W");
    } else if (key == "tesla_L") {
        cfg.tesla_L = static_cast<std::uint32_t>(parse_u64(value, "tesla_L"));
    } else if (key == "tesla_interval") {
        cfg.tesla_interval = parse_u64(value, "tesla_interval");
    } else {
        throw ConfigInvalid("config: unknown key: " + key);
    }
}

ScenarioConfig parse_config(std::istream& in) {
    ScenarioConfig cfg;
    bool have_scenario = false;
    std::string line;
    while (std::getline(in, line)) {
        // strip comments and whitespace
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);

        if (line.rfind("adv:", 0) == 0) {
            cfg.adversary.actions.push_back(parse_adv_action(line.substr(4)));
            continue;
        }
        std::istringstream ls(line);
        std::string key, value;
        if (!(ls >> key >> value)) throw ConfigInvalid("config: malformed line: " + line);
        std::string extra;
        if (ls >> extra) throw ConfigInvalid("config: trailing tokens on line: " + line);
        apply_override(cfg, key, value);
        if (key == "scenario") have_scenario = true;
    }
    if (!have_scenario) throw ConfigInvalid("config: missing scenario");
    validate(cfg);
    return cfg;
}

ScenarioConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

// ---------------------------------------------------------------------------
// Event plumbing
// ---------------------------------------------------------------------------

const char* event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::Send: return "send";
        case EventKind::Deliver: return "deliver";
        case EventKind::Drop: return "drop";
        case EventKind::StateTransition: return "state";
        case EventKind::Protocol: return "pevent";
        case EventKind::IntruderAlert: return "alert";
        case EventKind::AttackerKnowledge: return "knowledge";
        case EventKind::Meta: return "meta";
    }
    return "?";
}

Bytes encode_protocol_event(const ProtocolEvent& ev) {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(ev.kind));
    out.push_back(ev.node);
    out.push_back(ev.subject);
    out.push_back(static_cast<std::uint8_t>(ev.role));
    out.insert(out.end(), ev.value.begin(), ev.value.end());
    return out;
}

ProtocolEvent decode_protocol_event(Slot slot, NodeId node, ByteView payload) {
    if (payload.size() < 4) throw Error("trace: malformed protocol event payload");
    ProtocolEvent ev;
    ev.kind = static_cast<PEventKind>(payload[0]);
    ev.slot = slot;
    ev.node = payload[1];
    if (ev.node != node) throw Error("trace: protocol event node mismatch");
    ev.subject = payload[2];
    ev.role = static_cast<RoleTag>(payload[3]);
    ev.value.assign(payload.begin() + 4, payload.end());
    return ev;
}

bool EventTrace::knows(ByteView value) const {
    Bytes v(value.begin(), value.end());
    return std::binary_search(attacker_knowledge.begin(), attacker_knowledge.end(), v);
}

// ---------------------------------------------------------------------------
// Cellular channel payloads (trace bookkeeping only; the adversary never
// reads these)
// ---------------------------------------------------------------------------

namespace {

struct CellularMsg {
    enum class Type : std::uint8_t { D2DRequest = 1, KeyIssue = 2, Denial = 3 };
    Type type = Type::D2DRequest;
    NodeId pair_src = 0;
    NodeId pair_dst = 0;
    std::uint8_t reason = 0;  // reject code for denials
    crypto::SymKey key;       // for KeyIssue
};

Bytes encode_cellular(const CellularMsg& msg) {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(msg.type));
    out.push_back(msg.pair_src);
    out.push_back(msg.pair_dst);
    out.push_back(msg.reason);
    out.insert(out.end(), msg.key.bytes.begin(), msg.key.bytes.end());
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// The simulator
// ---------------------------------------------------------------------------

namespace {

class Simulator {
public:
    explicit Simulator(const ScenarioConfig& cfg)
        : cfg_(cfg), topo_(build_topology(cfg)), rng_(cfg.seed) {}

    EventTrace run() {
        setup();
        for (now_ = 0; now_ <= cfg_.T; ++now_) {
            begin_slot();
            deliver_d2d();
            deliver_cellular();
            tick();
        }
        finish();
        return std::move(trace_);
    }

private:
    struct D2dTx {
        NodeId from;
        Bytes bytes;
        Slot sent_at;
    };
    struct CellTx {
        NodeId from;
        NodeId to;
        CellularMsg msg;
    };

    // --- setup ------------------------------------------------------------

    void setup() {
        trace_.scenario = cfg_.scenario;
        trace_.n = cfg_.n;

        meta("scenario", roles::scenario_name(cfg_.scenario));
        meta("n", std::to_string(cfg_.n));
        meta("seed", std::to_string(cfg_.seed));
        meta("T", std::to_string(cfg_.T));
        meta("T_prime", std::to_string(cfg_.T_prime));
        meta("M", std::to_string(cfg_.M));
        meta("B", std::to_string(cfg_.B));
        meta("W", std::to_string(cfg_.W));

        // Deterministic draw order: chains for every D2D node in id order,
        // then the preshared key, the message, nonce and packet id.
        for (NodeId node : topo_.d2d_nodes()) {
            chains_.emplace(node, tesla::generate_chain(node, rng_.block32(), cfg_.tesla_L,
                                                        cfg_.tesla_interval, 0));
        }
        for (const auto& [node, chain] : chains_)
            commitments_.emplace(node, tesla::commitment_of(chain));

        crypto::SymKey preshared{rng_.block32(), crypto::KeyKind::Preshared};
        Bytes msg_bytes = rng_.bytes(crypto::kBlockBytes);
        std::copy(msg_bytes.begin(), msg_bytes.end(), message_.begin());
        trace_.secret_message = msg_bytes;
        meta("secret_m", to_hex(msg_bytes));

        source_.self = topo_.source;
        source_.dst = topo_.destination;
        source_.scenario = cfg_.scenario;
        source_.nonce.value = static_cast<std::uint8_t>(rng_.below(16));
        source_.pkt_id = static_cast<std::uint8_t>(rng_.below(16));
        source_.chain = chains_.at(topo_.source);

        dest_.self = topo_.destination;
        dest_.scenario = cfg_.scenario;
        dest_.freshness_window = cfg_.W;
        dest_.chain = chains_.at(topo_.destination);
        dest_.hook_disable_replay_protection = cfg_.hook_disable_replay_protection;

        for (NodeId r : topo_.relays) {
            roles::RelayState st;
            st.self = r;
            st.chain = chains_.at(r);
            st.freshness_window = cfg_.W;
            relays_.emplace(r, std::move(st));
        }

        if (topo_.has_mme) {
            mme_.self = topo_.mme;
            for (NodeId node : topo_.d2d_nodes()) mme_.subscribers.insert(node);
            // All scenario participants share one D2D service area.
            for (NodeId a : topo_.d2d_nodes())
                for (NodeId b : topo_.d2d_nodes())
                    if (a != b) mme_.add_proximity(a, b);
            mme_.hook_issue_distinct_keys = cfg_.hook_mme_distinct_keys;
        } else {
            source_.session_key = preshared;
            dest_.session_key = preshared;
            trace_.session_key.assign(preshared.bytes.begin(), preshared.bytes.end());
            meta("session_key", to_hex(preshared.bytes));
        }

        eavesdropping_ = false;
        if (cfg_.hook_leak_session_key && !topo_.has_mme) attacker_learn(preshared.bytes, true);
        leak_pending_ = cfg_.hook_leak_session_key && topo_.has_mme;
    }

    // --- event helpers ------------------------------------------------------

    void meta(const std::string& key, const std::string& value) {
        std::string kv = key + "=" + value;
        push_event(EventKind::Meta, 0, Bytes(kv.begin(), kv.end()));
        trace_.meta[key] = value;
    }

    void push_event(EventKind kind, NodeId node, Bytes payload) {
        trace_.events.push_back(SimEvent{now_, seq_++, kind, node, std::move(payload)});
    }

    void state(NodeId node, const std::string& text) {
        push_event(EventKind::StateTransition, node, Bytes(text.begin(), text.end()));
    }

    void pevents_flush(Slot slot) {
        // Role functions appended to pevents_; mirror them into the trace.
        for (size_t i = pevents_flushed_; i < pevents_.size(); ++i) {
            pevents_[i].slot = slot;
            push_event(EventKind::Protocol, pevents_[i].node,
                       encode_protocol_event(pevents_[i]));
        }
        pevents_flushed_ = pevents_.size();
    }

    void alert(NodeId node, const std::string& why) {
        push_event(EventKind::IntruderAlert, node, Bytes(why.begin(), why.end()));
    }

    // --- channels -----------------------------------------------------------

    void broadcast(NodeId from, const wire::Packet& pkt) { broadcast_raw(from, wire::encode(pkt)); }

    void broadcast_raw(NodeId from, Bytes bytes) {
        Bytes payload;
        payload.push_back(kChannelD2d);
        payload.insert(payload.end(), bytes.begin(), bytes.end());
        push_event(EventKind::Send, from, payload);
        d2d_outbox_.push_back(D2dTx{from, std::move(bytes), now_});
    }

    void cellular_send(NodeId from, NodeId to, const CellularMsg& msg) {
        require_coverage(topo_, from, to);
        Bytes payload;
        payload.push_back(kChannelCellular);
        Bytes body = encode_cellular(msg);
        payload.insert(payload.end(), body.begin(), body.end());
        push_event(EventKind::Send, from, payload);
        cell_outbox_.push_back(CellTx{from, to, msg});
    }

    // --- slot machinery -----------------------------------------------------

    void begin_slot() {
        d2d_inflight_ = std::move(d2d_outbox_);
        d2d_outbox_.clear();
        cell_inflight_ = std::move(cell_outbox_);
        cell_outbox_.clear();
        for (const auto& action : cfg_.adversary.actions)
            if (action.kind == AdvKind::EavesdropAll && action.slot <= now_) eavesdropping_ = true;
    }

    const AdvAction* match_action(AdvKind kind, const D2dTx& tx, std::uint32_t occurrence) {
        for (size_t i = 0; i < cfg_.adversary.actions.size(); ++i) {
            const auto& action = cfg_.adversary.actions[i];
            if (action.kind != kind || action.slot != tx.sent_at) continue;
            if (consumed_.count(i)) continue;
            Bytes probe = tx.bytes;
            wire::MsgType t;
            try {
                t = wire::type_of(wire::decode(probe));
            } catch (const Error&) {
                continue;
            }
            if (t != action.match) continue;
            if (action.nth != occurrence) continue;
            consumed_.insert(i);
            return &action;
        }
        return nullptr;
    }

    void deliver_d2d() {
        std::map<wire::MsgType, std::uint32_t> occurrence;
        for (auto& tx : d2d_inflight_) {
            if (eavesdropping_) attacker_observe(tx.bytes);

            std::uint32_t occ = 0;
            try {
                occ = occurrence[wire::type_of(wire::decode(tx.bytes))]++;
            } catch (const Error&) {
                // undecodable bytes (attacker-injected); occurrence stays 0
            }

            if (const AdvAction* drop = match_action(AdvKind::Drop, tx, occ); drop) {
                Bytes payload;
                payload.push_back(kChannelD2d);
                payload.insert(payload.end(), tx.bytes.begin(), tx.bytes.end());
                push_event(EventKind::Drop, tx.from, payload);
                continue;
            }
            if (const AdvAction* tamper = match_action(AdvKind::Tamper, tx, occ); tamper) {
                size_t bit = tamper->bit_index % (tx.bytes.size() * 8);
                tx.bytes[bit / 8] ^= static_cast<std::uint8_t>(0x80 >> (bit % 8));
                if (eavesdropping_) attacker_observe(tx.bytes);
            }

            // The attacker's own transmissions reach every node; honest
            // broadcasts reach radio neighbours.
            std::vector<NodeId> receivers;
            if (tx.from == kAttackerId) {
                receivers = topo_.d2d_nodes();
            } else {
                auto it = topo_.adjacency.find(tx.from);
                if (it != topo_.adjacency.end())
                    receivers.assign(it->second.begin(), it->second.end());
            }
            for (NodeId to : receivers) {
                Bytes payload;
                payload.push_back(kChannelD2d);
                payload.insert(payload.end(), tx.bytes.begin(), tx.bytes.end());
                push_event(EventKind::Deliver, to, payload);
                handle_d2d(to, tx.bytes);
            }
        }
        d2d_inflight_.clear();
    }

    void deliver_cellular() {
        for (const auto& tx : cell_inflight_) {
            Bytes payload;
            payload.push_back(kChannelCellular);
            Bytes body = encode_cellular(tx.msg);
            payload.insert(payload.end(), body.begin(), body.end());
            push_event(EventKind::Deliver, tx.to, payload);
            handle_cellular(tx.to, tx.msg);
        }
        cell_inflight_.clear();
    }

    void tick() {
        if (now_ == 0) source_initiate();
        run_scheduled_disclosures();
        run_adversary_tick();
        destination_deferred();
        source_retry_parked_reply();
        pevents_flush(now_);
    }

    // --- source -------------------------------------------------------------

    void source_initiate() {
        if (topo_.has_mme) {
            state(source_.self, "source:idle->awaiting_key");
            source_.phase = roles::SourcePhase::AwaitingKey;
            cellular_send(source_.self, topo_.mme,
                          CellularMsg{CellularMsg::Type::D2DRequest, source_.self, dest_.self, 0, {}});
        } else {
            source_send_request();
        }
    }

    void source_send_request() {
        wire::RequestPacket pkt = roles::source_build_request(source_, crypto_, message_, now_,
                                                              pevents_);
        state(source_.self, "source:->sent_request");
        if (!roles::has_infrastructure(cfg_.scenario))
            register_key_use(source_.self, source_.h0_interval);
        broadcast(source_.self, wire::Packet{pkt});
    }

    void source_handle_reply(const wire::Packet& pkt) {
        if (source_.phase != roles::SourcePhase::SentRequest) return;
        auto result = roles::source_verify_reply(source_, pkt, commitments_,
                                                 node_keys_[source_.self], now_, pevents_);
        if (result.ok()) {
            state(source_.self, "source:->accepted");
            trace_.source_accepted = true;
            parked_reply_.reset();
            return;
        }
        if (result.reject().reason == roles::Reject::AwaitingDisclosure) {
            parked_reply_ = pkt;
            return;
        }
        if (result.reject().reason == roles::Reject::UnknownSession) return;  // not ours
        state(source_.self, std::string("source:reject:") + roles::reject_name(result.reject().reason));
        parked_reply_.reset();
    }

    void source_retry_parked_reply() {
        if (!parked_reply_ || source_.phase != roles::SourcePhase::SentRequest) return;
        wire::Packet pkt = *parked_reply_;
        auto result = roles::source_verify_reply(source_, pkt, commitments_,
                                                 node_keys_[source_.self], now_, pevents_);
        if (result.ok()) {
            state(source_.self, "source:->accepted");
            trace_.source_accepted = true;
            parked_reply_.reset();
        } else if (result.reject().reason != roles::Reject::AwaitingDisclosure) {
            state(source_.self, std::string("source:reject:") + roles::reject_name(result.reject().reason));
            parked_reply_.reset();
        }
    }

    // --- destination ----------------------------------------------------------

    void destination_handle_request(const wire::Packet& pkt) {
        auto admitted = roles::destination_admit(dest_, pkt, now_);
        if (!admitted.ok()) {
            state(dest_.self, std::string("destination:reject:") +
                                  roles::reject_name(admitted.reject().reason));
            return;
        }
        roles::PendingRequest& req = *admitted.value();

        if (roles::has_infrastructure(cfg_.scenario)) {
            if (dest_.session_key) {
                destination_validate_pending(req);
            } else if (dest_.phase != roles::DestinationPhase::AwaitingKey) {
                state(dest_.self, "destination:->awaiting_key");
                dest_.phase = roles::DestinationPhase::AwaitingKey;
                cellular_send(dest_.self, topo_.mme,
                              CellularMsg{CellularMsg::Type::D2DRequest, req.base.src, dest_.self, 0, {}});
            }
            return;
        }

        // Without infrastructure the destination answers optimistically and
        // finishes validation when the TESLA keys arrive.
        roles::destination_fold_chain(crypto_, req);
        auto out = roles::destination_build_reply(dest_, crypto_, req, *dest_.session_key, now_,
                                                  pevents_);
        state(dest_.self, "destination:->replied_optimistic");
        register_key_use(dest_.self, req.reply_interval);
        record_recovered_plaintext(out.plaintext);
        broadcast(dest_.self, wire::Packet{out.reply});
    }

    void destination_validate_pending(roles::PendingRequest& req) {
        roles::destination_fold_chain(crypto_, req);
        if (!roles::destination_check_h0(crypto_, req, *dest_.session_key)) {
            req.failed = true;
            dest_.phase = roles::DestinationPhase::Failed;
            state(dest_.self, "destination:reject:BadSourceMac");
            alert(dest_.self, "BadSourceMac");
            return;
        }
        auto out = roles::destination_build_reply(dest_, crypto_, req, *dest_.session_key, now_,
                                                  pevents_);
        pevents_.push_back({PEventKind::DestinationCommit, now_, dest_.self, 0,
                            RoleTag::Destination,
                            Bytes(dest_.session_key->bytes.begin(), dest_.session_key->bytes.end())});
        state(dest_.self, "destination:->replied");
        record_recovered_plaintext(out.plaintext);
        broadcast(dest_.self, wire::Packet{out.reply});
        destination_maybe_finish(req);
    }

    void destination_deferred() {
        for (auto& req : dest_.pending) {
            if (req.failed || !req.replied) continue;

            if (!req.h0_checked && !roles::has_infrastructure(cfg_.scenario)) {
                auto it = commitments_.find(req.base.src);
                if (it == commitments_.end()) continue;
                std::uint32_t interval = tesla::current_interval(it->second, req.sent_slot);
                const crypto::SymKey* key = node_keys_[dest_.self].find(req.base.src, interval);
                if (key) {
                    if (!roles::destination_check_h0(crypto_, req, *key)) {
                        req.failed = true;
                        dest_.phase = roles::DestinationPhase::Failed;
                        state(dest_.self, "destination:reject:BadSourceMac");
                        alert(dest_.self, "BadSourceMac");
                        continue;
                    }
                    pevents_.push_back({PEventKind::DestinationCommit, now_, dest_.self, 0,
                                        RoleTag::Destination,
                                        Bytes(dest_.session_key->bytes.begin(),
                                              dest_.session_key->bytes.end())});
                    state(dest_.self, "destination:h0_verified");
                }
            }

            if (req.h0_checked && req.hops_verified.size() != req.hops.size()) {
                auto verified = roles::destination_verify_hops(req, commitments_,
                                                               node_keys_[dest_.self]);
                if (!verified.ok()) {
                    auto reason = verified.reject().reason;
                    if (reason != roles::Reject::AwaitingDisclosure) {
                        req.failed = true;
                        dest_.phase = roles::DestinationPhase::Failed;
                        state(dest_.self, std::string("destination:reject:") +
                                              roles::reject_name(reason) +
                                              ":hop=" + std::to_string(verified.reject().index));
                        alert(dest_.self, roles::reject_name(reason));
                        continue;
                    }
                }
            }
            destination_maybe_finish(req);
        }
    }

    void destination_maybe_finish(roles::PendingRequest& req) {
        if (req.failed || !req.replied || !req.h0_checked) return;
        if (req.hops_verified.size() != req.hops.size()) return;
        if (req.term_emitted) return;
        req.term_emitted = true;
        Bytes k(dest_.session_key->bytes.begin(), dest_.session_key->bytes.end());
        pevents_.push_back({PEventKind::TermDestination, now_, dest_.self, 0,
                            RoleTag::Destination, k});
        pevents_.push_back({PEventKind::Reachable, now_, dest_.self, 0, RoleTag::Destination, {}});
        dest_.phase = roles::DestinationPhase::Done;
        trace_.destination_done = true;
        state(dest_.self, "destination:->done");
    }

    void record_recovered_plaintext(const crypto::Block32& plaintext) {
        trace_.destination_plaintext.assign(plaintext.begin(), plaintext.end());
    }

    // --- relays ---------------------------------------------------------------

    void relay_handle(roles::RelayState& st, const wire::Packet& pkt) {
        wire::MsgType t = wire::type_of(pkt);
        if (t == wire::MsgType::Request || t == wire::MsgType::RelayedRequest) {
            auto result = roles::relay_process_request(st, crypto_, pkt, now_, pevents_);
            if (result.ok()) {
                register_key_use(st.self,
                                 tesla::current_interval(tesla::commitment_of(st.chain), now_));
                broadcast(st.self, wire::Packet{result.value()});
            }
            // silently ignore radio echoes (ReplayedId) and stale copies
            return;
        }
        if (t == wire::MsgType::Reply || t == wire::MsgType::RelayedReply) {
            try {
                auto result = roles::relay_process_reply(st, pkt, now_);
                if (result.ok()) broadcast(st.self, wire::Packet{result.value()});
            } catch (const DisclosureTooEarly&) {
                // Safety rule held against an early-reply injection: refuse
                // to release the key and say so.
                state(st.self, "relay:refused_early_disclosure");
            }
            return;
        }
    }

    // --- MME --------------------------------------------------------------------

    void handle_cellular(NodeId to, const CellularMsg& msg) {
        if (to == topo_.mme) {
            if (msg.type != CellularMsg::Type::D2DRequest) return;
            handle_mme_request(msg);
            return;
        }
        if (msg.type == CellularMsg::Type::KeyIssue) {
            if (to == source_.self) {
                source_.session_key = msg.key;
                state(source_.self, "source:key_installed");
                source_send_request();
            } else if (to == dest_.self) {
                dest_.session_key = msg.key;
                state(dest_.self, "destination:key_installed");
                for (auto& req : dest_.pending)
                    if (!req.replied && !req.failed) destination_validate_pending(req);
            }
        } else if (msg.type == CellularMsg::Type::Denial) {
            if (to == source_.self) source_.phase = roles::SourcePhase::Failed;
            if (to == dest_.self) dest_.phase = roles::DestinationPhase::Failed;
            state(to, std::string("denied:") +
                          roles::reject_name(static_cast<roles::Reject>(msg.reason)));
        }
    }

    void handle_mme_request(const CellularMsg& msg) {
        // The requester is identified by which end of the pair spoke. The
        // source asks first; a matching destination request releases the key.
        if (!mme_seen_source_request_) {
            auto result = roles::mme_handle_source_request(mme_, rng_, msg.pair_src, msg.pair_dst,
                                                           now_, pevents_);
            mme_seen_source_request_ = true;
            if (result.ok()) {
                trace_.session_key.assign(result.value().bytes.begin(),
                                          result.value().bytes.end());
                meta("session_key", to_hex(result.value().bytes));
                if (leak_pending_) {
                    attacker_learn(result.value().bytes, true);
                    leak_pending_ = false;
                }
                cellular_send(topo_.mme, msg.pair_src,
                              CellularMsg{CellularMsg::Type::KeyIssue, msg.pair_src, msg.pair_dst,
                                          0, result.value()});
            } else {
                cellular_send(topo_.mme, msg.pair_src,
                              CellularMsg{CellularMsg::Type::Denial, msg.pair_src, msg.pair_dst,
                                          static_cast<std::uint8_t>(result.reject().reason), {}});
            }
        } else {
            auto result = roles::mme_handle_destination_request(mme_, msg.pair_dst, msg.pair_src,
                                                                now_, pevents_);
            if (result.ok()) {
                cellular_send(topo_.mme, msg.pair_dst,
                              CellularMsg{CellularMsg::Type::KeyIssue, msg.pair_src, msg.pair_dst,
                                          0, result.value()});
            } else {
                cellular_send(topo_.mme, msg.pair_dst,
                              CellularMsg{CellularMsg::Type::Denial, msg.pair_src, msg.pair_dst,
                                          static_cast<std::uint8_t>(result.reject().reason), {}});
            }
        }
    }

    // --- dispatch -----------------------------------------------------------------

    void handle_d2d(NodeId to, const Bytes& bytes) {
        wire::Packet pkt;
        try {
            pkt = wire::decode(bytes);
        } catch (const Error&) {
            state(to, "ignored_undecodable");
            return;
        }
        wire::MsgType t = wire::type_of(pkt);

        if (t == wire::MsgType::Disclosure) {
            handle_disclosure(to, std::get<wire::DisclosurePacket>(pkt));
            return;
        }

        if (t == wire::MsgType::Request || t == wire::MsgType::RelayedRequest) {
            const wire::RequestPacket& base =
                (t == wire::MsgType::Request)
                    ? std::get<wire::RequestPacket>(pkt)
                    : std::get<wire::RelayedRequestPacket>(pkt).base;
            if (to == dest_.self && base.dst == dest_.self) {
                destination_handle_request(pkt);
            } else if (auto it = relays_.find(to); it != relays_.end() && base.dst != to) {
                relay_handle(it->second, pkt);
            }
            return;
        }

        // replies
        const wire::ReplyPacket& base = (t == wire::MsgType::Reply)
                                            ? std::get<wire::ReplyPacket>(pkt)
                                            : std::get<wire::RelayedReplyPacket>(pkt).base;
        if (to == source_.self && base.src == source_.self) {
            source_handle_reply(pkt);
        } else if (auto it = relays_.find(to); it != relays_.end()) {
            relay_handle(it->second, pkt);
        }
    }

    // --- TESLA disclosure flood -----------------------------------------------

    void register_key_use(NodeId owner, std::uint32_t interval) {
        used_keys_.insert({owner, interval});
    }

    void run_scheduled_disclosures() {
        for (const auto& [owner, interval] : used_keys_) {
            if (disclosed_.count({owner, interval})) continue;
            const auto& chain = chains_.at(owner);
            if (now_ < tesla::disclosure_slot(tesla::commitment_of(chain), interval)) continue;
            disclosed_.insert({owner, interval});
            wire::DisclosurePacket pkt{owner, static_cast<std::uint16_t>(interval),
                                       tesla::key_for_interval(chain, interval)};
            broadcast(owner, wire::Packet{pkt});
        }
    }

    void handle_disclosure(NodeId to, const wire::DisclosurePacket& pkt) {
        Bytes dedup = wire::encode(wire::Packet{pkt});
        if (!disclosure_seen_[to].insert(dedup).second) return;

        auto it = commitments_.find(pkt.owner);
        bool valid = it != commitments_.end() &&
                     tesla::verify_disclosed_key(it->second, pkt.key, pkt.interval);
        if (!valid) {
            state(to, "bad_disclosure_ignored");
            return;
        }
        node_keys_[to].keys[{pkt.owner, pkt.interval}] = pkt.key;
        if (to != pkt.owner) broadcast(to, wire::Packet{pkt});  // flood once
    }

    // --- adversary -----------------------------------------------------------

    void run_adversary_tick() {
        for (size_t i = 0; i < cfg_.adversary.actions.size(); ++i) {
            const auto& action = cfg_.adversary.actions[i];
            if (action.slot != now_ || consumed_.count(i)) continue;
            if (action.kind == AdvKind::Replay) {
                auto it = captured_.find(action.match);
                if (it != captured_.end()) {
                    consumed_.insert(i);
                    broadcast_raw(kAttackerId, it->second);
                }
            } else if (action.kind == AdvKind::Inject) {
                consumed_.insert(i);
                broadcast_raw(kAttackerId, action.raw);
            }
        }
    }

    void attacker_observe(const Bytes& bytes) {
        try {
            wire::Packet pkt = wire::decode(bytes);
            std::visit([&](const auto& p) { ingest_fields(p); }, pkt);
            captured_[wire::type_of(pkt)] = bytes;
        } catch (const Error&) {
            attacker_learn(bytes, false);
        }
        attacker_close();
    }

    void ingest_fields(const wire::RequestPacket& p) {
        attacker_learn(Bytes{p.src}, false);
        attacker_learn(Bytes{p.dst}, false);
        k_nonces_.insert(p.nonce.value);
        attacker_learn(p.ciphertext, true);
        k_ciphertexts_.insert(Bytes(p.ciphertext.begin(), p.ciphertext.end()));
        attacker_learn(p.h0.bytes, true);
    }
    void ingest_fields(const wire::RelayedRequestPacket& p) {
        ingest_fields(p.base);
        for (const auto& hop : p.hops) {
            attacker_learn(Bytes{hop.relay}, false);
            attacker_learn(hop.mac.bytes, true);
        }
    }
    void ingest_fields(const wire::ReplyPacket& p) {
        attacker_learn(Bytes{p.src}, false);
        attacker_learn(Bytes{p.dst}, false);
        attacker_learn(p.reply_mac.bytes, true);
    }
    void ingest_fields(const wire::RelayedReplyPacket& p) {
        ingest_fields(p.base);
        for (const auto& entry : p.disclosed_keys) attacker_learn(entry.key.bytes, true);
    }
    void ingest_fields(const wire::DisclosurePacket& p) { attacker_learn(p.key.bytes, true); }

    template <typename Container>
    void attacker_learn(const Container& value, bool is_block, int depth = 0) {
        Bytes v(value.begin(), value.end());
        auto [it, inserted] = k_depth_.try_emplace(v, depth);
        if (!inserted) {
            if (depth >= it->second) return;
            it->second = depth;  // rediscovered more directly
        }
        if (inserted) {
            knowledge_.insert(v);
            push_event(EventKind::AttackerKnowledge, kAttackerId, v);
        }
        if (is_block && v.size() == crypto::kBlockBytes) k_values_.insert(v);
    }

    void attacker_close() {
        // Derivation closure, capped at two key applications per observed
        // value: an observed or leaked key, one nonce derivation from it,
        // and one decryption with either. That reaches every plaintext the
        // protocol protects with at most a nonce-derived key while keeping
        // the closure finite.
        bool grew = true;
        while (grew) {
            grew = false;
            std::vector<std::pair<Bytes, int>> derived;
            for (const auto& kb : k_values_) {
                int depth = k_depth_.at(kb);
                if (depth >= 2) continue;
                crypto::SymKey key;
                std::copy(kb.begin(), kb.end(), key.bytes.begin());
                for (const auto& c : k_ciphertexts_) {
                    auto m = crypto::raw::decrypt(key, c);
                    derived.emplace_back(Bytes(m.begin(), m.end()), depth + 1);
                }
                for (std::uint8_t n : k_nonces_) {
                    auto dk = crypto::raw::derive_session_key(key, crypto::Nonce{n});
                    derived.emplace_back(Bytes(dk.bytes.begin(), dk.bytes.end()), depth + 1);
                }
            }
            for (const auto& [v, depth] : derived) {
                auto it = k_depth_.find(v);
                if (it != k_depth_.end() && it->second <= depth) continue;
                grew = true;
                attacker_learn(v, true, depth);
            }
        }
    }

    // --- finish ----------------------------------------------------------------

    void finish() {
        now_ = cfg_.T;
        meta("destination_plaintext", to_hex(trace_.destination_plaintext));
        meta("source_accepted", trace_.source_accepted ? "1" : "0");
        meta("destination_done", trace_.destination_done ? "1" : "0");
        meta("counter_enc", std::to_string(crypto_.counters().enc));
        meta("counter_dec", std::to_string(crypto_.counters().dec));
        meta("counter_hash", std::to_string(crypto_.counters().hash));
        trace_.counters = crypto_.counters();
        trace_.protocol_events = pevents_;
        trace_.attacker_knowledge.assign(knowledge_.begin(), knowledge_.end());
    }

    // --- members ---------------------------------------------------------------

    ScenarioConfig cfg_;
    Topology topo_;
    Rng rng_;
    crypto::CryptoCtx crypto_;
    EventTrace trace_;
    std::uint64_t seq_ = 0;
    Slot now_ = 0;

    roles::MmeState mme_;
    roles::SourceState source_;
    roles::DestinationState dest_;
    std::map<NodeId, roles::RelayState> relays_;
    roles::CommitmentStore commitments_;
    std::map<NodeId, tesla::TeslaChain> chains_;
    std::map<NodeId, roles::VerifiedKeyStore> node_keys_;
    std::map<NodeId, std::set<Bytes>> disclosure_seen_;
    crypto::Block32 message_{};
    bool mme_seen_source_request_ = false;
    bool leak_pending_ = false;

    std::vector<D2dTx> d2d_outbox_, d2d_inflight_;
    std::vector<CellTx> cell_outbox_, cell_inflight_;

    std::set<std::pair<NodeId, std::uint32_t>> used_keys_, disclosed_;
    std::optional<wire::Packet> parked_reply_;

    std::set<size_t> consumed_;  // adversary actions already fired
    bool eavesdropping_ = false;
    std::map<wire::MsgType, Bytes> captured_;
    std::set<Bytes> knowledge_, k_values_, k_ciphertexts_;
    std::map<Bytes, int> k_depth_;  // key-application distance from an observation
    std::set<std::uint8_t> k_nonces_;

    ProtocolEventLog pevents_;
    size_t pevents_flushed_ = 0;
};

}  // namespace

EventTrace run(const ScenarioConfig& cfg) {
    Simulator sim(cfg);
    return sim.run();
}

// ---------------------------------------------------------------------------
// Trace serialization
// ---------------------------------------------------------------------------

std::string serialize_trace(const EventTrace& trace) {
    std::ostringstream out;
    for (const auto& ev : trace.events) {
        out << ev.slot << ' ' << ev.seq << ' ' << event_kind_name(ev.kind) << ' '
            << static_cast<unsigned>(ev.node) << ' ' << to_hex(ev.payload) << '\n';
    }
    return out.str();
}

namespace {

std::optional<EventKind> event_kind_from_name(const std::string& s) {
    if (s == "send") return EventKind::Send;
    if (s == "deliver") return EventKind::Deliver;
    if (s == "drop") return EventKind::Drop;
    if (s == "state") return EventKind::StateTransition;
    if (s == "pevent") return EventKind::Protocol;
    if (s == "alert") return EventKind::IntruderAlert;
    if (s == "knowledge") return EventKind::AttackerKnowledge;
    if (s == "meta") return EventKind::Meta;
    return std::nullopt;
}

}  // namespace

EventTrace parse_trace(std::istream& in) {
    EventTrace trace;
    std::set<Bytes> knowledge;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Slot slot;
        std::uint64_t seq;
        std::string kind_name;
        unsigned node;
        std::string payload_hex;
        if (!(ls >> slot >> seq >> kind_name >> node >> payload_hex)) {
            if (!(std::istringstream(line) >> slot >> seq >> kind_name >> node))
                throw Error("trace: malformed line " + std::to_string(lineno));
            payload_hex.clear();  // empty payload
        }
        auto kind = event_kind_from_name(kind_name);
        if (!kind) throw Error("trace: unknown event kind at line " + std::to_string(lineno));
        SimEvent ev{slot, seq, *kind, static_cast<NodeId>(node), from_hex(payload_hex)};

        if (*kind == EventKind::Protocol)
            trace.protocol_events.push_back(decode_protocol_event(slot, ev.node, ev.payload));
        if (*kind == EventKind::AttackerKnowledge) knowledge.insert(ev.payload);
        if (*kind == EventKind::Meta) {
            std::string kv(ev.payload.begin(), ev.payload.end());
            auto eq = kv.find('=');
            if (eq != std::string::npos) trace.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        trace.events.push_back(std::move(ev));
    }

    trace.attacker_knowledge.assign(knowledge.begin(), knowledge.end());
    auto get = [&](const std::string& k) -> std::string {
        auto it = trace.meta.find(k);
        return it == trace.meta.end() ? std::string{} : it->second;
    };
    if (auto s = roles::scenario_from_name(get("scenario"))) trace.scenario = *s;
    if (!get("n").empty()) trace.n = static_cast<std::uint32_t>(std::stoul(get("n")));
    if (!get("secret_m").empty()) trace.secret_message = from_hex(get("secret_m"));
    if (!get("session_key").empty()) trace.session_key = from_hex(get("session_key"));
    if (!get("destination_plaintext").empty())
        trace.destination_plaintext = from_hex(get("destination_plaintext"));
    trace.source_accepted = get("source_accepted") == "1";
    trace.destination_done = get("destination_done") == "1";
    if (!get("counter_enc").empty()) trace.counters.enc = std::stoull(get("counter_enc"));
    if (!get("counter_dec").empty()) trace.counters.dec = std::stoull(get("counter_dec"));
    if (!get("counter_hash").empty()) trace.counters.hash = std::stoull(get("counter_hash"));
    return trace;
}

EventTrace parse_trace_string(const std::string& text) {
    std::istringstream in(text);
    return parse_trace(in);
}

// ---------------------------------------------------------------------------
// Trace scans
// ---------------------------------------------------------------------------

bool scan_no_early_key_release(const ScenarioConfig& cfg, const EventTrace& trace) {
    // Rebuild the chains exactly as the run drew them (same seed, same
    // order), then look for any chain key on the air before its slot.
    Topology topo = build_topology(cfg);
    Rng rng(cfg.seed);
    std::map<NodeId, tesla::TeslaChain> chains;
    for (NodeId node : topo.d2d_nodes())
        chains.emplace(node, tesla::generate_chain(node, rng.block32(), cfg.tesla_L,
                                                   cfg.tesla_interval, 0));

    for (const auto& ev : trace.events) {
        if (ev.kind != EventKind::Send) continue;
        if (ev.payload.empty() || ev.payload[0] != kChannelD2d) continue;
        ByteView body(ev.payload.data() + 1, ev.payload.size() - 1);
        for (const auto& [owner, chain] : chains) {
            auto commitment = tesla::commitment_of(chain);
            for (std::uint32_t i = 1; i <= chain.length(); ++i) {
                if (ev.slot >= tesla::disclosure_slot(commitment, i)) continue;
                const auto& key = chain.keys[i].bytes;
                if (std::search(body.begin(), body.end(), key.begin(), key.end()) != body.end())
                    return false;
            }
        }
    }
    return true;
}

bool scan_channel_isolation(const EventTrace& trace) {
    std::vector<Bytes> cellular_payloads;
    std::vector<Bytes> d2d_payloads;
    for (const auto& ev : trace.events) {
        if (ev.kind != EventKind::Send && ev.kind != EventKind::Deliver) continue;
        if (ev.payload.empty()) continue;
        Bytes body(ev.payload.begin() + 1, ev.payload.end());
        if (ev.payload[0] == kChannelCellular) cellular_payloads.push_back(std::move(body));
        else d2d_payloads.push_back(std::move(body));
    }

    auto contains = [](const Bytes& hay, const Bytes& needle) {
        return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
    };
    for (const auto& atom : trace.attacker_knowledge) {
        if (atom.size() < 16) continue;  // ids and codes recur everywhere
        bool in_cellular = false;
        for (const auto& p : cellular_payloads)
            if (contains(p, atom)) { in_cellular = true; break; }
        if (!in_cellular) continue;
        bool in_d2d = false;
        for (const auto& p : d2d_payloads)
            if (contains(p, atom)) { in_d2d = true; break; }
        if (!in_d2d) return false;  // knowledge traceable only to cellular traffic
    }
    return true;
}

std::vector<wire::SizeObservation> collect_size_observations(const EventTrace& trace) {
    std::vector<wire::SizeObservation> out;
    std::set<std::pair<int, std::uint32_t>> seen;
    bool relayed = roles::is_relayed(trace.scenario);
    for (const auto& ev : trace.events) {
        if (ev.kind != EventKind::Send) continue;
        if (ev.payload.empty() || ev.payload[0] != kChannelD2d) continue;
        ByteView body(ev.payload.data() + 1, ev.payload.size() - 1);
        wire::Packet pkt;
        try {
            pkt = wire::decode(body);
        } catch (const Error&) {
            continue;
        }
        wire::SizeRole role;
        std::uint32_t n_eff = 2;
        switch (wire::type_of(pkt)) {
            case wire::MsgType::Request:
                role = relayed ? wire::SizeRole::SourceRelaying : wire::SizeRole::SourceDirect;
                break;
            case wire::MsgType::RelayedRequest:
                role = wire::SizeRole::IntermediateRequest;
                n_eff = static_cast<std::uint32_t>(
                            std::get<wire::RelayedRequestPacket>(pkt).hops.size()) + 2;
                break;
            case wire::MsgType::Reply:
                role = wire::SizeRole::DestinationDirect;
                break;
            case wire::MsgType::RelayedReply:
                role = wire::SizeRole::DestinationRelaying;
                n_eff = static_cast<std::uint32_t>(
                            std::get<wire::RelayedReplyPacket>(pkt).disclosed_keys.size()) + 2;
                break;
            default:
                continue;  // disclosures are not in the size model
        }
        if (!seen.insert({static_cast<int>(role), n_eff}).second) continue;
        out.push_back(wire::SizeObservation{role, n_eff, wire::encoded_bits(pkt)});
    }
    return out;
}

}  // namespace d2d::netsim
