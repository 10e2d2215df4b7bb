#pragma once

#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "d2d/events.hpp"
#include "d2d/roles.hpp"
#include "d2d/wire.hpp"

namespace d2d::netsim {

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

struct Topology {
    NodeId source = 0;
    NodeId destination = 0;
    std::vector<NodeId> relays;  // request-path order, source side first
    NodeId mme = 0;
    bool has_mme = false;
    std::map<NodeId, std::set<NodeId>> adjacency;  // symmetric D2D radio range
    std::set<NodeId> cellular_coverage;
    std::uint32_t enodeb_count = 1;

    std::vector<NodeId> d2d_nodes() const;
    bool adjacent(NodeId a, NodeId b) const;
};

// ---------------------------------------------------------------------------
// Adversary
// ---------------------------------------------------------------------------

enum class AdvKind : std::uint8_t { Drop, Replay, Tamper, Inject, EavesdropAll };

/// One scripted action. The adversary owns the D2D broadcast channel only;
/// the cellular channel is out of its reach.
struct AdvAction {
    Slot slot = 0;
    AdvKind kind = AdvKind::EavesdropAll;
    wire::MsgType match = wire::MsgType::Request;  // drop / tamper / replay
    std::uint32_t nth = 0;      // pick among multiple matches in the slot
    std::uint32_t bit_index = 0;  // tamper
    Bytes raw;                  // inject
};

struct AdversaryScript {
    std::vector<AdvAction> actions;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ScenarioConfig {
    roles::Scenario scenario = roles::Scenario::DD2D;
    std::uint32_t n = 2;        // source + relays + destination
    std::uint64_t seed = 1;
    Slot T = 20;                // total timeslots
    Slot T_prime = 10;          // request timeslots (overhead model input)
    std::uint32_t M = 1;        // requests per slot (overhead model input)
    std::uint32_t B = 2;        // eNodeB count (overhead model input)
    Slot W = 2;                 // freshness window
    std::uint32_t tesla_L = 32;
    Slot tesla_interval = 1;
    AdversaryScript adversary;

    // Programmatic test hooks; not part of the config file vocabulary.
    bool hook_disable_replay_protection = false;
    bool hook_mme_distinct_keys = false;
    bool hook_leak_session_key = false;
};

ScenarioConfig default_config(roles::Scenario scenario, std::uint32_t n);

/// Throws NoCoverage unless both endpoints sit in cellular coverage; the
/// infrastructure-less scenarios have empty coverage, so any cellular use
/// there is a programming error surfaced here.
void require_coverage(const Topology& topo, NodeId from, NodeId to);

/// Flat key-value text: one `key value` pair per line, `#` comments, and
/// adversary actions on lines prefixed `adv:`. Throws ConfigInvalid on
/// unknown keys or malformed values.
ScenarioConfig parse_config(std::istream& in);
ScenarioConfig parse_config_string(const std::string& text);

/// Applies `key=value` overrides for the same vocabulary as the file format.
void apply_override(ScenarioConfig& cfg, const std::string& key, const std::string& value);

Topology build_topology(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Events and traces
// ---------------------------------------------------------------------------

enum class EventKind : std::uint8_t {
    Send = 1,
    Deliver,
    Drop,
    StateTransition,
    Protocol,
    IntruderAlert,
    AttackerKnowledge,
    Meta,
};

const char* event_kind_name(EventKind kind);

inline constexpr std::uint8_t kChannelD2d = 0;
inline constexpr std::uint8_t kChannelCellular = 1;

/// Events are totally ordered by (slot, seq); seq is globally monotone.
struct SimEvent {
    Slot slot = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Meta;
    NodeId node = 0;
    Bytes payload;

    bool operator==(const SimEvent&) const = default;
};

struct EventTrace {
    std::vector<SimEvent> events;
    ProtocolEventLog protocol_events;   // projection of the Protocol events
    std::vector<Bytes> attacker_knowledge;  // final closure, sorted
    crypto::OpCounters counters;
    std::map<std::string, std::string> meta;

    roles::Scenario scenario = roles::Scenario::DD2D;
    std::uint32_t n = 2;
    Bytes secret_message;
    Bytes session_key;
    Bytes destination_plaintext;
    bool source_accepted = false;
    bool destination_done = false;

    bool knows(ByteView value) const;
};

/// Runs one protocol session end to end under the scripted adversary.
/// Deterministic: the trace is a pure function of the config (seed included).
EventTrace run(const ScenarioConfig& cfg);

// Stable line format: `slot seq kind node payload-hex`, one event per line.
std::string serialize_trace(const EventTrace& trace);
EventTrace parse_trace(std::istream& in);
EventTrace parse_trace_string(const std::string& text);

Bytes encode_protocol_event(const ProtocolEvent& ev);
ProtocolEvent decode_protocol_event(Slot slot, NodeId node, ByteView payload);

// Trace scans used by the verification suites.

/// Slots at which each chain key of each owner may first appear on the air;
/// returns true iff no D2D payload in the trace carries a key before its
/// disclosure slot. Chains are rebuilt from the config, so this is an
/// end-to-end check over actual packet bytes.
bool scan_no_early_key_release(const ScenarioConfig& cfg, const EventTrace& trace);

/// True iff no attacker-knowledge event was derived from cellular traffic
/// (cellular payloads never intersect the knowledge set).
bool scan_channel_isolation(const EventTrace& trace);

/// Concrete packet-size observations for the size checker: every distinct
/// (role, n_eff) seen on the air.
std::vector<wire::SizeObservation> collect_size_observations(const EventTrace& trace);

}  // namespace d2d::netsim
