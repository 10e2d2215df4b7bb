#pragma once

#include <cstdint>
#include <vector>

#include "d2d/bytes.hpp"
#include "d2d/tesla.hpp"

namespace d2d {

/// Correspondence/reachability event kinds, mirroring the protocol's
/// verification query vocabulary: Running fires when a party first uses a
/// key, Commit when it finalizes agreement on one.
enum class PEventKind : std::uint8_t {
    SourceRunning = 1,
    MmeRunning,
    DestinationRunning,
    ClientRunning,             // a relay uses its TESLA interval key
    SourceCommit,
    MmeCommit,
    DestinationCommit,
    AcceptsServerClient,       // source authenticated a relay's hop MAC
    AcceptsServerDestination,  // source authenticated the destination's reply
    TermDestination,           // destination finished, all checks passed
    Reachable,
};

enum class RoleTag : std::uint8_t { Source = 1, Destination, Mme, Relay };

struct ProtocolEvent {
    PEventKind kind{};
    Slot slot = 0;
    NodeId node = 0;     // emitter
    NodeId subject = 0;  // relay identity for ClientRunning / AcceptsServerClient
    RoleTag role = RoleTag::Source;  // meaningful for Reachable
    Bytes value;         // key bytes the event argues about

    bool operator==(const ProtocolEvent&) const = default;
};

const char* pevent_name(PEventKind kind);
const char* role_name(RoleTag role);

using ProtocolEventLog = std::vector<ProtocolEvent>;

}  // namespace d2d
