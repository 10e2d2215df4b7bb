#include "d2d/events.hpp"

namespace d2d {

const char* pevent_name(PEventKind kind) {
    switch (kind) {
        case PEventKind::SourceRunning: return "SourceRunning";
        case PEventKind::MmeRunning: return "mmeRunning";
        case PEventKind::DestinationRunning: return "DestinationRunning";
        case PEventKind::ClientRunning: return "ClientRunning";
        case PEventKind::SourceCommit: return "SourceCommit";
        case PEventKind::MmeCommit: return "mmeCommit";
        case PEventKind::DestinationCommit: return "DestinationCommit";
        case PEventKind::AcceptsServerClient: return "acceptsServerClient";
        case PEventKind::AcceptsServerDestination: return "acceptsServerDestination";
        case PEventKind::TermDestination: return "termDestination";
        case PEventKind::Reachable: return "Reachable";
    }
    return "?";
}

const char* role_name(RoleTag role) {
    switch (role) {
        case RoleTag::Source: return "source";
        case RoleTag::Destination: return "destination";
        case RoleTag::Mme: return "mme";
        case RoleTag::Relay: return "relay";
    }
    return "?";
}

}  // namespace d2d
