#pragma once

#include <string>
#include <vector>

#include "d2d/events.hpp"
#include "d2d/netsim.hpp"

namespace d2d::props {

/// True iff a Reachable event for the role occurs in the trace.
bool check_reachability(const netsim::EventTrace& trace, RoleTag role);

/// Non-injective: every commit-kind event with key k is preceded by a
/// running-kind event with k. Injective: additionally the commits map
/// one-to-one onto distinct preceding running events (greedy earliest
/// matching, which is exact for this ordering structure). Relay events are
/// matched per relay identity. Vacuously true with zero commits.
bool check_correspondence(const netsim::EventTrace& trace, PEventKind commit_kind,
                          PEventKind running_kind, bool injective);

/// True iff the value never entered the attacker-knowledge closure.
bool check_secrecy(const netsim::EventTrace& trace, ByteView secret);

/// Source, destination, and MME all committed to the identical key.
bool check_key_agreement(const netsim::EventTrace& trace);

struct CheckResult {
    std::string name;
    bool pass = false;
};

/// The full per-scenario battery: reachability for every present role, the
/// scenario's correspondence pairs in both flavours, message secrecy, and
/// key agreement where a network issued the key.
std::vector<CheckResult> run_standard_checks(const netsim::EventTrace& trace);

/// `CHECK <name> <scenario> <true|false>` lines.
std::string render_check_lines(const netsim::EventTrace& trace,
                               const std::vector<CheckResult>& results);

bool all_pass(const std::vector<CheckResult>& results);

}  // namespace d2d::props
