#include "d2d/properties.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace d2d::props {

namespace {

bool is_relay_pair(PEventKind commit_kind) {
    return commit_kind == PEventKind::AcceptsServerClient;
}

bool same_argument(const ProtocolEvent& commit, const ProtocolEvent& running, bool match_subject) {
    if (commit.value != running.value) return false;
    if (match_subject && commit.subject != running.subject) return false;
    return true;
}

}  // namespace

bool check_reachability(const netsim::EventTrace& trace, RoleTag role) {
    for (const auto& ev : trace.protocol_events)
        if (ev.kind == PEventKind::Reachable && ev.role == role) return true;
    return false;
}

bool check_correspondence(const netsim::EventTrace& trace, PEventKind commit_kind,
                          PEventKind running_kind, bool injective) {
    const auto& events = trace.protocol_events;
    bool match_subject = is_relay_pair(commit_kind) && running_kind == PEventKind::ClientRunning;

    std::vector<char> used(events.size(), 0);
    for (size_t c = 0; c < events.size(); ++c) {
        if (events[c].kind != commit_kind) continue;
        bool matched = false;
        for (size_t r = 0; r < c; ++r) {
            if (events[r].kind != running_kind) continue;
            if (injective && used[r]) continue;
            if (!same_argument(events[c], events[r], match_subject)) continue;
            used[r] = 1;
            matched = true;
            break;
        }
        if (!matched) return false;
    }
    return true;
}

bool check_secrecy(const netsim::EventTrace& trace, ByteView secret) {
    return !trace.knows(secret);
}

bool check_key_agreement(const netsim::EventTrace& trace) {
    const Bytes* source_key = nullptr;
    const Bytes* dest_key = nullptr;
    const Bytes* mme_key = nullptr;
    for (const auto& ev : trace.protocol_events) {
        if (ev.kind == PEventKind::SourceCommit) source_key = &ev.value;
        if (ev.kind == PEventKind::DestinationCommit) dest_key = &ev.value;
        if (ev.kind == PEventKind::MmeCommit) mme_key = &ev.value;
    }
    return source_key && dest_key && mme_key && *source_key == *dest_key &&
           *source_key == *mme_key;
}

std::vector<CheckResult> run_standard_checks(const netsim::EventTrace& trace) {
    std::vector<CheckResult> out;
    bool infra = roles::has_infrastructure(trace.scenario);
    bool relayed = roles::is_relayed(trace.scenario);

    out.push_back({"reachable_source", check_reachability(trace, RoleTag::Source)});
    out.push_back({"reachable_destination", check_reachability(trace, RoleTag::Destination)});
    if (infra) out.push_back({"reachable_mme", check_reachability(trace, RoleTag::Mme)});
    if (relayed) {
        std::set<NodeId> reached;
        for (const auto& ev : trace.protocol_events)
            if (ev.kind == PEventKind::Reachable && ev.role == RoleTag::Relay)
                reached.insert(ev.node);
        out.push_back({"reachable_relays", reached.size() == trace.n - 2});
    }

    struct Pair {
        const char* name;
        PEventKind commit;
        PEventKind running;
    };
    std::vector<Pair> pairs;
    if (infra) {
        pairs.push_back({"SourceCommit_mmeRunning", PEventKind::SourceCommit,
                         PEventKind::MmeRunning});
        pairs.push_back({"mmeCommit_SourceRunning", PEventKind::MmeCommit,
                         PEventKind::SourceRunning});
        pairs.push_back({"DestinationCommit_mmeRunning", PEventKind::DestinationCommit,
                         PEventKind::MmeRunning});
    } else {
        pairs.push_back({"SourceCommit_DestinationRunning", PEventKind::SourceCommit,
                         PEventKind::DestinationRunning});
    }
    pairs.push_back({"termDestination_SourceRunning", PEventKind::TermDestination,
                     PEventKind::SourceRunning});
    pairs.push_back({"acceptsServerDestination_DestinationRunning",
                     PEventKind::AcceptsServerDestination, PEventKind::DestinationRunning});
    if (relayed)
        pairs.push_back({"acceptsServerClient_ClientRunning", PEventKind::AcceptsServerClient,
                         PEventKind::ClientRunning});

    for (const auto& p : pairs) {
        out.push_back({std::string("corr_") + p.name,
                       check_correspondence(trace, p.commit, p.running, false)});
        out.push_back({std::string("inj_") + p.name,
                       check_correspondence(trace, p.commit, p.running, true)});
    }

    out.push_back({"secrecy_m", check_secrecy(trace, trace.secret_message)});
    if (infra) out.push_back({"key_agreement", check_key_agreement(trace)});
    return out;
}

std::string render_check_lines(const netsim::EventTrace& trace,
                               const std::vector<CheckResult>& results) {
    std::ostringstream out;
    for (const auto& r : results)
        out << "CHECK " << r.name << ' ' << roles::scenario_name(trace.scenario) << ' '
            << (r.pass ? "true" : "false") << '\n';
    return out.str();
}

bool all_pass(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(),
                       [](const CheckResult& r) { return r.pass; });
}

}  // namespace d2d::props
