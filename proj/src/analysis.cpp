#include "d2d/analysis.hpp"

#include <numeric>
#include <sstream>

namespace d2d::analysis {

// ---------------------------------------------------------------------------
// Rational
// ---------------------------------------------------------------------------

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (den == 0) throw Error("Rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational Rational::operator+(const Rational& o) const {
    return Rational(num * o.den + o.num * den, den * o.den);
}
Rational Rational::operator-(const Rational& o) const {
    return Rational(num * o.den - o.num * den, den * o.den);
}
Rational Rational::operator*(const Rational& o) const {
    return Rational(num * o.num, den * o.den);
}
Rational Rational::operator/(const Rational& o) const {
    if (o.num == 0) throw Error("Rational: division by zero");
    return Rational(num * o.den, den * o.num);
}
bool Rational::operator<(const Rational& o) const { return num * o.den < o.num * den; }

std::string Rational::str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

// ---------------------------------------------------------------------------
// Cost formulas
// ---------------------------------------------------------------------------

const char* cost_term_name(CostTerm t) {
    switch (t) {
        case CostTerm::Enc: return "Enc";
        case CostTerm::Dec: return "Dec";
        case CostTerm::H: return "H";
        case CostTerm::Mul: return "Mul";
        case CostTerm::EO: return "EO";
        case CostTerm::PA: return "PA";
        case CostTerm::Div: return "Div";
        case CostTerm::PO: return "PO";
    }
    return "?";
}

const char* protocol_name(Protocol p) {
    switch (p) {
        case Protocol::DD2D: return "DD2D";
        case Protocol::RD2D: return "RD2D";
        case Protocol::DD2DW: return "DD2DW";
        case Protocol::RD2DW: return "RD2DW";
        case Protocol::SDGA: return "SDGA";
        case Protocol::PPAKA: return "PPAKA";
        case Protocol::GRAAD: return "GRAAD";
        case Protocol::L_RSA: return "L_RSA";
        case Protocol::SeDS: return "SeDS";
    }
    return "?";
}

Protocol protocol_of(roles::Scenario s) {
    switch (s) {
        case roles::Scenario::DD2D: return Protocol::DD2D;
        case roles::Scenario::RD2D: return Protocol::RD2D;
        case roles::Scenario::DD2DW: return Protocol::DD2DW;
        case roles::Scenario::RD2DW: return Protocol::RD2DW;
    }
    throw Error("protocol_of: bad scenario");
}

CostMap eval_cost(Protocol protocol, std::uint32_t n) {
    if (n < 2) throw Error("eval_cost: n must be >= 2");
    std::int64_t nn = n;
    switch (protocol) {
        case Protocol::DD2D:
            return {{CostTerm::Enc, 3}, {CostTerm::H, 3}, {CostTerm::Dec, 1}};
        case Protocol::RD2D:
            return {{CostTerm::Enc, 3}, {CostTerm::H, 2 * nn + 1}, {CostTerm::Dec, 1}};
        case Protocol::DD2DW:
            return {{CostTerm::Enc, 1}, {CostTerm::H, 3}, {CostTerm::Dec, 1}};
        case Protocol::RD2DW:
            return {{CostTerm::Enc, 1}, {CostTerm::H, 2 * nn - 1}, {CostTerm::Dec, 1}};
        case Protocol::SDGA:
            return {{CostTerm::PA, 3 * (2 * nn - 1)},
                    {CostTerm::EO, 5 * nn},
                    {CostTerm::H, 4 * nn - 1},
                    {CostTerm::Mul, 2 * (2 * nn - 1)}};
        case Protocol::PPAKA:
            return {{CostTerm::EO, 2 * (2 * nn - 1)},
                    {CostTerm::H, nn * nn + 3 * nn - 4},
                    {CostTerm::Mul, 2 * nn * nn - 3 * nn + 1}};
        case Protocol::GRAAD:
            return {{CostTerm::PA, 2 * nn},
                    {CostTerm::H, 7 * (3 * nn - 2)},
                    {CostTerm::Enc, nn},
                    {CostTerm::Dec, nn},
                    {CostTerm::PO, 3 * (nn - 1)},
                    {CostTerm::EO, 8 * (nn - 1)},
                    {CostTerm::Mul, 2 * (nn - 1)}};
        case Protocol::L_RSA:
            return {{CostTerm::PO, 6 * nn},
                    {CostTerm::H, 13 * nn - 7},
                    {CostTerm::Mul, 3 * nn - 1},
                    {CostTerm::Div, 2}};
        case Protocol::SeDS:
            return {{CostTerm::PA, 2},
                    {CostTerm::EO, 5 * nn - 2},
                    {CostTerm::Dec, 1},
                    {CostTerm::H, 2 * nn + 1},
                    {CostTerm::PO, 4 * (nn - 1)},
                    {CostTerm::Enc, 2 * (nn - 1)}};
    }
    throw Error("eval_cost: bad protocol");
}

std::string format_cost(const CostMap& cost) {
    static constexpr CostTerm order[] = {CostTerm::Enc, CostTerm::H,  CostTerm::Dec,
                                         CostTerm::Mul, CostTerm::EO, CostTerm::PA,
                                         CostTerm::Div, CostTerm::PO};
    std::string out;
    for (CostTerm t : order) {
        auto it = cost.find(t);
        if (it == cost.end() || it->second == 0) continue;
        if (!out.empty()) out += "+";
        out += std::to_string(it->second);
        out += cost_term_name(t);
    }
    return out.empty() ? "0" : out;
}

// ---------------------------------------------------------------------------
// Reconciliation
// ---------------------------------------------------------------------------

bool ReconcileReport::zero_delta() const {
    for (const auto& row : rows)
        if (row.delta != 0) return false;
    return true;
}

std::string ReconcileReport::render() const {
    std::ostringstream out;
    out << "reconcile " << protocol_name(protocol) << " n=" << n << '\n';
    out << "category formula measured delta\n";
    for (const auto& row : rows) {
        out << cost_term_name(row.category) << ' ' << row.formula << ' ' << row.measured << ' '
            << row.delta << '\n';
    }
    return out.str();
}

ReconcileReport reconcile_counts(const crypto::OpCounters& counters, Protocol protocol,
                                 std::uint32_t n) {
    CostMap formula = eval_cost(protocol, n);
    auto coeff = [&](CostTerm t) -> std::int64_t {
        auto it = formula.find(t);
        return it == formula.end() ? 0 : it->second;
    };
    ReconcileReport report;
    report.protocol = protocol;
    report.n = n;
    report.rows = {
        ReconcileRow{CostTerm::Enc, coeff(CostTerm::Enc), static_cast<std::int64_t>(counters.enc),
                     static_cast<std::int64_t>(counters.enc) - coeff(CostTerm::Enc)},
        ReconcileRow{CostTerm::Dec, coeff(CostTerm::Dec), static_cast<std::int64_t>(counters.dec),
                     static_cast<std::int64_t>(counters.dec) - coeff(CostTerm::Dec)},
        ReconcileRow{CostTerm::H, coeff(CostTerm::H), static_cast<std::int64_t>(counters.hash),
                     static_cast<std::int64_t>(counters.hash) - coeff(CostTerm::H)},
    };
    return report;
}

ReconcileReport reconcile_counts(const netsim::EventTrace& trace, Protocol protocol,
                                 std::uint32_t n) {
    return reconcile_counts(trace.counters, protocol, n);
}

// ---------------------------------------------------------------------------
// Overhead
// ---------------------------------------------------------------------------

namespace {

void validate_params(const OverheadParams& p) {
    if (p.T < 1 || p.T_prime < 1 || p.T < p.T_prime)
        throw Error("overhead: need T >= T' >= 1");
    if (p.M < 1) throw Error("overhead: M must be >= 1");
    if (p.n < 2) throw Error("overhead: n must be >= 2");
    if (p.B < 1) throw Error("overhead: B must be >= 1");
}

}  // namespace

Rational eval_overhead_rd2d(const OverheadParams& p) {
    validate_params(p);
    return Rational(static_cast<std::int64_t>(p.T_prime) * p.M * (2 * std::int64_t{p.n} + 2),
                    static_cast<std::int64_t>(p.T));
}

Rational eval_overhead_sode(const OverheadParams& p, std::uint32_t neighbor_degree,
                            std::uint32_t devices_per_enodeb) {
    validate_params(p);
    std::int64_t broadcast = 2LL * p.B * devices_per_enodeb * neighbor_degree +
                             2LL * p.B * neighbor_degree * devices_per_enodeb;
    std::int64_t requests = 2LL * p.T_prime * p.M;
    return Rational(broadcast + requests, static_cast<std::int64_t>(p.T));
}

std::string emit_curves(const SweepSpec& spec) {
    std::ostringstream out;
    out << "x_name,x,rd2d_overhead,sode_overhead,n,T,T_prime,M,B,sode_devices,sode_neighbors\n";

    std::uint32_t x_min = spec.x_min;
    std::uint32_t x_max = spec.x_max;
    if (x_min == 0 && x_max == 0) {
        if (spec.axis == SweepAxis::Nodes) {
            x_min = 2;
            x_max = 20;
        } else {
            x_min = 1;
            x_max = static_cast<std::uint32_t>(spec.base.T);
        }
    }
    if (x_min > x_max) throw Error("emit_curves: empty sweep");

    char buf[64];
    for (std::uint32_t x = x_min; x <= x_max; ++x) {
        OverheadParams p = spec.base;
        const char* x_name = spec.axis == SweepAxis::Nodes ? "nodes" : "timeslots";
        if (spec.axis == SweepAxis::Nodes) p.n = x;
        else p.T_prime = x;

        std::uint32_t devices = spec.sode_devices ? spec.sode_devices : p.n;
        std::uint32_t neighbors = spec.sode_neighbors ? spec.sode_neighbors : p.B - 1;

        Rational rd2d = eval_overhead_rd2d(p);
        Rational sode = eval_overhead_sode(p, neighbors, devices);
        out << x_name << ',' << x << ',';
        std::snprintf(buf, sizeof(buf), "%.6f", rd2d.value());
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.6f", sode.value());
        out << buf << ',' << p.n << ',' << p.T << ',' << p.T_prime << ',' << p.M << ',' << p.B
            << ',' << devices << ',' << neighbors << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// CLI report rendering
// ---------------------------------------------------------------------------

std::string render_size_table(std::uint32_t n_min, std::uint32_t n_max, std::uint32_t ks) {
    std::ostringstream out;
    out << "packet size model (bits; bytes floored), ks=" << ks << "\n";
    out << "n source_direct source_relaying destination_direct destination_relaying"
           " intermediate_request intermediate_reply\n";
    for (std::uint32_t n = n_min; n <= n_max; ++n) {
        out << n;
        for (auto role : {wire::SizeRole::SourceDirect, wire::SizeRole::SourceRelaying,
                          wire::SizeRole::DestinationDirect, wire::SizeRole::DestinationRelaying,
                          wire::SizeRole::IntermediateRequest, wire::SizeRole::IntermediateReply}) {
            std::uint64_t bits = wire::model_size(role, n, ks);
            out << ' ' << bits << "b/" << bits / 8 << "B";
        }
        out << '\n';
    }
    out << "note: the direct-reply constant is 286 bits by convention; the concrete layout"
           " packs 284 (2-bit gap), and the relaying formula at n=2 gives 284.\n";
    return out.str();
}

std::string render_cost_table(const std::vector<std::uint32_t>& ns) {
    std::ostringstream out;
    out << "computation cost (symbolic evaluation)\n";
    static constexpr Protocol all[] = {Protocol::SDGA,  Protocol::PPAKA, Protocol::GRAAD,
                                       Protocol::L_RSA, Protocol::SeDS,  Protocol::DD2D,
                                       Protocol::RD2D,  Protocol::DD2DW, Protocol::RD2DW};
    for (Protocol p : all) {
        for (std::uint32_t n : ns) {
            out << protocol_name(p) << " n=" << n << ": " << format_cost(eval_cost(p, n))
                << '\n';
        }
    }
    return out.str();
}

std::string render_size_check(const std::vector<wire::SizeDelta>& deltas) {
    std::ostringstream out;
    out << "role n_eff model_bits concrete_bits delta\n";
    for (const auto& d : deltas) {
        out << wire::size_role_name(d.role) << ' ' << d.n_eff << ' ' << d.model_bits << ' '
            << d.concrete_bits << ' ' << d.delta_bits << '\n';
    }
    return out.str();
}

}  // namespace d2d::analysis
