// d2dsim: run the protocol simulator, check traces, and emit the analysis
// tables (sizes, costs, overhead sweeps).

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "d2d/analysis.hpp"
#include "d2d/netsim.hpp"
#include "d2d/properties.hpp"

namespace {

using namespace d2d;

int cmd_run(const std::string& config_path, const std::string& out_path,
            const std::vector<std::string>& overrides) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot open config: " << config_path << '\n';
        return 1;
    }
    netsim::ScenarioConfig cfg;
    try {
        cfg = netsim::parse_config(in);
        for (const auto& ov : overrides) {
            auto eq = ov.find('=');
            if (eq == std::string::npos) throw ConfigInvalid("override needs key=value: " + ov);
            netsim::apply_override(cfg, ov.substr(0, eq), ov.substr(eq + 1));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    netsim::EventTrace trace = netsim::run(cfg);
    std::string rendered = netsim::serialize_trace(trace);
    if (out_path.empty() || out_path == "-") {
        std::cout << rendered;
    } else {
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "error: cannot write trace: " << out_path << '\n';
            return 1;
        }
        out << rendered;
    }

    bool alerted = false;
    for (const auto& ev : trace.events)
        if (ev.kind == netsim::EventKind::IntruderAlert) alerted = true;
    if (trace.source_accepted && trace.destination_done && !alerted) return 0;
    std::cerr << "protocol did not complete cleanly: source_accepted=" << trace.source_accepted
              << " destination_done=" << trace.destination_done << " alert=" << alerted << '\n';
    return 2;
}

int cmd_check(const std::string& trace_path) {
    std::ifstream in(trace_path);
    if (!in) {
        std::cerr << "error: cannot open trace: " << trace_path << '\n';
        return 1;
    }
    netsim::EventTrace trace;
    try {
        trace = netsim::parse_trace(in);
    } catch (const std::exception& e) {
        std::cerr << "error: malformed trace: " << e.what() << '\n';
        return 1;
    }
    auto results = props::run_standard_checks(trace);
    std::cout << props::render_check_lines(trace, results);
    return props::all_pass(results) ? 0 : 3;
}

int cmd_analyze(const std::string& sweep, std::uint32_t m, std::uint32_t b, std::uint32_t n,
                std::uint64_t t, std::uint64_t t_prime, const std::string& out_path) {
    analysis::SweepSpec spec;
    if (sweep == "nodes") spec.axis = analysis::SweepAxis::Nodes;
    else if (sweep == "timeslots") spec.axis = analysis::SweepAxis::Timeslots;
    else {
        std::cerr << "error: --sweep must be nodes or timeslots\n";
        return 1;
    }
    spec.base.M = m;
    spec.base.B = b;
    spec.base.n = n;
    spec.base.T = t;
    spec.base.T_prime = t_prime;

    std::string csv;
    try {
        csv = analysis::emit_curves(spec);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        std::ofstream out(out_path);
        if (!out) {
            std::cerr << "error: cannot write csv: " << out_path << '\n';
            return 1;
        }
        out << csv;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"secure D2D protocol simulator and analysis tool"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a scenario from a config file");
    std::string config_path, trace_out;
    std::vector<std::string> overrides;
    run->add_option("--config", config_path, "scenario config file")->required();
    run->add_option("--out", trace_out, "trace output path (default stdout)");
    run->add_option("--set", overrides, "key=value config override (repeatable)");

    // check
    auto* check = app.add_subcommand("check", "evaluate trace properties");
    std::string trace_path;
    check->add_option("--trace", trace_path, "trace file to check")->required();

    // analyze
    auto* analyze = app.add_subcommand("analyze", "emit overhead sweep CSV");
    std::string sweep;
    std::uint32_t m = 1, b = 2, n = 10;
    std::uint64_t t = 20, t_prime = 10;
    std::string csv_out;
    analyze->add_option("--sweep", sweep, "sweep axis: nodes | timeslots")->required();
    analyze->add_option("--m", m, "requests per slot (default 1)");
    analyze->add_option("--b", b, "eNodeB count (default 2)");
    analyze->add_option("--n", n, "node count for timeslot sweeps (default 10)");
    analyze->add_option("--t", t, "total slots (default 20)");
    analyze->add_option("--t-prime", t_prime, "request slots for node sweeps (default 10)");
    analyze->add_option("--out", csv_out, "CSV output path (default stdout)");

    // sizes
    auto* sizes = app.add_subcommand("sizes", "print the packet size model");
    std::uint32_t n_min = 2, n_max = 20, ks = 256;
    sizes->add_option("--n-min", n_min, "smallest n (default 2)");
    sizes->add_option("--n-max", n_max, "largest n (default 20)");
    sizes->add_option("--ks", ks, "TESLA key size in bits (default 256)");

    // costs
    auto* costs = app.add_subcommand("costs", "print the computation cost table");
    std::vector<std::uint32_t> cost_ns{2, 3, 5, 10, 20};
    costs->add_option("--n", cost_ns, "node counts to evaluate");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, trace_out, overrides);
        if (check->parsed()) return cmd_check(trace_path);
        if (analyze->parsed()) return cmd_analyze(sweep, m, b, n, t, t_prime, csv_out);
        if (sizes->parsed()) {
            if (n_min < 2 || n_min > n_max) {
                std::cerr << "error: need 2 <= n-min <= n-max\n";
                return 1;
            }
            std::cout << analysis::render_size_table(n_min, n_max, ks);
            return 0;
        }
        if (costs->parsed()) {
            for (auto v : cost_ns)
                if (v < 2) {
                    std::cerr << "error: n must be >= 2\n";
                    return 1;
                }
            std::cout << analysis::render_cost_table(cost_ns);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
