#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "d2d/netsim.hpp"
#include "d2d/properties.hpp"

namespace {

std::string g_binary;  // path to the d2dsim executable, passed by ctest
std::filesystem::path g_dir;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout only
};

RunResult invoke(const std::string& args) {
    std::string cmd = g_binary + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) result.output.append(buf, got);
    int status = pclose(pipe);
    result.exit_code = WEXITSTATUS(status);
    return result;
}

std::filesystem::path write_file(const std::string& name, const std::string& content) {
    auto path = g_dir / name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("run: honest config exits 0 and writes a parseable trace") {
    auto cfg = write_file("dd2d.cfg", "scenario DD2D\nn 2\nseed 7\n");
    auto trace_path = g_dir / "dd2d.trace";
    auto r = invoke("run --config " + cfg.string() + " --out " + trace_path.string());
    CHECK(r.exit_code == 0);

    std::ifstream in(trace_path);
    REQUIRE(in.good());
    auto trace = d2d::netsim::parse_trace(in);
    CHECK(trace.source_accepted);
    CHECK(trace.destination_plaintext == trace.secret_message);
}

TEST_CASE("run: tamper adversary exits 2 with an alert in the trace") {
    auto cfg = write_file("tampered.cfg",
                          "scenario DD2D\nn 2\nseed 7\nadv: 2 tamper kind=request bit=300\n");
    auto trace_path = g_dir / "tampered.trace";
    auto r = invoke("run --config " + cfg.string() + " --out " + trace_path.string());
    CHECK(r.exit_code == 2);

    std::ifstream in(trace_path);
    auto trace = d2d::netsim::parse_trace(in);
    bool alerted = false;
    for (const auto& ev : trace.events)
        if (ev.kind == d2d::netsim::EventKind::IntruderAlert) alerted = true;
    CHECK(alerted);
}

TEST_CASE("run: bad inputs exit 1") {
    CHECK(invoke("run --config /nonexistent.cfg").exit_code == 1);
    auto cfg = write_file("bad.cfg", "scenario DD2D\nn 9\n");
    CHECK(invoke("run --config " + cfg.string()).exit_code == 1);
    auto cfg2 = write_file("override.cfg", "scenario DD2D\nn 2\n");
    CHECK(invoke("run --config " + cfg2.string() + " --set nonsense=1").exit_code == 1);
}

TEST_CASE("check: honest trace passes, sabotaged trace exits 3, garbage exits 1") {
    using namespace d2d;
    auto honest_cfg = netsim::default_config(roles::Scenario::RD2D, 4);
    honest_cfg.adversary.actions.push_back({0, netsim::AdvKind::EavesdropAll, {}, 0, 0, {}});
    auto honest = netsim::run(honest_cfg);
    auto trace_path = write_file("honest.trace", netsim::serialize_trace(honest));
    auto r = invoke("check --trace " + trace_path.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("CHECK secrecy_m RD2D true") != std::string::npos);
    CHECK(r.output.find("false") == std::string::npos);

    // replay with the protection hook off: injective correspondence breaks
    auto hooked_cfg = netsim::default_config(roles::Scenario::DD2D, 2);
    hooked_cfg.W = 4;
    hooked_cfg.hook_disable_replay_protection = true;
    hooked_cfg.adversary.actions.push_back({0, netsim::AdvKind::EavesdropAll, {}, 0, 0, {}});
    hooked_cfg.adversary.actions.push_back(
        {3, netsim::AdvKind::Replay, wire::MsgType::Request, 0, 0, {}});
    auto hooked = netsim::run(hooked_cfg);
    auto hooked_path = write_file("hooked.trace", netsim::serialize_trace(hooked));
    auto r2 = invoke("check --trace " + hooked_path.string());
    CHECK(r2.exit_code == 3);
    CHECK(r2.output.find("inj_DestinationCommit_mmeRunning DD2D false") != std::string::npos);

    auto garbage_path = write_file("garbage.trace", "this is not a trace\n");
    CHECK(invoke("check --trace " + garbage_path.string()).exit_code == 1);
}

TEST_CASE("analyze: sweeps, identical rd2d columns across B, flag validation") {
    auto r = invoke("analyze --sweep timeslots --m 1");
    CHECK(r.exit_code == 0);
    size_t rows = 0;
    for (char c : r.output)
        if (c == '\n') ++rows;
    CHECK(rows == 21);  // header + T' = 1..20

    auto b2 = invoke("analyze --sweep nodes --b 2");
    auto b7 = invoke("analyze --sweep nodes --b 7");
    auto extract = [](const std::string& csv, size_t col) {
        std::vector<std::string> vals;
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            size_t start = 0;
            for (size_t i = 0; i < col; ++i) start = line.find(',', start) + 1;
            vals.push_back(line.substr(start, line.find(',', start) - start));
        }
        return vals;
    };
    CHECK(extract(b2.output, 2) == extract(b7.output, 2));
    CHECK(extract(b2.output, 3) != extract(b7.output, 3));

    CHECK(invoke("analyze --sweep sideways").exit_code == 1);
}

TEST_CASE("sizes and costs print the published anchors") {
    auto sizes = invoke("sizes --n-max 20");
    CHECK(sizes.exit_code == 0);
    CHECK(sizes.output.find("5300") != std::string::npos);
    CHECK(sizes.output.find("5036") != std::string::npos);
    CHECK(sizes.output.find("284") != std::string::npos);
    CHECK(sizes.output.find("286") != std::string::npos);

    auto costs = invoke("costs --n 10");
    CHECK(costs.exit_code == 0);
    CHECK(costs.output.find("3Enc+21H+1Dec") != std::string::npos);

    CHECK(invoke("sizes --n-min 1").exit_code == 1);
}

int main(int argc, char** argv) {
    doctest::Context context;
    // the last non-option argument is the path to the d2dsim binary
    std::vector<char*> pass;
    for (int i = 0; i < argc; ++i) {
        if (i > 0 && argv[i][0] != '-' && g_binary.empty()) {
            g_binary = argv[i];
            continue;
        }
        pass.push_back(argv[i]);
    }
    if (g_binary.empty()) {
        std::fprintf(stderr, "usage: test_cli <path-to-d2dsim>\n");
        return 1;
    }
    g_dir = std::filesystem::temp_directory_path() / "d2dsim_cli_test";
    std::filesystem::create_directories(g_dir);
    context.applyCommandLine(static_cast<int>(pass.size()), pass.data());
    return context.run();
}
