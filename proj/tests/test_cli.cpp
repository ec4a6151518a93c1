// Scenario-layer tests: config parsing with line-tagged errors, overrides,
// CSV-name mangling, the end-to-end scenario runner's output directory, and
// deterministic report rendering.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "ricci/scenario.hpp"
#include "test_support.hpp"

using namespace ricci;
namespace fs = std::filesystem;

namespace {

Scenario parseText(const std::string& text) {
    std::stringstream ss(text);
    return parseConfig(ss, "cfg");
}

/// Parse `text` expecting a ConfigError whose message contains `needle`.
void expectConfigError(const std::string& text, const std::string& needle) {
    try {
        parseText(text);
        FAIL("expected ConfigError for: " << text);
    } catch (const ConfigError& e) {
        const std::string got = e.what();
        CAPTURE(text, got, needle);
        REQUIRE(got.find(needle) != std::string::npos);
    }
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path freshDir(const std::string& leaf) {
    const fs::path base = fs::temp_directory_path() / "ricci_cli_test";
    const fs::path dir = base / leaf;
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("parseConfig reads every key and applies defaults", "[cli][config]") {
    SECTION("full round trip") {
        const Scenario sc = parseText(
            "# full config\n"
            "name = full\n"
            "initial = dumbbell\n"
            "n = 4\n"
            "N = 33\n"
            "r0 = 2.5\n"
            "neck_radius = 0.3\n"
            "cap_radius = 1.5\n"
            "neck_width = 0.75\n"
            "stop = time\n"
            "t_end = 0.125\n"
            "q_max = 5e5\n"
            "snapshot_every = 12\n"
            "cfl_safety = 0.2\n"
            "curvature_safety = 0.05\n"
            "rescale = false\n"
            "max_windows = 5\n"
            "model_radius = 3.5\n"
            "gronwall_c = 0.5\n"
            "growth_factor = 8\n"
            "criteria = intSupRic spaceTimeLp:p=2.5 logWeighted:delta=0.2\n");
        REQUIRE(sc.name == "full");
        REQUIRE(sc.initial == "dumbbell");
        REQUIRE(sc.n == 4);
        REQUIRE(sc.N == 33);
        REQUIRE(sc.r0 == 2.5);
        REQUIRE(sc.neckRadius == 0.3);
        REQUIRE(sc.capRadius == 1.5);
        REQUIRE(sc.neckWidth == 0.75);
        REQUIRE(sc.stop == "time");
        REQUIRE(sc.tEnd == 0.125);
        REQUIRE(sc.control.qMax == 5e5);
        REQUIRE(sc.control.snapshotEvery == 12);
        REQUIRE(sc.control.cflSafety == 0.2);
        REQUIRE(sc.control.curvatureSafety == 0.05);
        REQUIRE_FALSE(sc.rescale);
        REQUIRE(sc.maxWindows == 5);
        REQUIRE(sc.modelRadius == 3.5);
        REQUIRE(sc.gronwallC == 0.5);
        REQUIRE(sc.growthFactor == 8.0);
        REQUIRE(sc.criteria.size() == 3);
        REQUIRE(sc.criteria[0].kind == CriterionKind::IntSupRic);
        REQUIRE(sc.criteria[0].label == "intSupRic");
        REQUIRE(sc.criteria[1].kind == CriterionKind::SpaceTimeLp);
        REQUIRE(sc.criteria[1].p == 2.5);
        REQUIRE(sc.criteria[1].label == "spaceTimeLp:p=2.5");
        REQUIRE(sc.criteria[2].kind == CriterionKind::LogWeighted);
        REQUIRE(sc.criteria[2].delta == 0.2);
    }
    SECTION("defaults when nothing is given") {
        const Scenario sc = parseText("");
        REQUIRE(sc.name == "run");
        REQUIRE(sc.initial == "sphere");
        REQUIRE(sc.n == 3);
        REQUIRE(sc.N == 257);
        REQUIRE(sc.stop == "blowup");
        REQUIRE(sc.rescale);
        REQUIRE(sc.criteria.size() == 3);
        REQUIRE(sc.criteria[0].kind == CriterionKind::IntSupRic);
        REQUIRE(sc.criteria[1].kind == CriterionKind::SpaceTimeLp);
        REQUIRE(sc.criteria[1].p == 2.0);
        REQUIRE(sc.criteria[2].kind == CriterionKind::LogWeighted);
    }
    SECTION("comments and blank lines are ignored") {
        const Scenario sc = parseText(
            "\n   \n# top\nname = x # trailing\n\nN = 65\n");
        REQUIRE(sc.name == "x");
        REQUIRE(sc.N == 65);
    }
}

TEST_CASE("parseConfig errors carry source and line", "[cli][config]") {
    expectConfigError("bogus = 1\n", "cfg:1: unknown key 'bogus'");
    expectConfigError("r0 = abc\n", "cfg:1: not a number: 'abc'");
    expectConfigError("N = 3.5\n", "cfg:1: not an integer");
    expectConfigError("initial = torus\n", "initial must be sphere or dumbbell");
    expectConfigError("stop = never\n", "stop must be blowup or time");
    expectConfigError("rescale = yes\n", "rescale must be true or false");
    expectConfigError("hello\n", "cfg:1: expected key = value");
    expectConfigError("= 3\n", "cfg:1: empty key");
    expectConfigError("criteria = fooBar\n", "unknown criterion 'fooBar'");
    expectConfigError("criteria = spaceTimeLp:p2\n", "is not key=value");
    expectConfigError("criteria = spaceTimeLp:q=2\n",
                      "unknown criterion parameter 'q'");
    expectConfigError("n = 2\n", "n must be >= 3");
    expectConfigError("N = 16\n", "N must be >= 17");
    // The line number points at the offending line, not the first.
    expectConfigError("name = ok\nN = 65\nr0 = ??\n", "cfg:3:");
    REQUIRE_THROWS_AS(parseConfigFile("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("withOverride replaces exactly the named field", "[cli][config]") {
    const Scenario base = parseText("");
    struct Case {
        const char* key;
        const char* value;
        std::function<bool(const Scenario&)> check;
    };
    const std::vector<Case> cases = {
        {"name", "swept", [](const Scenario& s) { return s.name == "swept"; }},
        {"initial", "dumbbell",
         [](const Scenario& s) { return s.initial == "dumbbell"; }},
        {"n", "5", [](const Scenario& s) { return s.n == 5; }},
        {"N", "129", [](const Scenario& s) { return s.N == 129; }},
        {"r0", "0.8", [](const Scenario& s) { return s.r0 == 0.8; }},
        {"neck_radius", "0.4",
         [](const Scenario& s) { return s.neckRadius == 0.4; }},
        {"cap_radius", "2.0",
         [](const Scenario& s) { return s.capRadius == 2.0; }},
        {"neck_width", "0.6",
         [](const Scenario& s) { return s.neckWidth == 0.6; }},
        {"stop", "time", [](const Scenario& s) { return s.stop == "time"; }},
        {"t_end", "0.3", [](const Scenario& s) { return s.tEnd == 0.3; }},
        {"q_max", "123.0",
         [](const Scenario& s) { return s.control.qMax == 123.0; }},
        {"snapshot_every", "7",
         [](const Scenario& s) { return s.control.snapshotEvery == 7; }},
        {"cfl_safety", "0.25",
         [](const Scenario& s) { return s.control.cflSafety == 0.25; }},
        {"curvature_safety", "0.04",
         [](const Scenario& s) { return s.control.curvatureSafety == 0.04; }},
        {"rescale", "false", [](const Scenario& s) { return !s.rescale; }},
        {"max_windows", "4",
         [](const Scenario& s) { return s.maxWindows == 4; }},
        {"model_radius", "2.5",
         [](const Scenario& s) { return s.modelRadius == 2.5; }},
        {"gronwall_c", "0.1",
         [](const Scenario& s) { return s.gronwallC == 0.1; }},
        {"growth_factor", "12",
         [](const Scenario& s) { return s.growthFactor == 12.0; }},
        {"criteria", "spaceTimeLp:p=3", [](const Scenario& s) {
             return s.criteria.size() == 1 &&
                    s.criteria[0].kind == CriterionKind::SpaceTimeLp &&
                    s.criteria[0].p == 3.0;
         }},
    };
    for (const Case& c : cases) {
        CAPTURE(c.key);
        const Scenario sc = withOverride(base, c.key, c.value);
        REQUIRE(c.check(sc));
        // Everything else is untouched (spot check a disjoint field).
        if (std::string(c.key) != "name") REQUIRE(sc.name == base.name);
        if (std::string(c.key) != "N") REQUIRE(sc.N == base.N);
    }
    REQUIRE_THROWS_AS(withOverride(base, "nope", "1"), ConfigError);
    REQUIRE_THROWS_AS(withOverride(base, "N", "abc"), ConfigError);
}

TEST_CASE("csvName mangles criterion labels predictably", "[cli][config]") {
    REQUIRE(detail::csvName("intSupRic") == "intSupRic");
    REQUIRE(detail::csvName("logWeighted") == "logWeighted");
    REQUIRE(detail::csvName("spaceTimeLp:p=2.5") == "spaceTimeLp_p_2.5");
    REQUIRE(detail::csvName("spaceTimeLp(p=2)") == "spaceTimeLp_p_2");
    REQUIRE(detail::csvName("a(b),c") == "a_b_c");
}

TEST_CASE("runScenario writes a deterministic output directory",
          "[cli][scenario]") {
    const Scenario sc = parseText(
        "name = tiny\n"
        "initial = sphere\n"
        "N = 65\n"
        "q_max = 300\n"
        "snapshot_every = 64\n");

    const fs::path dirA = freshDir("run_a");
    const fs::path dirB = freshDir("run_b");
    const ScenarioResult ra = runScenario(sc, dirA.string());
    const ScenarioResult rb = runScenario(sc, dirB.string());

    REQUIRE(ra.exitCode == 0);
    REQUIRE(ra.message == "ok");
    REQUIRE(ra.stopReason == StopReason::CurvatureCeiling);
    REQUIRE(ra.finalSupRm >= 300.0);
    REQUIRE(ra.outDir == dirA.string());

    SECTION("expected files and meta keys") {
        for (const char* f :
             {"trajectory.csv", "criteria_intSupRic.csv",
              "criteria_spaceTimeLp_p_2.csv", "criteria_logWeighted.csv",
              "meta.txt"})
            REQUIRE(fs::exists(dirA / f));

        const auto meta = readMeta(dirA.string());
        for (const char* k :
             {"name", "initial", "n", "N", "stop_reason", "steps", "snapshots",
              "remesh_count", "final_time", "final_supRm", "volume_final",
              "pole_slope_drift", "verdict", "criterion_intSupRic_total",
              "criterion_spaceTimeLp_p_2_total",
              "criterion_logWeighted_total"}) {
            CAPTURE(k);
            REQUIRE(meta.count(k) == 1);
        }
        REQUIRE(meta.at("name") == "tiny");
        REQUIRE(meta.at("initial") == "sphere");
        REQUIRE(meta.at("n") == "3");
        REQUIRE(meta.at("stop_reason") == "curvature-ceiling");

        // trajectory.csv has one header plus one row per snapshot.
        const std::string traj = slurp(dirA / "trajectory.csv");
        const size_t rows = size_t(std::count(traj.begin(), traj.end(), '\n'));
        REQUIRE(rows == 1 + std::stoul(meta.at("snapshots")));
    }
    SECTION("byte-identical across runs") {
        for (const char* f :
             {"trajectory.csv", "criteria_intSupRic.csv",
              "criteria_spaceTimeLp_p_2.csv", "criteria_logWeighted.csv",
              "meta.txt"}) {
            CAPTURE(f);
            REQUIRE(slurp(dirA / f) == slurp(dirB / f));
        }
    }
    SECTION("report renders deterministically from the directory") {
        renderReport(dirA.string());
        REQUIRE(fs::exists(dirA / "report.txt"));
        const std::string first = slurp(dirA / "report.txt");
        renderReport(dirA.string());
        REQUIRE(slurp(dirA / "report.txt") == first);
        REQUIRE(first.find("flow report: tiny") != std::string::npos);
        REQUIRE(first.find("verdict:") != std::string::npos);
        REQUIRE(first.find("stop reason      : curvature-ceiling") !=
                std::string::npos);
    }
}

TEST_CASE("runScenario reports failures through exit codes",
          "[cli][scenario]") {
    SECTION("step underflow is exit 3 and writes nothing") {
        Scenario sc = parseText("name = fail\nN = 129\nq_max = 1e4\n");
        sc.control.dtMin = 1e-3; // above the diffusive limit at N = 129
        const fs::path dir = freshDir("fail3");
        const ScenarioResult r = runScenario(sc, dir.string());
        REQUIRE(r.exitCode == 3);
        REQUIRE(r.message.find("flow failed") != std::string::npos);
        REQUIRE_FALSE(fs::exists(dir / "meta.txt"));
    }
    SECTION("unwritable output directory is exit 4") {
        const fs::path base = freshDir("blocked");
        fs::create_directories(base);
        std::ofstream(base / "blocker").put('x');
        Scenario sc = parseText(
            "name = io\nN = 65\nq_max = 300\nsnapshot_every = 64\n");
        const ScenarioResult r =
            runScenario(sc, (base / "blocker" / "sub").string());
        REQUIRE(r.exitCode == 4);
        REQUIRE(r.message.find("output failed") != std::string::npos);
    }
}
