// Command-line driver: flow a configured scenario to its singular time (or a
// fixed horizon), evaluate the requested extension criteria, and write the
// deterministic output directory. `report` re-renders report.txt from an
// existing directory without recomputing anything.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure,
// 4 output I/O failure.

#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ricci/scenario.hpp"

namespace fs = std::filesystem;

namespace {

std::string outputRoot(const std::string& flagValue) {
    if (!flagValue.empty()) return flagValue;
    if (const char* env = std::getenv("RICCI_LAB_OUT"); env && *env)
        return env;
    return "runs";
}

struct SweepCell {
    std::string value;
    ricci::ScenarioResult result;
};

int runCommand(const std::string& configPath, const std::string& outFlag,
               const std::string& vary) {
    ricci::Scenario base;
    try {
        base = ricci::parseConfigFile(configPath);
    } catch (const ricci::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    const std::string root = outputRoot(outFlag);

    if (vary.empty()) {
        const std::string dir = (fs::path(root) / base.name).string();
        const ricci::ScenarioResult res = ricci::runScenario(base, dir);
        if (res.exitCode == 0) {
            try {
                ricci::renderReport(dir);
            } catch (const std::exception& e) {
                std::cerr << "report rendering failed: " << e.what() << "\n";
                return 4;
            }
        }
        std::cout << base.name << ": " << res.message
                  << " (stop=" << ricci::stopReasonName(res.stopReason)
                  << ", t=" << res.finalTime << ", sup|Rm|=" << res.finalSupRm
                  << ")\n";
        if (res.exitCode == 0) std::cout << "output: " << dir << "\n";
        return res.exitCode;
    }

    // Sweep: --vary key=a,b,c runs one scenario per value concurrently.
    const size_t eq = vary.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= vary.size()) {
        std::cerr << "config error: --vary expects key=v1,v2,...\n";
        return 2;
    }
    const std::string key = vary.substr(0, eq);
    std::vector<std::string> values;
    {
        std::stringstream ss(vary.substr(eq + 1));
        std::string v;
        while (std::getline(ss, v, ',')) values.push_back(v);
    }
    if (values.empty()) {
        std::cerr << "config error: --vary has no values\n";
        return 2;
    }

    std::vector<ricci::Scenario> cells;
    try {
        for (const std::string& v : values) {
            ricci::Scenario sc = ricci::withOverride(base, key, v);
            sc.name = base.name + "_" + key + "=" + v;
            cells.push_back(std::move(sc));
        }
    } catch (const ricci::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    std::vector<std::future<SweepCell>> futures;
    for (size_t i = 0; i < cells.size(); ++i) {
        futures.push_back(std::async(std::launch::async, [&, i]() {
            const std::string dir =
                (fs::path(root) / cells[i].name).string();
            SweepCell cell;
            cell.value = values[i];
            try {
                cell.result = ricci::runScenario(cells[i], dir);
                if (cell.result.exitCode == 0) ricci::renderReport(dir);
            } catch (const std::exception& e) {
                cell.result.exitCode = 3;
                cell.result.message = e.what();
            }
            return cell;
        }));
    }

    std::vector<std::string> lines;
    lines.push_back("value,exit,stop,final_time,final_supRm,singular_time");
    int worst = 0;
    for (auto& f : futures) {
        const SweepCell cell = f.get();
        const auto& r = cell.result;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%d,%s,%.17g,%.17g,%.17g",
                      cell.value.c_str(), r.exitCode,
                      ricci::stopReasonName(r.stopReason), r.finalTime,
                      r.finalSupRm, r.singularTime);
        lines.push_back(buf);
        std::cout << base.name << "_" << key << "=" << cell.value << ": "
                  << r.message << "\n";
        worst = std::max(worst, r.exitCode);
    }
    try {
        fs::create_directories(root);
        ricci::detail::writeLines(
            fs::path(root) / (base.name + "_sweep_" + key + ".csv"), lines);
    } catch (const std::exception& e) {
        std::cerr << "output failed: " << e.what() << "\n";
        return 4;
    }
    return worst;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for rotationally symmetric flows to "
                 "singularity"};
    app.require_subcommand(1);

    std::string configPath, outFlag, vary, reportDir;

    CLI::App* runCmd =
        app.add_subcommand("run", "flow a scenario and write its outputs");
    runCmd->add_option("config", configPath, "scenario config file")
        ->required();
    runCmd->add_option("--out", outFlag,
                       "output root (default $RICCI_LAB_OUT or ./runs)");
    runCmd->add_option("--vary", vary,
                       "sweep one key over comma-separated values, e.g. "
                       "--vary N=129,257,513");

    CLI::App* reportCmd = app.add_subcommand(
        "report", "re-render report.txt from an output directory");
    reportCmd->add_option("dir", reportDir, "scenario output directory")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (runCmd->parsed()) return runCommand(configPath, outFlag, vary);
        ricci::renderReport(reportDir);
        std::cout << "report rendered: " << reportDir << "/report.txt\n";
        return 0;
    } catch (const ricci::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ricci::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
