#pragma once
// Scenario layer: plain-text configs, deterministic output files, and the
// analysis pipeline the command-line driver runs.
//
// A scenario names an initial geometry, a stopping rule, and the set of
// extension criteria to evaluate. runScenario() flows it, evaluates every
// requested criterion, rescales the blow-up windows, runs the comparison-ODE
// verdict, and writes:
//
//   trajectory.csv    time, supRm, supRic, volume, phiMin, argmax_s
//   criteria_<id>.csv time, value, cumulative (fit metadata in '#' header)
//   rescaled_<i>.csv  s, kRad, kSph, normRm of each rescaled window center
//   meta.txt          key=value facts consumed by the report renderer
//   report.txt        the human-readable summary
//
// All floating point output goes through "%.17g", so identical inputs
// reproduce byte-identical files. renderReport() rebuilds report.txt from
// meta.txt + the CSVs alone, which is what `ricci_lab report <dir>` does.

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ricci/errors.hpp"
#include "ricci/exact_models.hpp"
#include "ricci/flow.hpp"
#include "ricci/functionals.hpp"
#include "ricci/gronwall.hpp"
#include "ricci/rescaling.hpp"
#include "ricci/sobolev.hpp"

namespace ricci {

// ---------------------------------------------------------------------------
// Scenario description and config parsing
// ---------------------------------------------------------------------------

struct CriterionRequest {
    CriterionKind kind = CriterionKind::IntSupRic;
    double p = 2.0;     ///< exponent for the L^p criterion
    double delta = 0.1; ///< modulus-of-continuity separation (accumulator)
    std::string label;  ///< config token, e.g. "spaceTimeLp:p=2.5"
};

struct Scenario {
    std::string name = "run";
    std::string initial = "sphere"; ///< sphere | dumbbell
    int n = 3;
    size_t N = 257;
    double r0 = 1.0;
    double neckRadius = 0.25, capRadius = 1.0, neckWidth = 0.5;
    std::string stop = "blowup"; ///< blowup | time
    double tEnd = 0.2;
    StepControl control;
    std::vector<CriterionRequest> criteria;
    bool rescale = true;
    size_t maxWindows = 8;
    double modelRadius = 5.0;
    double gronwallC = 1.0;
    double growthFactor = 10.0;
};

namespace detail {

inline std::string trimmed(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double toDouble(const std::string& v, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw ConfigError(where + ": not a number: '" + v + "'");
    return x;
}

inline long toLong(const std::string& v, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw ConfigError(where + ": not an integer: '" + v + "'");
    return x;
}

inline CriterionRequest parseCriterionToken(const std::string& token,
                                            const std::string& where) {
    CriterionRequest req;
    req.label = token;
    std::vector<std::string> parts;
    std::stringstream ss(token);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.empty()) throw ConfigError(where + ": empty criterion token");

    if (parts[0] == "intSupRic") req.kind = CriterionKind::IntSupRic;
    else if (parts[0] == "spaceTimeLp") req.kind = CriterionKind::SpaceTimeLp;
    else if (parts[0] == "logWeighted") req.kind = CriterionKind::LogWeighted;
    else
        throw ConfigError(where + ": unknown criterion '" + parts[0] +
                          "' (expected intSupRic, spaceTimeLp, logWeighted)");

    for (size_t i = 1; i < parts.size(); ++i) {
        const size_t eq = parts[i].find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": criterion parameter '" + parts[i] +
                              "' is not key=value");
        const std::string key = parts[i].substr(0, eq);
        const std::string val = parts[i].substr(eq + 1);
        if (key == "p") req.p = toDouble(val, where);
        else if (key == "delta") req.delta = toDouble(val, where);
        else
            throw ConfigError(where + ": unknown criterion parameter '" + key +
                              "'");
    }
    return req;
}

} // namespace detail

/// Parse a key = value config (one pair per line; '#' starts a comment;
/// `criteria` is a whitespace-separated list of tokens like
/// "spaceTimeLp:p=2.5"). ConfigError messages carry <source>:<line>.
inline Scenario parseConfig(std::istream& in,
                            const std::string& source = "config") {
    Scenario sc;
    sc.criteria.clear();
    std::string line;
    int lineNo = 0;
    bool sawCriteria = false;
    while (std::getline(in, line)) {
        ++lineNo;
        const std::string where = source + ":" + std::to_string(lineNo);
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trimmed(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected key = value");
        const std::string key = detail::trimmed(line.substr(0, eq));
        const std::string val = detail::trimmed(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");

        if (key == "name") sc.name = val;
        else if (key == "initial") {
            if (val != "sphere" && val != "dumbbell")
                throw ConfigError(where + ": initial must be sphere or "
                                          "dumbbell, got '" + val + "'");
            sc.initial = val;
        } else if (key == "n") sc.n = int(detail::toLong(val, where));
        else if (key == "N") sc.N = size_t(detail::toLong(val, where));
        else if (key == "r0") sc.r0 = detail::toDouble(val, where);
        else if (key == "neck_radius") sc.neckRadius = detail::toDouble(val, where);
        else if (key == "cap_radius") sc.capRadius = detail::toDouble(val, where);
        else if (key == "neck_width") sc.neckWidth = detail::toDouble(val, where);
        else if (key == "stop") {
            if (val != "blowup" && val != "time")
                throw ConfigError(where + ": stop must be blowup or time, "
                                          "got '" + val + "'");
            sc.stop = val;
        } else if (key == "t_end") sc.tEnd = detail::toDouble(val, where);
        else if (key == "q_max") sc.control.qMax = detail::toDouble(val, where);
        else if (key == "snapshot_every")
            sc.control.snapshotEvery = int(detail::toLong(val, where));
        else if (key == "cfl_safety")
            sc.control.cflSafety = detail::toDouble(val, where);
        else if (key == "curvature_safety")
            sc.control.curvatureSafety = detail::toDouble(val, where);
        else if (key == "rescale") {
            if (val != "true" && val != "false")
                throw ConfigError(where + ": rescale must be true or false");
            sc.rescale = val == "true";
        } else if (key == "max_windows")
            sc.maxWindows = size_t(detail::toLong(val, where));
        else if (key == "model_radius")
            sc.modelRadius = detail::toDouble(val, where);
        else if (key == "gronwall_c")
            sc.gronwallC = detail::toDouble(val, where);
        else if (key == "growth_factor")
            sc.growthFactor = detail::toDouble(val, where);
        else if (key == "criteria") {
            sawCriteria = true;
            std::stringstream ss(val);
            std::string token;
            while (ss >> token)
                sc.criteria.push_back(detail::parseCriterionToken(token, where));
        } else {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
    if (!sawCriteria) {
        sc.criteria.push_back(
            detail::parseCriterionToken("intSupRic", source));
        sc.criteria.push_back(
            detail::parseCriterionToken("spaceTimeLp:p=2", source));
        sc.criteria.push_back(
            detail::parseCriterionToken("logWeighted", source));
    }
    if (sc.n < 3) throw ConfigError(source + ": n must be >= 3");
    if (sc.N < 17) throw ConfigError(source + ": N must be >= 17");
    return sc;
}

inline Scenario parseConfigFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parseConfig(in, std::filesystem::path(path).filename().string());
}

/// Apply one "key=value" override on top of a parsed scenario (the sweep
/// driver uses this): the line goes through the same parser, then the one
/// named field is copied across.
inline Scenario withOverride(const Scenario& base, const std::string& key,
                             const std::string& value) {
    Scenario sc = base;
    std::stringstream cfg;
    cfg << key << " = " << value << "\n";
    const Scenario parsed = parseConfig(cfg, "override");
    const std::string k = detail::trimmed(key);
    if (k == "name") sc.name = parsed.name;
    else if (k == "initial") sc.initial = parsed.initial;
    else if (k == "n") sc.n = parsed.n;
    else if (k == "N") sc.N = parsed.N;
    else if (k == "r0") sc.r0 = parsed.r0;
    else if (k == "neck_radius") sc.neckRadius = parsed.neckRadius;
    else if (k == "cap_radius") sc.capRadius = parsed.capRadius;
    else if (k == "neck_width") sc.neckWidth = parsed.neckWidth;
    else if (k == "stop") sc.stop = parsed.stop;
    else if (k == "t_end") sc.tEnd = parsed.tEnd;
    else if (k == "q_max") sc.control.qMax = parsed.control.qMax;
    else if (k == "snapshot_every")
        sc.control.snapshotEvery = parsed.control.snapshotEvery;
    else if (k == "cfl_safety") sc.control.cflSafety = parsed.control.cflSafety;
    else if (k == "curvature_safety")
        sc.control.curvatureSafety = parsed.control.curvatureSafety;
    else if (k == "rescale") sc.rescale = parsed.rescale;
    else if (k == "max_windows") sc.maxWindows = parsed.maxWindows;
    else if (k == "model_radius") sc.modelRadius = parsed.modelRadius;
    else if (k == "gronwall_c") sc.gronwallC = parsed.gronwallC;
    else if (k == "growth_factor") sc.growthFactor = parsed.growthFactor;
    else if (k == "criteria") sc.criteria = parsed.criteria;
    else throw ConfigError("override: unknown key '" + k + "'");
    return sc;
}

// ---------------------------------------------------------------------------
// Deterministic formatting
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csvName(const std::string& id) {
    std::string out;
    for (char c : id) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
            c == '-')
            out += c;
        else if (c == '=' || c == '(' || c == ',' || c == ':')
            out += '_';
        // ')' and other punctuation dropped
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Running a scenario
// ---------------------------------------------------------------------------

struct ScenarioResult {
    int exitCode = 0; ///< 0 ok, 2 config, 3 numerical failure, 4 I/O
    std::string message = "ok";
    StopReason stopReason = StopReason::ReachedTime;
    double finalTime = 0.0;
    double finalSupRm = 0.0;
    double singularTime = std::numeric_limits<double>::quiet_NaN();
    std::string outDir;
};

namespace detail {

inline void writeLines(const std::filesystem::path& path,
                       const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path.string());
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

} // namespace detail

/// Flow the scenario, evaluate everything it asks for, and write the output
/// directory. Numerical-analysis subsections that fail to converge are
/// recorded as "n/a" rather than failing the run; flow failures
/// (StepUnderflow) exit with code 3.
inline ScenarioResult runScenario(const Scenario& sc,
                                  const std::string& outDirIn) {
    namespace fs = std::filesystem;
    ScenarioResult res;
    res.outDir = outDirIn;

    WarpProfile init;
    if (sc.initial == "sphere")
        init = initialRoundSphere(sc.n, sc.r0, sc.N);
    else
        init = initialDumbbell(sc.n, sc.neckRadius, sc.capRadius, sc.neckWidth,
                               sc.N);

    const StopRule rule = sc.stop == "time" ? StopRule::untilTime(sc.tEnd)
                                            : StopRule::untilBlowup();
    FlowTrajectory traj;
    try {
        traj = run(init, sc.control, rule);
    } catch (const Error& e) {
        res.exitCode = 3;
        res.message = std::string("flow failed: ") + e.what();
        return res;
    }
    res.stopReason = traj.stopReason;
    res.finalTime = traj.back().t;
    res.finalSupRm = traj.back().supRm;
    if (traj.stopReason == StopReason::StepUnderflow) {
        res.exitCode = 3;
        res.message = "flow failed: time step underflow before the stop rule";
        return res;
    }

    // Singular-time estimate (blow-up runs only).
    Type1Fit fit{};
    bool haveFit = false;
    try {
        fit = estimateSingularTime(traj);
        haveFit = true;
        res.singularTime = fit.T;
    } catch (const Error&) {}

    std::map<std::string, std::string> meta;
    meta["name"] = sc.name;
    meta["initial"] = sc.initial;
    meta["n"] = std::to_string(sc.n);
    meta["N"] = std::to_string(sc.N);
    meta["stop_reason"] = stopReasonName(traj.stopReason);
    meta["steps"] = std::to_string(traj.stepsTaken);
    meta["snapshots"] = std::to_string(traj.snaps.size());
    meta["remesh_count"] = std::to_string(traj.remeshCount);
    meta["final_time"] = detail::fmt(res.finalTime);
    meta["final_supRm"] = detail::fmt(res.finalSupRm);
    meta["volume_final"] = detail::fmt(traj.back().volume);
    meta["pole_slope_drift"] = detail::fmt(traj.poleSlopeDrift);
    if (haveFit) {
        meta["singular_time"] = detail::fmt(fit.T);
        meta["type1_slope"] = detail::fmt(fit.slope);
        meta["type1_residual"] = detail::fmt(fit.residual);
        meta["type1_converged"] = fit.converged ? "true" : "false";
    }

    try {
        fs::create_directories(outDirIn);

        // trajectory.csv
        {
            std::vector<std::string> lines;
            lines.push_back("time,supRm,supRic,volume,phiMin,argmax_s");
            for (const Snapshot& s : traj.snaps)
                lines.push_back(detail::fmt(s.t) + "," + detail::fmt(s.supRm) +
                                "," + detail::fmt(s.supRic) + "," +
                                detail::fmt(s.volume) + "," +
                                detail::fmt(s.phiMin) + "," +
                                detail::fmt(s.argmaxS));
            detail::writeLines(fs::path(outDirIn) / "trajectory.csv", lines);
        }

        // criteria_<id>.csv (+ fit metadata when a blow-up window exists)
        for (const CriterionRequest& req : sc.criteria) {
            CriterionSeries ser;
            try {
                ser = criterionSeries(traj, req.kind, req.p);
            } catch (const Error& e) {
                meta["criterion_" + detail::csvName(req.label) + "_error"] =
                    e.what();
                continue;
            }
            std::vector<std::string> lines;
            std::string fitLine = "# fit: n/a";
            if (haveFit) {
                try {
                    const GrowthFit g =
                        divergenceDiagnostic(traj, ser, fit.T, sc.growthFactor);
                    fitLine = std::string("# fit: law=") +
                              growthLawName(g.law) +
                              " rate=" + detail::fmt(g.rate) +
                              " offset=" + detail::fmt(g.offset) + " points=" +
                              std::to_string(g.points);
                    meta["criterion_" + detail::csvName(req.label) + "_law"] =
                        growthLawName(g.law);
                    meta["criterion_" + detail::csvName(req.label) + "_rate"] =
                        detail::fmt(g.rate);
                } catch (const Error& e) {
                    fitLine = std::string("# fit: n/a (") + e.what() + ")";
                }
            }
            lines.push_back(fitLine);
            lines.push_back("time,value,cumulative");
            for (size_t k = 0; k < ser.times.size(); ++k)
                lines.push_back(detail::fmt(ser.times[k]) + "," +
                                detail::fmt(ser.values[k]) + "," +
                                detail::fmt(ser.cumulative[k]));
            meta["criterion_" + detail::csvName(req.label) + "_total"] =
                detail::fmt(ser.cumulative.back());
            detail::writeLines(fs::path(outDirIn) /
                                   ("criteria_" + detail::csvName(req.label) +
                                    ".csv"),
                               lines);
        }

        // rescaled_<i>.csv
        if (sc.rescale && haveFit) {
            try {
                const auto windows = blowupSequence(traj, sc.maxWindows);
                meta["rescaled_windows"] = std::to_string(windows.size());
                for (size_t i = 0; i < windows.size(); ++i) {
                    const RescaledWindow& w = windows[i];
                    const RescaledState& st = w.center();
                    const CurvatureField c = windowedCurvature(st.profile);
                    const ModelDistance dSph = modelDistance(
                        w, SingularityModel::RoundSphere, sc.modelRadius);
                    const ModelDistance dCyl = modelDistance(
                        w, SingularityModel::RoundCylinder, sc.modelRadius);
                    std::vector<std::string> lines;
                    lines.push_back("# " + w.provenance);
                    lines.push_back(
                        "# modelDistance: sphere=" + detail::fmt(dSph.distance) +
                        " cylinder=" + detail::fmt(dCyl.distance) +
                        " radius=" + detail::fmt(sc.modelRadius));
                    lines.push_back("s,kRad,kSph,normRm");
                    for (size_t j = 0; j < c.s.size(); ++j)
                        lines.push_back(detail::fmt(c.s[j]) + "," +
                                        detail::fmt(c.kRad[j]) + "," +
                                        detail::fmt(c.kSph[j]) + "," +
                                        detail::fmt(c.normRm[j]));
                    detail::writeLines(fs::path(outDirIn) /
                                           ("rescaled_" + std::to_string(i) +
                                            ".csv"),
                                       lines);
                    if (i + 1 == windows.size()) {
                        meta["model_distance_sphere"] =
                            detail::fmt(dSph.distance);
                        meta["model_distance_cylinder"] =
                            detail::fmt(dCyl.distance);
                    }
                }
            } catch (const Error& e) {
                meta["rescaled_error"] = e.what();
            }
        }

        // Comparison-ODE verdict.
        try {
            const ExtensionVerdict v = extensionVerdict(
                traj, sc.gronwallC,
                haveFit ? fit.T : traj.back().t + 1.0, sc.growthFactor);
            meta["logweighted_total"] = detail::fmt(v.GTotal);
            meta["verdict"] = v.verdict;
            if (v.impliedFinite)
                meta["implied_sup"] = detail::fmt(v.impliedSup);
        } catch (const Error& e) {
            meta["verdict"] = std::string("n/a (") + e.what() + ")";
        }
        try {
            const DoublingCheck d = doublingCheck(traj);
            meta["doubling_time"] = detail::fmt(d.tDouble);
            meta["doubling_product"] = detail::fmt(d.product);
        } catch (const Error& e) {
            meta["doubling_error"] = e.what();
        }

        // meta.txt (sorted keys; the report is rendered from this alone)
        {
            std::vector<std::string> lines;
            for (const auto& [k, v] : meta) lines.push_back(k + " = " + v);
            detail::writeLines(fs::path(outDirIn) / "meta.txt", lines);
        }
    } catch (const Error& e) {
        res.exitCode = 4;
        res.message = std::string("output failed: ") + e.what();
        return res;
    } catch (const std::exception& e) {
        res.exitCode = 4;
        res.message = std::string("output failed: ") + e.what();
        return res;
    }

    res.message = "ok";
    return res;
}

// ---------------------------------------------------------------------------
// Report rendering (from the output directory alone)
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> readMeta(const std::string& dir) {
    std::ifstream in(std::filesystem::path(dir) / "meta.txt");
    if (!in) throw Error("cannot open " + dir + "/meta.txt");
    std::map<std::string, std::string> meta;
    std::string line;
    while (std::getline(in, line)) {
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        meta[detail::trimmed(line.substr(0, eq))] =
            detail::trimmed(line.substr(eq + 1));
    }
    return meta;
}

/// Render report.txt from meta.txt and the CSV headers. Deterministic:
/// rendering twice over the same directory produces identical bytes.
inline void renderReport(const std::string& dir) {
    namespace fs = std::filesystem;
    const auto meta = readMeta(dir);
    auto get = [&](const std::string& k) -> std::string {
        const auto it = meta.find(k);
        return it == meta.end() ? std::string("n/a") : it->second;
    };

    std::vector<std::string> lines;
    lines.push_back("flow report: " + get("name"));
    lines.push_back(std::string(14 + get("name").size(), '-'));
    lines.push_back("initial geometry : " + get("initial") +
                    " (n=" + get("n") + ", N=" + get("N") + ")");
    lines.push_back("stop reason      : " + get("stop_reason"));
    lines.push_back("steps / snapshots: " + get("steps") + " / " +
                    get("snapshots") + " (remeshes " + get("remesh_count") +
                    ")");
    lines.push_back("final time       : " + get("final_time"));
    lines.push_back("final sup|Rm|    : " + get("final_supRm"));
    lines.push_back("final volume     : " + get("volume_final"));
    lines.push_back("pole slope drift : " + get("pole_slope_drift"));
    if (meta.count("singular_time")) {
        lines.push_back("");
        lines.push_back("singular time estimate: T = " + get("singular_time") +
                        "  (1/sup|Rm| slope " + get("type1_slope") +
                        ", residual " + get("type1_residual") + ", converged " +
                        get("type1_converged") + ")");
    }

    lines.push_back("");
    lines.push_back("criteria:");
    for (const auto& [k, v] : meta) {
        if (k.rfind("criterion_", 0) != 0) continue;
        lines.push_back("  " + k.substr(10) + " = " + v);
    }
    if (meta.count("rescaled_windows")) {
        lines.push_back("");
        lines.push_back("rescaled windows : " + get("rescaled_windows"));
        lines.push_back("model distance   : sphere " +
                        get("model_distance_sphere") + ", cylinder " +
                        get("model_distance_cylinder"));
    }
    if (meta.count("doubling_time")) {
        lines.push_back("");
        lines.push_back("curvature doubling: t = " + get("doubling_time") +
                        ", t * sup|Rm|(0) = " + get("doubling_product"));
    }
    lines.push_back("");
    lines.push_back("verdict: " + get("verdict"));
    if (meta.count("implied_sup"))
        lines.push_back("implied curvature ceiling: " + get("implied_sup"));

    detail::writeLines(fs::path(dir) / "report.txt", lines);
}

} // namespace ricci
