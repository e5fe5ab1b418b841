// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "normflow/verification.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Relative path -> contents for every file below dir.
std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir)
{
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            files.emplace_back(fs::relative(e.path(), dir).string(), slurp(e.path()));
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct Run {
    std::string name;
    std::string args;
};

// Byte comparison of two invocations per run; the output directory name appears
// in the echoed configuration, so both invocations use the same directory.
bool determinism(std::string& detail)
{
    const fs::path work = fs::path(NORMFLOW_WORK_DIR) / "determinism";
    const std::vector<Run> runs{
        {"flow", "flow --seed 11 --t-end 0.2"},
        {"flow-rescaled", "flow --seed 12 --t-end 0.2 --gamma rescaled --integrator euler"},
        {"gd", "gd --seed 13 --gamma 0.01"},
        {"one-neuron", "one-neuron --seed 14 --config " + std::string(NORMFLOW_CONFIG_DIR) + "/one_neuron.json"},
        {"verify", "verify --seed 15 --config " + std::string(NORMFLOW_CONFIG_DIR) + "/verify_quick.json"},
    };
    std::size_t files = 0;
    for (const auto& run : runs) {
        const fs::path out = work / run.name;
        std::vector<std::vector<std::pair<std::string, std::string>>> snaps;
        for (int rep = 0; rep < 2; ++rep) {
            fs::remove_all(out);
            const std::string cmd =
                std::string(NORMFLOW_CLI) + " " + run.args + " --out " + out.string() + " > /dev/null";
            if (std::system(cmd.c_str()) != 0) {
                detail = run.name + ": command failed";
                return false;
            }
            snaps.push_back(snapshot(out));
        }
        if (snaps[0] != snaps[1] || snaps[0].empty()) {
            detail = run.name + ": outputs differ";
            return false;
        }
        files += snaps[0].size();
    }
    detail = std::to_string(runs.size()) + " runs, " + std::to_string(files) + " files byte-identical";
    return true;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

int main()
{
    normflow::VerificationOptions opt;
    opt.seed = 20261016;
    int failed = 0;
    for (const int id : normflow::criterion_ids()) {
        const auto r = normflow::run_criterion(id, opt);
        const bool in_time = r.time_limit == 0.0 || r.seconds < r.time_limit;
        const bool ok = r.passed && in_time;
        failed += ok ? 0 : 1;
        std::string metrics;
        for (const auto& [name, value] : r.metrics) {
            metrics += (metrics.empty() ? "" : ", ") + name + "=" + fmt(value);
        }
        std::string timing = fmt(r.seconds) + " s";
        if (r.time_limit > 0.0) {
            timing += " (limit " + fmt(r.time_limit) + " s)";
        }
        std::printf("[%s] criterion %d: %s | %s | %s%s%s\n", ok ? "PASS" : "FAIL", r.id, r.title.c_str(),
                    metrics.c_str(), timing.c_str(), r.note.empty() ? "" : " | ", r.note.c_str());
        std::fflush(stdout);
    }
    std::string detail;
    const bool same = determinism(detail);
    failed += same ? 0 : 1;
    std::printf("[%s] criterion 14: repeated runs with a fixed seed are byte-identical | %s\n", same ? "PASS" : "FAIL",
                detail.c_str());
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
