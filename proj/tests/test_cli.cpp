#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rdlocal/rng.hpp"
#include "rdlocal/run_config.hpp"

using namespace rdlocal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return RDLOCAL_CLI_PATH; }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("rdlocal_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

/// Synthetic fuzzy-RDD CSV: eligibility at s <= 1000, one-sided noncompliance.
fs::path write_sample_csv(const fs::path& dir, bool with_outcome = true) {
    const fs::path file = dir / "data.csv";
    std::ofstream out(file);
    out << "s" << (with_outcome ? ",y" : "") << ",w,grade,sex\n";
    CounterRng rng(321, 0);
    for (int i = 0; i < 400; ++i) {
        const double s = rng.uniform(0.0, 2000.0);
        const int z = s <= 1000.0 ? 1 : 0;
        const int w = z == 1 && rng.bernoulli(0.8) ? 1 : 0;
        const double y = 0.3 * w + rng.normal();
        const double grade = 60.0 + 40.0 * rng.uniform01();
        out << s;
        if (with_outcome) out << "," << y;
        out << "," << w << "," << grade << "," << (rng.bernoulli(0.5) ? "F" : "M") << "\n";
    }
    return file;
}

std::string common_flags(const fs::path& input, const fs::path& out, bool with_outcome = true) {
    std::string flags = " --input " + input.string() + " --running-col s";
    if (with_outcome) flags += " --outcome-col y";
    flags += " --receipt-col w --covariate grade:numeric --covariate sex:categorical";
    flags += " --cutoff 1000 --direction treated_if_le --seed 12 --out " + out.string();
    return flags;
}

} // namespace

TEST_CASE("run config round-trips through JSON with defaults explicit") {
    RunConfig cfg;
    cfg.input = "data.csv";
    cfg.running_col = "s";
    cfg.outcome_col = "y";
    cfg.receipt_col = "w";
    cfg.covariate_cols = {{"grade", "numeric"}, {"sex", "categorical"}};
    cfg.cutoff = 1000;
    cfg.grid = {250, 500, 750};
    MechanismSpec block;
    block.kind = MechanismKind::block;
    block.block_covariates = {"sex"};
    cfg.mechanisms = {block};
    cfg.dgp.n = 50;
    cfg.dgp.numeric_covariates = {{"x", 1.0, 2.0, 0.1}};

    const json j = cfg;
    const RunConfig parsed = j.get<RunConfig>();
    const json j2 = parsed;
    REQUIRE(j == j2);

    // defaults are materialized in the serialized form
    REQUIRE(j.at("alpha") == 0.15);
    REQUIRE(j.at("draws") == 1000);
    REQUIRE(j.at("p_mode") == "default");
    REQUIRE(j.at("ci_alpha") == 0.05);
}

TEST_CASE("windows command emits a p-curve row per grid point") {
    const fs::path dir = fresh_dir("windows");
    const fs::path input = write_sample_csv(dir);
    const int rc = run_cli("windows" + common_flags(input, dir) +
                           " --mechanism complete --grid 200:1000:200 --draws 300");
    REQUIRE(rc == 0);

    const std::string curve = slurp(dir / "p_curve.csv");
    std::istringstream in(curve);
    std::string line;
    std::getline(in, line);
    REQUIRE(line.rfind("# rdlocal windows config=", 0) == 0); // embedded config
    std::getline(in, line);
    REQUIRE(line == "bandwidth,p_min");
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    REQUIRE(rows == 5);

    const json report = json::parse(slurp(dir / "windows.json"));
    REQUIRE(report.at("command") == "windows");
    REQUIRE(report.at("config").at("cutoff") == 1000.0);
    REQUIRE(report.at("results").at("scan").size() == 5);
}

TEST_CASE("windows command succeeds without the outcome column") {
    const fs::path dir = fresh_dir("windows_no_y");
    const fs::path input = write_sample_csv(dir, /*with_outcome=*/false);
    const int rc = run_cli("windows" + common_flags(input, dir, /*with_outcome=*/false) +
                           " --mechanism complete --grid 300,600,900 --draws 200");
    REQUIRE(rc == 0);
    REQUIRE(fs::exists(dir / "p_curve.csv"));
}

TEST_CASE("estimate command: sharp data reduce the point to itt_y") {
    const fs::path dir = fresh_dir("estimate");
    const fs::path file = dir / "sharp.csv";
    {
        std::ofstream out(file);
        out << "s,y,w,x\n";
        CounterRng rng(5, 0);
        for (int i = 0; i < 120; ++i) {
            const double s = rng.uniform(0.0, 2000.0);
            const int z = s <= 1000.0 ? 1 : 0;
            out << s << "," << (0.4 * z + rng.normal()) << "," << z << "," << rng.normal()
                << "\n";
        }
    }
    const int rc = run_cli("estimate --input " + file.string() +
                           " --running-col s --outcome-col y --receipt-col w"
                           " --covariate x:numeric --cutoff 1000 --bandwidth 1000"
                           " --mechanism complete --seed 1 --out " + dir.string());
    REQUIRE(rc == 0);
    const json report = json::parse(slurp(dir / "estimate.json"));
    const auto& results = report.at("results");
    REQUIRE(results.at("point") == results.at("itt").at("itt_y"));
    REQUIRE(results.at("variance") == results.at("itt").at("var_itt_y"));
}

TEST_CASE("sensitivity command rerun is byte-identical") {
    const fs::path dir_a = fresh_dir("sens_a");
    const fs::path dir_b = fresh_dir("sens_b");
    const fs::path input = write_sample_csv(dir_a);

    const std::string args = " --running-col s --outcome-col y --receipt-col w"
                             " --covariate grade:numeric --covariate sex:categorical"
                             " --cutoff 1000 --direction treated_if_le --seed 9"
                             " --mechanism complete --grid 300,600,900 --draws 250"
                             " --input " + input.string();
    REQUIRE(run_cli("sensitivity" + args + " --out " + dir_a.string()) == 0);
    REQUIRE(run_cli("sensitivity" + args + " --out " + dir_b.string()) == 0);

    // analytic values are identical; file bytes differ only in the embedded
    // out-directory, so compare after normalizing it
    std::string a = slurp(dir_a / "sensitivity.csv");
    std::string b = slurp(dir_b / "sensitivity.csv");
    const auto strip_config_line = [](const std::string& text) {
        return text.substr(text.find('\n') + 1);
    };
    REQUIRE(strip_config_line(a) == strip_config_line(b));

    // and rerunning into the same directory reproduces the file exactly
    REQUIRE(run_cli("sensitivity" + args + " --out " + dir_b.string()) == 0);
    REQUIRE(slurp(dir_b / "sensitivity.csv") == b);
}

TEST_CASE("simulate command reports coverage and validity aggregates") {
    const fs::path dir = fresh_dir("simulate");
    const fs::path dgp_file = dir / "dgp.json";
    {
        json dgp{{"n", 60},
                 {"half_range", 50.0},
                 {"assignment", {{"law", "complete"}, {"treated_fraction", 0.5}}},
                 {"numeric_covariates", json::array({{{"name", "x"}}})},
                 {"effect", {{"constant", 0.5}}},
                 {"outcome", {{"noise_sd", 1.0}}},
                 {"seed", 77}};
        std::ofstream out(dgp_file);
        out << dgp.dump();
    }
    const int rc = run_cli("simulate --dgp " + dgp_file.string() +
                           " --mechanism complete --bandwidth 50 --reps 150 --draws 150"
                           " --seed 4 --out " + dir.string());
    REQUIRE(rc == 0);
    const json report = json::parse(slurp(dir / "simulate.json"));
    const auto& results = report.at("results");
    REQUIRE(results.at("reps") == 150);
    REQUIRE(results.at("coverage").get<double>() > 0.8);
}

TEST_CASE("module errors surface as a nonzero exit with no partial output") {
    const fs::path dir = fresh_dir("errors");
    const fs::path input = write_sample_csv(dir);

    // unknown column in the schema
    REQUIRE(run_cli("windows --input " + input.string() +
                    " --running-col nope --cutoff 1000 --grid 100,200 --out " +
                    dir.string()) == 1);
    REQUIRE_FALSE(fs::exists(dir / "p_curve.csv"));

    // weak compliance at estimation time: w column is all zero
    const fs::path weak = dir / "weak.csv";
    {
        std::ofstream out(weak);
        out << "s,y,w,x\n";
        CounterRng rng(6, 0);
        for (int i = 0; i < 60; ++i) {
            const double s = rng.uniform(0.0, 2000.0);
            out << s << "," << rng.normal() << ",0," << rng.normal() << "\n";
        }
    }
    REQUIRE(run_cli("estimate --input " + weak.string() +
                    " --running-col s --outcome-col y --receipt-col w --covariate x:numeric"
                    " --cutoff 1000 --bandwidth 1000 --mechanism complete --out " +
                    dir.string()) == 1);
    REQUIRE_FALSE(fs::exists(dir / "estimate.json"));
}
