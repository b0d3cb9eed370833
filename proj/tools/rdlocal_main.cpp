// rdlocal: batch front end for local randomization RDD analysis.
//
// Subcommands:
//   windows      scan a bandwidth grid and select the as-if randomized window
//   estimate     complier ATE with Neymanian CI for a fixed (bandwidth, mechanism)
//   sensitivity  crossed (mechanism x bandwidth) table of balance + estimates
//   simulate     coverage / validity study on a synthetic DGP

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rdlocal/rdlocal.hpp"
#include "rdlocal/report.hpp"
#include "rdlocal/run_config.hpp"

namespace {

using nlohmann::json;
using namespace rdlocal;

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
        // lo:hi:step
        double lo = 0, hi = 0, step = 0;
        char c1 = 0, c2 = 0;
        std::istringstream in(text);
        if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || step <= 0) {
            throw ConfigError("bad grid '" + text + "' (expected lo:hi:step or a comma list)");
        }
        for (double h = lo; h <= hi + 1e-9 * step; h += step) grid.push_back(h);
        return grid;
    }
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) grid.push_back(std::stod(item));
    }
    return grid;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct Flags {
    std::string config_path;
    std::string input, out;
    std::string running, outcome, receipt, delimiter;
    std::vector<std::string> covariates; // "name:kind"
    double cutoff = 0.0;
    std::string direction;
    std::string mechanism, blocks, propensity_column, propensity_covariates;
    bool condition_on_nt = false;
    std::string grid;
    double bandwidth = 0.0;
    std::string statistic, p_mode, formats, balance_covariates;
    double alpha = 0.15, ci_alpha = 0.05, weak_threshold = 0.05;
    int draws = 1000, reps = 1000;
    std::uint64_t seed = 0;
    std::string dgp_path;
};

void add_common_options(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file; flags override its values");
    cmd->add_option("--input", f.input, "delimited text input file");
    cmd->add_option("--running-col", f.running, "running variable column");
    cmd->add_option("--outcome-col", f.outcome, "outcome column");
    cmd->add_option("--receipt-col", f.receipt, "treatment receipt column");
    cmd->add_option("--covariate", f.covariates,
                    "covariate as name:kind (kind = numeric|categorical); repeatable");
    cmd->add_option("--delimiter", f.delimiter, "field delimiter (default ,)");
    cmd->add_option("--cutoff", f.cutoff, "cutoff s0 of the running variable");
    cmd->add_option("--direction", f.direction, "treated_if_le (default) or treated_if_gt");
    cmd->add_option("--mechanism", f.mechanism, "bernoulli | complete | block");
    cmd->add_option("--blocks", f.blocks, "comma list of categorical covariates to block on");
    cmd->add_option("--propensity-column", f.propensity_column,
                    "column of supplied propensity scores (bernoulli)");
    cmd->add_option("--propensity-covariates", f.propensity_covariates,
                    "comma list of covariates for the logistic propensity fit (bernoulli)");
    cmd->add_flag("--condition-on-nt", f.condition_on_nt,
                  "condition Bernoulli draws on the observed treated count");
    cmd->add_option("--grid", f.grid, "bandwidth grid: lo:hi:step or comma list");
    cmd->add_option("--bandwidth", f.bandwidth, "bandwidth for a single-window analysis");
    cmd->add_option("--statistic", f.statistic, "mean_diff | std_mean_diff | mahalanobis");
    cmd->add_option("--balance-covariates", f.balance_covariates,
                    "comma list of covariates to balance-test (default: all)");
    cmd->add_option("--alpha", f.alpha, "balance test level (default 0.15)");
    cmd->add_option("--ci-alpha", f.ci_alpha, "CI level alpha (default 0.05)");
    cmd->add_option("--weak-threshold", f.weak_threshold, "minimum |ITT_W| (default 0.05)");
    cmd->add_option("--draws", f.draws, "Monte Carlo draws M (default 1000)");
    cmd->add_option("--p-mode", f.p_mode, "default | paper_exact | exact");
    cmd->add_option("--reps", f.reps, "simulation replications");
    cmd->add_option("--seed", f.seed, "RNG seed");
    cmd->add_option("--out", f.out, "output directory (default .)");
    cmd->add_option("--format", f.formats, "comma list from {csv,json} (default both)");
    cmd->add_option("--dgp", f.dgp_path, "JSON file with the synthetic DGP (simulate)");
}

RunConfig build_config(const CLI::App* cmd, const Flags& f) {
    RunConfig cfg;
    if (cmd->count("--config") > 0) {
        std::ifstream in(f.config_path);
        if (!in) throw ConfigError("cannot open config file '" + f.config_path + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("config parse error: " + std::string(e.what()));
        }
        cfg = j.get<RunConfig>();
    }
    if (cmd->count("--input") > 0) cfg.input = f.input;
    if (cmd->count("--running-col") > 0) cfg.running_col = f.running;
    if (cmd->count("--outcome-col") > 0) cfg.outcome_col = f.outcome;
    if (cmd->count("--receipt-col") > 0) cfg.receipt_col = f.receipt;
    if (cmd->count("--delimiter") > 0) cfg.delimiter = f.delimiter;
    if (cmd->count("--covariate") > 0) {
        cfg.covariate_cols.clear();
        for (const auto& item : f.covariates) {
            const auto colon = item.rfind(':');
            if (colon == std::string::npos) {
                throw ConfigError("covariate '" + item + "' must be name:kind");
            }
            cfg.covariate_cols.emplace_back(item.substr(0, colon), item.substr(colon + 1));
        }
    }
    if (cmd->count("--cutoff") > 0) cfg.cutoff = f.cutoff;
    if (cmd->count("--direction") > 0) cfg.direction = direction_from_string(f.direction);
    if (cmd->count("--mechanism") > 0 || cmd->count("--blocks") > 0 ||
        cmd->count("--propensity-column") > 0 || cmd->count("--propensity-covariates") > 0 ||
        cmd->count("--condition-on-nt") > 0) {
        MechanismSpec spec;
        if (cmd->count("--mechanism") > 0) {
            spec.kind = mechanism_kind_from_string(f.mechanism);
        } else if (cmd->count("--blocks") > 0) {
            spec.kind = MechanismKind::block;
        }
        spec.block_covariates = split_list(f.blocks);
        spec.propensity_column = f.propensity_column;
        spec.propensity_covariates = split_list(f.propensity_covariates);
        spec.condition_on_nt = f.condition_on_nt;
        cfg.mechanisms = {spec};
    }
    if (cmd->count("--grid") > 0) cfg.grid = parse_grid(f.grid);
    if (cmd->count("--bandwidth") > 0) cfg.bandwidth = f.bandwidth;
    if (cmd->count("--statistic") > 0) cfg.statistic = statistic_from_string(f.statistic);
    if (cmd->count("--balance-covariates") > 0) {
        cfg.balance_covariates = split_list(f.balance_covariates);
    }
    if (cmd->count("--alpha") > 0) cfg.alpha = f.alpha;
    if (cmd->count("--ci-alpha") > 0) cfg.ci_alpha = f.ci_alpha;
    if (cmd->count("--weak-threshold") > 0) cfg.weak_threshold = f.weak_threshold;
    if (cmd->count("--draws") > 0) cfg.draws = f.draws;
    if (cmd->count("--p-mode") > 0) cfg.p_mode = p_mode_from_string(f.p_mode);
    if (cmd->count("--reps") > 0) cfg.reps = f.reps;
    if (cmd->count("--seed") > 0) cfg.seed = f.seed;
    if (cmd->count("--out") > 0) cfg.out = f.out;
    if (cmd->count("--format") > 0) cfg.formats = split_list(f.formats);
    if (cmd->count("--dgp") > 0) {
        std::ifstream in(f.dgp_path);
        if (!in) throw ConfigError("cannot open DGP file '" + f.dgp_path + "'");
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError("DGP parse error: " + std::string(e.what()));
        }
        cfg.dgp = j.get<DGPConfig>();
    }
    for (const auto& fmt : cfg.formats) {
        if (fmt != "csv" && fmt != "json") {
            throw ConfigError("unknown output format '" + fmt + "' (expected csv or json)");
        }
    }
    return cfg;
}

bool wants_format(const RunConfig& cfg, const std::string& fmt) {
    return std::find(cfg.formats.begin(), cfg.formats.end(), fmt) != cfg.formats.end();
}

/// Every output embeds the effective configuration: JSON reports carry it as
/// a field; delimited tables carry it as a leading comment line.
void write_outputs(const RunConfig& cfg, const std::string& command, const json& results,
                   const std::map<std::string, std::string>& csv_files) {
    std::filesystem::create_directories(cfg.out);
    const json cfg_json = cfg;
    if (wants_format(cfg, "json")) {
        json report{{"command", command}, {"config", cfg_json}, {"results", results}};
        std::ofstream out(std::filesystem::path(cfg.out) / (command + ".json"));
        out << report.dump(2) << "\n";
    }
    if (wants_format(cfg, "csv")) {
        for (const auto& [name, body] : csv_files) {
            std::ofstream out(std::filesystem::path(cfg.out) / name);
            out << "# rdlocal " << command << " config=" << cfg_json.dump() << "\n" << body;
        }
    }
}

Dataset load_input(const RunConfig& cfg) {
    if (cfg.input.empty()) throw ConfigError("no input file given (--input or config)");
    std::ifstream in(cfg.input);
    if (!in) throw LoadError("cannot open input file '" + cfg.input + "'");
    Dataset data = load_dataset(in, cfg.schema());
    return assign_treatment(data, cfg.cutoff, cfg.direction);
}

ComplierEstimate estimate_single(const RunConfig& cfg, const Dataset& data,
                                 const Window& window, const MechanismSpec& spec,
                                 json* block_detail) {
    EstimationOptions opts;
    opts.ci_alpha = cfg.ci_alpha;
    opts.weak_threshold = cfg.weak_threshold;
    if (spec.kind == MechanismKind::block) {
        const Blocking blocking = build_blocks(window, data, spec.block_covariates);
        BlockEstimate est = block_complier_ate(blocking, window, data, opts);
        if (block_detail) *block_detail = est.per_block;
        return est.pooled;
    }
    return complete_randomization_estimate(window, data, opts);
}

int run_windows(const RunConfig& cfg) {
    const Dataset data = load_input(cfg);
    if (cfg.grid.empty()) throw ConfigError("windows needs a bandwidth grid (--grid)");
    if (cfg.mechanisms.empty()) throw ConfigError("windows needs a mechanism");
    PValueOptions opts;
    opts.mode = cfg.p_mode;
    opts.draws = cfg.draws;
    opts.seed = cfg.seed;
    const WindowSelection selection =
        select_window(data, cfg.mechanisms[0], cfg.cutoff, cfg.grid, cfg.statistic,
                      cfg.balance_covariates, cfg.alpha, opts, cfg.min_arm);
    write_outputs(cfg, "windows", json(selection), {{"p_curve.csv", p_curve_csv(selection)}});
    if (selection.selected_bandwidth) {
        std::cout << "selected bandwidth: " << dtos(*selection.selected_bandwidth) << "\n";
    } else {
        std::cout << "selected bandwidth: none plausible\n";
    }
    return 0;
}

int run_estimate(const RunConfig& cfg) {
    const Dataset data = load_input(cfg);
    if (!(cfg.bandwidth > 0.0)) throw ConfigError("estimate needs --bandwidth > 0");
    if (cfg.mechanisms.empty()) throw ConfigError("estimate needs a mechanism");
    const MechanismSpec& spec = cfg.mechanisms[0];
    const Window window = window_units(data, cfg.cutoff, cfg.bandwidth);
    json block_detail;
    const ComplierEstimate est = estimate_single(cfg, data, window, spec, &block_detail);
    json results = est;
    results["mechanism"] = spec.display_label();
    if (!block_detail.is_null()) results["per_block"] = block_detail;
    write_outputs(cfg, "estimate", results,
                  {{"estimate.csv",
                    estimate_csv_header() + estimate_csv_row(spec.display_label(), est)}});
    std::cout << "point: " << dtos(est.point) << "  ci: [" << dtos(est.ci.first) << ", "
              << dtos(est.ci.second) << "]\n";
    return 0;
}

int run_sensitivity(const RunConfig& cfg) {
    const Dataset data = load_input(cfg);
    if (cfg.grid.empty()) throw ConfigError("sensitivity needs a bandwidth grid (--grid)");
    PValueOptions opts;
    opts.mode = cfg.p_mode;
    opts.draws = cfg.draws;
    opts.seed = cfg.seed;
    EstimationOptions est_opts;
    est_opts.ci_alpha = cfg.ci_alpha;
    est_opts.weak_threshold = cfg.weak_threshold;
    const std::vector<SensitivityRow> rows =
        sensitivity_grid(data, cfg.cutoff, cfg.mechanisms, cfg.grid, cfg.statistic,
                         cfg.balance_covariates, cfg.alpha, opts, est_opts, cfg.min_arm);
    write_outputs(cfg, "sensitivity", json(rows), {{"sensitivity.csv", sensitivity_csv(rows)}});
    std::cout << "sensitivity rows: " << rows.size() << "\n";
    return 0;
}

int run_simulate(const RunConfig& cfg) {
    if (cfg.mechanisms.empty()) throw ConfigError("simulate needs a mechanism");
    if (!(cfg.bandwidth > 0.0)) throw ConfigError("simulate needs --bandwidth > 0");
    CoverageOptions opts;
    opts.reps = cfg.reps;
    opts.ci_alpha = cfg.ci_alpha;
    opts.balance_alpha = cfg.alpha;
    opts.statistic = cfg.statistic;
    opts.p_mode = cfg.p_mode;
    opts.balance_draws = cfg.draws;
    opts.weak_threshold = cfg.weak_threshold;
    opts.seed = cfg.seed;
    const CoverageResult result = coverage_study(cfg.dgp, cfg.mechanisms[0], cfg.bandwidth, opts);
    write_outputs(cfg, "simulate", json(result), {{"simulation.csv", coverage_csv(result)}});
    std::cout << "coverage: " << dtos(result.coverage)
              << "  rejection rate: " << dtos(result.rejection_rate) << "\n";
    return 0;
}

std::string module_of(const std::exception& e) {
    if (dynamic_cast<const LoadError*>(&e)) return "data_model";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const SeparationError*>(&e)) return "assignment";
    if (dynamic_cast<const SupportError*>(&e)) return "assignment";
    if (dynamic_cast<const EstimationError*>(&e)) return "estimation";
    if (dynamic_cast<const Error*>(&e)) return "rdlocal";
    return "internal";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"local randomization analysis for regression discontinuity designs"};
    app.require_subcommand(1);

    Flags flags;
    CLI::App* windows = app.add_subcommand("windows", "bandwidth scan and window selection");
    CLI::App* estimate = app.add_subcommand("estimate", "complier ATE for one window");
    CLI::App* sensitivity =
        app.add_subcommand("sensitivity", "crossed bandwidth x mechanism table");
    CLI::App* simulate = app.add_subcommand("simulate", "coverage / validity study");
    for (CLI::App* cmd : {windows, estimate, sensitivity, simulate}) {
        add_common_options(cmd, flags);
    }

    CLI11_PARSE(app, argc, argv);

    CLI::App* active = app.get_subcommands().front();
    try {
        const RunConfig cfg = build_config(active, flags);
        std::cout << "config " << json(cfg).dump() << "\n";
        if (active == windows) return run_windows(cfg);
        if (active == estimate) return run_estimate(cfg);
        if (active == sensitivity) return run_sensitivity(cfg);
        return run_simulate(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: [" << module_of(e) << "] " << e.what() << "\n";
        return 1;
    }
}
