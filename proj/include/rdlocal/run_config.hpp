#pragma once

// Run configuration for the command-line front end. Requires nlohmann/json
// (vendor/json.hpp) on the include path.

#include <json.hpp>
#include <string>
#include <vector>

#include "rdlocal/balance.hpp"
#include "rdlocal/csv.hpp"
#include "rdlocal/dataset.hpp"
#include "rdlocal/errors.hpp"
#include "rdlocal/mechanism.hpp"
#include "rdlocal/simulation.hpp"

namespace rdlocal {

/// Everything a batch run needs. Serialization keeps every field explicit,
/// so the echoed effective config always shows the defaults actually used
/// and round-trips losslessly.
struct RunConfig {
    // input
    std::string input;
    std::string delimiter = ",";
    std::string running_col;
    std::string outcome_col;
    std::string receipt_col;
    std::vector<std::pair<std::string, std::string>> covariate_cols; // (name, kind)

    // design
    double cutoff = 0.0;
    Direction direction = Direction::treated_if_le;
    std::vector<MechanismSpec> mechanisms{MechanismSpec{}};
    std::vector<double> grid;
    double bandwidth = 0.0;

    // balance testing
    StatisticKind statistic = StatisticKind::mahalanobis;
    std::vector<std::string> balance_covariates; // empty = all
    double alpha = 0.15;
    int draws = 1000;
    PValueMode p_mode = PValueMode::default_mode;
    std::size_t min_arm = 2;

    // estimation
    double ci_alpha = 0.05;
    double weak_threshold = 0.05;

    // simulation
    DGPConfig dgp;
    int reps = 1000;

    // run control
    std::uint64_t seed = 0;
    std::string out = ".";
    std::vector<std::string> formats{"csv", "json"};

    Schema schema() const {
        Schema s;
        s.running = running_col;
        s.outcome = outcome_col;
        s.receipt = receipt_col;
        if (delimiter.size() != 1) throw ConfigError("delimiter must be a single character");
        s.delimiter = delimiter[0];
        for (const auto& [name, kind] : covariate_cols) {
            if (kind == "numeric") {
                s.covariates.emplace_back(name, CovariateKind::numeric);
            } else if (kind == "categorical") {
                s.covariates.emplace_back(name, CovariateKind::categorical);
            } else {
                throw ConfigError("covariate '" + name + "' has unknown kind '" + kind +
                                  "' (expected numeric or categorical)");
            }
        }
        return s;
    }
};

inline void to_json(nlohmann::json& j, const MechanismSpec& spec) {
    j = nlohmann::json{{"kind", to_string(spec.kind)},
                       {"blocks", spec.block_covariates},
                       {"propensity_column", spec.propensity_column},
                       {"propensity_covariates", spec.propensity_covariates},
                       {"condition_on_nt", spec.condition_on_nt},
                       {"label", spec.label}};
}

inline void from_json(const nlohmann::json& j, MechanismSpec& spec) {
    spec.kind = mechanism_kind_from_string(j.value("kind", "complete"));
    spec.block_covariates = j.value("blocks", std::vector<std::string>{});
    spec.propensity_column = j.value("propensity_column", std::string{});
    spec.propensity_covariates = j.value("propensity_covariates", std::vector<std::string>{});
    spec.condition_on_nt = j.value("condition_on_nt", false);
    spec.label = j.value("label", std::string{});
}

inline void to_json(nlohmann::json& j, const NumericCovariateLaw& law) {
    j = nlohmann::json{
        {"name", law.name}, {"mean", law.mean}, {"sd", law.sd}, {"s_slope", law.s_slope}};
}

inline void from_json(const nlohmann::json& j, NumericCovariateLaw& law) {
    law.name = j.at("name").get<std::string>();
    law.mean = j.value("mean", 0.0);
    law.sd = j.value("sd", 1.0);
    law.s_slope = j.value("s_slope", 0.0);
}

inline void to_json(nlohmann::json& j, const CategoricalCovariateLaw& law) {
    j = nlohmann::json{{"name", law.name}, {"levels", law.levels}, {"probs", law.probs}};
}

inline void from_json(const nlohmann::json& j, CategoricalCovariateLaw& law) {
    law.name = j.at("name").get<std::string>();
    law.levels = j.at("levels").get<std::vector<std::string>>();
    law.probs = j.at("probs").get<std::vector<double>>();
}

inline void to_json(nlohmann::json& j, const DGPConfig& dgp) {
    j = nlohmann::json{
        {"n", dgp.n},
        {"cutoff", dgp.cutoff},
        {"half_range", dgp.half_range},
        {"direction", to_string(dgp.direction)},
        {"assignment",
         {{"law", to_string(dgp.assignment.law)},
          {"treated_fraction", dgp.assignment.treated_fraction},
          {"blocks", dgp.assignment.block_covariates},
          {"propensity_column", dgp.assignment.propensity_column}}},
        {"numeric_covariates", dgp.numeric_covariates},
        {"categorical_covariates", dgp.categorical_covariates},
        {"outcome",
         {{"intercept", dgp.outcome.intercept},
          {"s_slope", dgp.outcome.s_slope},
          {"noise_sd", dgp.outcome.noise_sd},
          {"numeric_coefs", dgp.outcome.numeric_coefs},
          {"categorical_effects", dgp.outcome.categorical_effects}}},
        {"effect",
         {{"constant", dgp.effect.constant},
          {"jump", dgp.effect.jump},
          {"jump_radius", std::isfinite(dgp.effect.jump_radius)
                              ? nlohmann::json(dgp.effect.jump_radius)
                              : nlohmann::json()}}},
        {"compliance",
         {{"prob", dgp.compliance.prob},
          {"numeric_logit_coefs", dgp.compliance.numeric_logit_coefs}}},
        {"seed", dgp.seed}};
}

inline void from_json(const nlohmann::json& j, DGPConfig& dgp) {
    dgp.n = j.value("n", std::size_t{100});
    dgp.cutoff = j.value("cutoff", 0.0);
    dgp.half_range = j.value("half_range", 2000.0);
    dgp.direction = direction_from_string(j.value("direction", "treated_if_le"));
    if (j.contains("assignment")) {
        const auto& a = j.at("assignment");
        dgp.assignment.law = assignment_law_from_string(a.value("law", "complete"));
        dgp.assignment.treated_fraction = a.value("treated_fraction", 0.5);
        dgp.assignment.block_covariates = a.value("blocks", std::vector<std::string>{});
        dgp.assignment.propensity_column = a.value("propensity_column", std::string{});
    }
    dgp.numeric_covariates = j.value("numeric_covariates", std::vector<NumericCovariateLaw>{});
    dgp.categorical_covariates =
        j.value("categorical_covariates", std::vector<CategoricalCovariateLaw>{});
    if (j.contains("outcome")) {
        const auto& o = j.at("outcome");
        dgp.outcome.intercept = o.value("intercept", 0.0);
        dgp.outcome.s_slope = o.value("s_slope", 0.0);
        dgp.outcome.noise_sd = o.value("noise_sd", 1.0);
        dgp.outcome.numeric_coefs = o.value("numeric_coefs", std::vector<double>{});
        dgp.outcome.categorical_effects =
            o.value("categorical_effects", std::vector<std::vector<double>>{});
    }
    if (j.contains("effect")) {
        const auto& e = j.at("effect");
        dgp.effect.constant = e.value("constant", 0.0);
        dgp.effect.jump = e.value("jump", 0.0);
        if (e.contains("jump_radius") && !e.at("jump_radius").is_null()) {
            dgp.effect.jump_radius = e.at("jump_radius").get<double>();
        } else {
            dgp.effect.jump_radius = std::numeric_limits<double>::infinity();
        }
    }
    if (j.contains("compliance")) {
        const auto& c = j.at("compliance");
        dgp.compliance.prob = c.value("prob", 1.0);
        dgp.compliance.numeric_logit_coefs =
            c.value("numeric_logit_coefs", std::vector<double>{});
    }
    dgp.seed = j.value("seed", std::uint64_t{0});
}

inline void to_json(nlohmann::json& j, const RunConfig& cfg) {
    nlohmann::json covs = nlohmann::json::array();
    for (const auto& [name, kind] : cfg.covariate_cols) {
        covs.push_back({{"name", name}, {"kind", kind}});
    }
    j = nlohmann::json{{"input", cfg.input},
                       {"delimiter", cfg.delimiter},
                       {"schema",
                        {{"running", cfg.running_col},
                         {"outcome", cfg.outcome_col},
                         {"receipt", cfg.receipt_col},
                         {"covariates", covs}}},
                       {"cutoff", cfg.cutoff},
                       {"direction", to_string(cfg.direction)},
                       {"mechanisms", cfg.mechanisms},
                       {"grid", cfg.grid},
                       {"bandwidth", cfg.bandwidth},
                       {"statistic", to_string(cfg.statistic)},
                       {"balance_covariates", cfg.balance_covariates},
                       {"alpha", cfg.alpha},
                       {"draws", cfg.draws},
                       {"p_mode", to_string(cfg.p_mode)},
                       {"min_arm", cfg.min_arm},
                       {"ci_alpha", cfg.ci_alpha},
                       {"weak_threshold", cfg.weak_threshold},
                       {"dgp", cfg.dgp},
                       {"reps", cfg.reps},
                       {"seed", cfg.seed},
                       {"out", cfg.out},
                       {"formats", cfg.formats}};
}

inline void from_json(const nlohmann::json& j, RunConfig& cfg) {
    cfg.input = j.value("input", std::string{});
    cfg.delimiter = j.value("delimiter", std::string{","});
    if (j.contains("schema")) {
        const auto& s = j.at("schema");
        cfg.running_col = s.value("running", std::string{});
        cfg.outcome_col = s.value("outcome", std::string{});
        cfg.receipt_col = s.value("receipt", std::string{});
        cfg.covariate_cols.clear();
        for (const auto& c : s.value("covariates", nlohmann::json::array())) {
            cfg.covariate_cols.emplace_back(c.at("name").get<std::string>(),
                                            c.value("kind", "numeric"));
        }
    }
    cfg.cutoff = j.value("cutoff", 0.0);
    cfg.direction = direction_from_string(j.value("direction", "treated_if_le"));
    if (j.contains("mechanisms")) {
        cfg.mechanisms = j.at("mechanisms").get<std::vector<MechanismSpec>>();
    }
    cfg.grid = j.value("grid", std::vector<double>{});
    cfg.bandwidth = j.value("bandwidth", 0.0);
    cfg.statistic = statistic_from_string(j.value("statistic", "mahalanobis"));
    cfg.balance_covariates = j.value("balance_covariates", std::vector<std::string>{});
    cfg.alpha = j.value("alpha", 0.15);
    cfg.draws = j.value("draws", 1000);
    cfg.p_mode = p_mode_from_string(j.value("p_mode", "default"));
    cfg.min_arm = j.value("min_arm", std::size_t{2});
    cfg.ci_alpha = j.value("ci_alpha", 0.05);
    cfg.weak_threshold = j.value("weak_threshold", 0.05);
    if (j.contains("dgp")) cfg.dgp = j.at("dgp").get<DGPConfig>();
    cfg.reps = j.value("reps", 1000);
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.out = j.value("out", std::string{"."});
    cfg.formats = j.value("formats", std::vector<std::string>{"csv", "json"});
}

} // namespace rdlocal
