#pragma once

// JSON and delimited-text renderings of analysis results. Requires
// nlohmann/json (vendor/json.hpp) on the include path.

#include <json.hpp>
#include <cmath>
#include <string>

#include "rdlocal/balance.hpp"
#include "rdlocal/estimation.hpp"
#include "rdlocal/numeric.hpp"
#include "rdlocal/sensitivity.hpp"
#include "rdlocal/simulation.hpp"

namespace rdlocal {

namespace detail {

inline nlohmann::json json_number(double x) {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json();
}

} // namespace detail

inline void to_json(nlohmann::json& j, const BalanceResult& r) {
    j = nlohmann::json{{"p_values", r.per_statistic_p},
                       {"observed_stats", r.observed_stats},
                       {"p_min", detail::json_number(r.p_min)},
                       {"alpha", r.alpha},
                       {"decision", r.rejected ? "rejected" : "plausible"},
                       {"draws", r.m_draws},
                       {"degenerate_draws", r.degenerate_draws}};
}

inline void to_json(nlohmann::json& j, const WindowScanPoint& p) {
    j = nlohmann::json{{"bandwidth", p.bandwidth},
                       {"n", p.n},
                       {"n_treated", p.n_t},
                       {"n_control", p.n_c},
                       {"status", to_string(p.status)},
                       {"message", p.message},
                       {"p_min", detail::json_number(p.p_min)},
                       {"plausible", p.plausible},
                       {"p_values", p.per_statistic_p}};
}

inline void to_json(nlohmann::json& j, const WindowSelection& s) {
    j = nlohmann::json{{"selected_bandwidth", s.selected_bandwidth
                                                  ? nlohmann::json(*s.selected_bandwidth)
                                                  : nlohmann::json()},
                       {"scan", s.scan}};
}

inline void to_json(nlohmann::json& j, const ITTEstimate& itt) {
    j = nlohmann::json{{"itt_y", itt.itt_y},       {"itt_w", itt.itt_w},
                       {"var_itt_y", itt.var_itt_y}, {"var_itt_w", itt.var_itt_w},
                       {"cov_itt", itt.cov_itt},   {"n_treated", itt.n_t},
                       {"n_control", itt.n_c}};
}

inline void to_json(nlohmann::json& j, const ComplierEstimate& e) {
    j = nlohmann::json{{"method", to_string(e.method)},
                       {"point", e.point},
                       {"variance", e.variance},
                       {"ci_lower", e.ci.first},
                       {"ci_upper", e.ci.second},
                       {"ci_alpha", e.ci_alpha},
                       {"itt", e.itt},
                       {"n", e.n},
                       {"cutoff", e.cutoff},
                       {"bandwidth", e.bandwidth},
                       {"warnings", e.warnings}};
}

inline void to_json(nlohmann::json& j, const BlockCell& c) {
    j = nlohmann::json{{"block", c.label},   {"size", c.size},       {"n_treated", c.n_t},
                       {"n_control", c.n_c}, {"point", c.point},     {"variance", c.variance},
                       {"itt_y", c.itt_y},   {"itt_w", c.itt_w}};
}

inline void to_json(nlohmann::json& j, const BlockEstimate& e) {
    j = nlohmann::json{{"per_block", e.per_block}, {"pooled", e.pooled}};
}

inline void to_json(nlohmann::json& j, const SensitivityRow& r) {
    j = nlohmann::json{{"mechanism", r.mechanism},
                       {"bandwidth", r.bandwidth},
                       {"n", r.n},
                       {"n_treated", r.n_t},
                       {"n_control", r.n_c},
                       {"p_min", detail::json_number(r.p_min)},
                       {"flagged", r.flagged},
                       {"balance_error", r.balance_error},
                       {"estimator", r.estimator},
                       {"estimate_error", r.estimate_error}};
    if (r.estimate) j["estimate"] = *r.estimate;
}

inline void to_json(nlohmann::json& j, const RingDecomposition& d) {
    j = nlohmann::json{{"tau_inner", d.tau_inner},
                       {"tau_ring", d.tau_ring},
                       {"tau_outer", d.tau_outer},
                       {"reconstructed_outer", d.reconstructed_outer},
                       {"discrepancy", d.discrepancy},
                       {"n_inner", d.n_inner},
                       {"n_ring", d.n_ring},
                       {"n_outer", d.n_outer}};
}

inline void to_json(nlohmann::json& j, const CoverageResult& r) {
    j = nlohmann::json{{"reps", r.reps},
                       {"estimated", r.estimated},
                       {"covered", r.covered},
                       {"coverage", detail::json_number(r.coverage)},
                       {"mean_ci_width", detail::json_number(r.mean_ci_width)},
                       {"balance_tested", r.balance_tested},
                       {"balance_rejected", r.balance_rejected},
                       {"rejection_rate", detail::json_number(r.rejection_rate)},
                       {"estimation_failures", r.estimation_failures},
                       {"balance_failures", r.balance_failures}};
}

/// The paper-style p-curve: one (bandwidth, p_min) row per grid point.
inline std::string p_curve_csv(const WindowSelection& selection) {
    std::string out = "bandwidth,p_min\n";
    for (const auto& point : selection.scan) {
        out += dtos(point.bandwidth);
        out += ",";
        out += dtos(point.p_min);
        out += "\n";
    }
    return out;
}

inline std::string estimate_csv_header() {
    return "mechanism,bandwidth,n,n_treated,n_control,itt_y,itt_w,point,variance,"
           "ci_lower,ci_upper,warnings\n";
}

inline std::string estimate_csv_row(const std::string& mechanism, const ComplierEstimate& e) {
    std::string warnings;
    for (std::size_t i = 0; i < e.warnings.size(); ++i) {
        if (i > 0) warnings += "; ";
        warnings += e.warnings[i];
    }
    std::string out;
    out += csv_escape(mechanism);
    out += "," + dtos(e.bandwidth);
    out += "," + std::to_string(e.n);
    out += "," + std::to_string(e.itt.n_t);
    out += "," + std::to_string(e.itt.n_c);
    out += "," + dtos(e.itt.itt_y);
    out += "," + dtos(e.itt.itt_w);
    out += "," + dtos(e.point);
    out += "," + dtos(e.variance);
    out += "," + dtos(e.ci.first);
    out += "," + dtos(e.ci.second);
    out += "," + csv_escape(warnings);
    out += "\n";
    return out;
}

/// Sensitivity table; `flagged` encodes the struck-out rows.
inline std::string sensitivity_csv(const std::vector<SensitivityRow>& rows) {
    std::string out =
        "mechanism,bandwidth,n,n_treated,n_control,p_min,flagged,point,variance,"
        "ci_lower,ci_upper,estimator,balance_error,estimate_error\n";
    for (const auto& r : rows) {
        out += csv_escape(r.mechanism);
        out += "," + dtos(r.bandwidth);
        out += "," + std::to_string(r.n);
        out += "," + std::to_string(r.n_t);
        out += "," + std::to_string(r.n_c);
        out += "," + dtos(r.p_min);
        out += std::string(",") + (r.flagged ? "1" : "0");
        if (r.estimate) {
            out += "," + dtos(r.estimate->point);
            out += "," + dtos(r.estimate->variance);
            out += "," + dtos(r.estimate->ci.first);
            out += "," + dtos(r.estimate->ci.second);
        } else {
            out += ",,,,";
        }
        out += "," + csv_escape(r.estimator);
        out += "," + csv_escape(r.balance_error);
        out += "," + csv_escape(r.estimate_error);
        out += "\n";
    }
    return out;
}

inline std::string coverage_csv(const CoverageResult& r) {
    std::string out =
        "reps,estimated,covered,coverage,mean_ci_width,balance_tested,balance_rejected,"
        "rejection_rate,estimation_failures,balance_failures\n";
    out += std::to_string(r.reps);
    out += "," + std::to_string(r.estimated);
    out += "," + std::to_string(r.covered);
    out += "," + dtos(r.coverage);
    out += "," + dtos(r.mean_ci_width);
    out += "," + std::to_string(r.balance_tested);
    out += "," + std::to_string(r.balance_rejected);
    out += "," + dtos(r.rejection_rate);
    out += "," + std::to_string(r.estimation_failures);
    out += "," + std::to_string(r.balance_failures);
    out += "\n";
    return out;
}

} // namespace rdlocal
