#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdlocal/balance.hpp"
#include "rdlocal/dataset.hpp"
#include "rdlocal/errors.hpp"
#include "rdlocal/estimation.hpp"
#include "rdlocal/mechanism.hpp"

namespace rdlocal {

/// One (mechanism, bandwidth) cell of the sensitivity table. Implausible
/// cells keep their estimates and are flagged instead of dropped, mirroring
/// a struck-out table row.
struct SensitivityRow {
    std::string mechanism;
    double bandwidth = 0.0;
    std::size_t n = 0, n_t = 0, n_c = 0;
    double p_min = std::numeric_limits<double>::quiet_NaN();
    bool flagged = false; // p_min < alpha
    std::string balance_error;
    std::optional<ComplierEstimate> estimate;
    std::string estimate_error;
    std::string estimator; // "complete" or "block"
};

/// Crossed (bandwidth x mechanism) analysis. Balance never sees outcomes;
/// estimation runs regardless of the balance decision. Per-cell failures are
/// recorded in the row, not raised.
inline std::vector<SensitivityRow> sensitivity_grid(
    const Dataset& data, double cutoff, const std::vector<MechanismSpec>& mechanisms,
    const std::vector<double>& bandwidths, StatisticKind kind,
    std::span<const std::string> covariate_names, double alpha, const PValueOptions& options,
    const EstimationOptions& estimation = {}, std::size_t min_arm = 2) {
    if (mechanisms.empty()) throw std::invalid_argument("need at least one mechanism");
    if (bandwidths.empty()) throw std::invalid_argument("need at least one bandwidth");

    std::vector<double> hs = bandwidths;
    std::sort(hs.begin(), hs.end(), std::greater<>());

    std::vector<SensitivityRow> rows;
    for (std::size_t mi = 0; mi < mechanisms.size(); ++mi) {
        const MechanismSpec& spec = mechanisms[mi];
        std::vector<std::string> names(covariate_names.begin(), covariate_names.end());
        if (names.empty()) names = default_balance_covariates(data, spec);

        for (std::size_t hi = 0; hi < hs.size(); ++hi) {
            SensitivityRow row;
            row.mechanism = spec.display_label();
            row.bandwidth = hs[hi];
            const Window window = window_units(data, cutoff, hs[hi]);
            row.n = window.size();
            row.n_t = window.n_treated;
            row.n_c = window.n_control;

            // balance step (outcome-blind)
            if (window.n_treated < min_arm || window.n_control < min_arm) {
                row.balance_error =
                    "untestable: fewer than " + std::to_string(min_arm) + " units in an arm";
            } else {
                try {
                    const Mechanism mechanism = bind_mechanism(spec, window, data);
                    PValueOptions opts = options;
                    opts.stream =
                        CounterRng::derive_stream(options.stream, (mi << 20) ^ hi);
                    const BalanceResult result =
                        balance_test(window, data, mechanism, kind, names, alpha, opts);
                    row.p_min = result.p_min;
                    row.flagged = result.rejected;
                } catch (const Error& e) {
                    row.balance_error = e.what();
                }
            }

            // estimation step
            try {
                if (spec.kind == MechanismKind::block) {
                    const Blocking blocking = build_blocks(window, data, spec.block_covariates);
                    row.estimate = block_complier_ate(blocking, window, data, estimation).pooled;
                    row.estimator = "block";
                } else {
                    row.estimate = complete_randomization_estimate(window, data, estimation);
                    row.estimator = "complete";
                }
            } catch (const std::exception& e) {
                row.estimate_error = e.what();
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

/// Difference-in-means ATE estimate on assignment (the ITT effect) for an
/// arbitrary unit set, optionally block-weighted.
namespace detail {

inline double region_ate(const Dataset& data, std::span<const std::size_t> units,
                         const MechanismSpec& spec, const Window& host_window,
                         const std::string& region_name) {
    const auto& z = data.assignment();
    const auto& y = data.outcome();
    const auto mean_diff = [&](std::span<const std::size_t> us) {
        KahanSum st, sc;
        std::size_t nt = 0, nc = 0;
        for (std::size_t u : us) {
            if (z[u] == 1) {
                st.add(y[u]);
                ++nt;
            } else {
                sc.add(y[u]);
                ++nc;
            }
        }
        if (nt == 0 || nc == 0) {
            throw EstimationError("region '" + region_name +
                                  "' has an empty arm; effect not estimable");
        }
        return st.value() / static_cast<double>(nt) - sc.value() / static_cast<double>(nc);
    };

    if (spec.kind != MechanismKind::block) {
        return mean_diff(units);
    }
    Window region;
    region.cutoff = host_window.cutoff;
    region.bandwidth = host_window.bandwidth;
    region.members.assign(units.begin(), units.end());
    const Blocking blocking = build_blocks(region, data, spec.block_covariates);
    KahanSum acc;
    for (std::size_t j = 0; j < blocking.block_count(); ++j) {
        std::vector<std::size_t> block_units;
        block_units.reserve(blocking.blocks[j].size());
        for (std::size_t pos : blocking.blocks[j]) block_units.push_back(region.members[pos]);
        const double weight = static_cast<double>(block_units.size()) /
                              static_cast<double>(region.members.size());
        acc.add(weight * mean_diff(block_units));
    }
    return acc.value();
}

} // namespace detail

/// ATE decomposition across nested windows: the outer-window effect as the
/// size-weighted average of the inner-window effect and the ring effect.
/// Exact on true unit-level effects; on estimates the discrepancy is a
/// heterogeneity diagnostic, not an identity.
struct RingDecomposition {
    double tau_inner = 0.0;
    double tau_ring = 0.0;
    double tau_outer = 0.0;
    double reconstructed_outer = 0.0;
    double discrepancy = 0.0; // tau_outer - reconstructed_outer
    std::size_t n_inner = 0, n_ring = 0, n_outer = 0;
};

inline RingDecomposition ring_decomposition(const Dataset& data, double cutoff, double h_inner,
                                            double h_outer, const MechanismSpec& spec) {
    if (!(h_inner > 0.0) || !(h_outer > h_inner)) {
        throw std::invalid_argument("need 0 < h_inner < h_outer");
    }
    const Window inner = window_units(data, cutoff, h_inner);
    const Window outer = window_units(data, cutoff, h_outer);

    std::vector<std::size_t> ring;
    std::set_difference(outer.members.begin(), outer.members.end(), inner.members.begin(),
                        inner.members.end(), std::back_inserter(ring));
    if (ring.empty()) throw EstimationError("ring between the two windows is empty");
    if (inner.members.empty()) throw EstimationError("inner window is empty");

    RingDecomposition d;
    d.n_inner = inner.members.size();
    d.n_ring = ring.size();
    d.n_outer = outer.members.size();
    d.tau_inner = detail::region_ate(data, inner.members, spec, inner, "inner window");
    d.tau_ring = detail::region_ate(data, ring, spec, outer, "ring");
    d.tau_outer = detail::region_ate(data, outer.members, spec, outer, "outer window");
    d.reconstructed_outer = (static_cast<double>(d.n_inner) * d.tau_inner +
                             static_cast<double>(d.n_ring) * d.tau_ring) /
                            static_cast<double>(d.n_outer);
    d.discrepancy = d.tau_outer - d.reconstructed_outer;
    return d;
}

} // namespace rdlocal
