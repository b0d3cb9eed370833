#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdlocal/dataset.hpp"
#include "rdlocal/errors.hpp"
#include "rdlocal/mechanism.hpp"
#include "rdlocal/normal.hpp"
#include "rdlocal/numeric.hpp"

namespace rdlocal {

struct EstimationOptions {
    double ci_alpha = 0.05;       // two-sided CI level 1 - alpha
    double weak_threshold = 0.05; // minimum |ITT_W| for the ratio estimator
};

/// Intention-to-treat estimates on outcome and receipt, with conservative
/// Neymanian variance estimates and the treatment-arm covariance.
struct ITTEstimate {
    double itt_y = 0.0;
    double itt_w = 0.0;
    double var_itt_y = 0.0;
    double var_itt_w = 0.0;
    double cov_itt = 0.0;
    std::size_t n_t = 0;
    std::size_t n_c = 0;
};

namespace detail {

struct ArmMoments {
    double mean_y = 0.0, mean_w = 0.0;
    double ss_y = 0.0;  // sum of squared outcome deviations
    double ss_w = 0.0;  // sum of squared receipt deviations
    double ss_yw = 0.0; // sum of cross deviations
    std::size_t n = 0;
};

inline ArmMoments arm_moments(const Dataset& data, std::span<const std::size_t> units,
                              int arm) {
    const auto& z = data.assignment();
    const auto& y = data.outcome();
    const auto& w = data.effective_receipt();
    ArmMoments m;
    KahanSum sy, sw;
    for (std::size_t u : units) {
        if (z[u] != arm) continue;
        ++m.n;
        sy.add(y[u]);
        sw.add(static_cast<double>(w[u]));
    }
    if (m.n == 0) return m;
    m.mean_y = sy.value() / static_cast<double>(m.n);
    m.mean_w = sw.value() / static_cast<double>(m.n);
    KahanSum qy, qw, qyw;
    for (std::size_t u : units) {
        if (z[u] != arm) continue;
        const double dy = y[u] - m.mean_y;
        const double dw = static_cast<double>(w[u]) - m.mean_w;
        qy.add(dy * dy);
        qw.add(dw * dw);
        qyw.add(dy * dw);
    }
    m.ss_y = qy.value();
    m.ss_w = qw.value();
    m.ss_yw = qyw.value();
    return m;
}

} // namespace detail

/// ITT point estimates, arm-specific conservative variance estimates, and
/// the treatment-group covariance, over an arbitrary unit list (a window or
/// one block).
///
/// Requires at least 2 units per arm and one-sided noncompliance
/// (w = 0 whenever z = 0) in the data.
inline ITTEstimate itt_estimates(const Dataset& data, std::span<const std::size_t> units) {
    const auto& z = data.assignment();
    const auto& w = data.effective_receipt();
    for (std::size_t u : units) {
        if (z[u] == 0 && w[u] == 1) {
            throw EstimationError("one-sided noncompliance violated at row " +
                                  std::to_string(u + 1) +
                                  ": treatment received under control assignment");
        }
    }
    const detail::ArmMoments t = detail::arm_moments(data, units, 1);
    const detail::ArmMoments c = detail::arm_moments(data, units, 0);
    if (t.n < 2 || c.n < 2) {
        throw EstimationError("need at least 2 units per arm (n_t=" + std::to_string(t.n) +
                              ", n_c=" + std::to_string(c.n) + ")");
    }
    ITTEstimate itt;
    itt.n_t = t.n;
    itt.n_c = c.n;
    const double nt = static_cast<double>(t.n);
    const double nc = static_cast<double>(c.n);
    itt.itt_y = t.mean_y - c.mean_y;
    itt.itt_w = t.mean_w - c.mean_w;
    itt.var_itt_y = t.ss_y / (nt * (nt - 1.0)) + c.ss_y / (nc * (nc - 1.0));
    itt.var_itt_w = t.ss_w / (nt * (nt - 1.0)) + c.ss_w / (nc * (nc - 1.0));
    itt.cov_itt = t.ss_yw / (nt * (nt - 1.0));
    return itt;
}

inline ITTEstimate itt_estimates(const Window& window, const Dataset& data) {
    return itt_estimates(data, window.members);
}

/// Ratio estimator of the local complier average treatment effect.
inline double complier_ate(const ITTEstimate& itt, double weak_threshold = 0.05) {
    if (!(std::abs(itt.itt_w) >= weak_threshold)) {
        throw EstimationError("weak compliance: |ITT_W| = " + dtos(std::abs(itt.itt_w)) +
                              " is below the threshold " + dtos(weak_threshold));
    }
    return itt.itt_y / itt.itt_w;
}

struct VarianceEstimate {
    double value = 0.0;
    bool floored = false; // plug-in formula went negative and was clipped at 0
};

/// Delta-method variance of the ratio estimator:
///   Var(ITT_Y)/ITT_W^2 + ITT_Y^2 Var(ITT_W)/ITT_W^4 - 2 ITT_Y Cov/ITT_W^3.
inline VarianceEstimate var_complier_ate(const ITTEstimate& itt) {
    if (itt.itt_w == 0.0) throw EstimationError("delta-method variance undefined at ITT_W = 0");
    const double w2 = itt.itt_w * itt.itt_w;
    const double value = itt.var_itt_y / w2 + itt.itt_y * itt.itt_y * itt.var_itt_w / (w2 * w2) -
                         2.0 * itt.itt_y * itt.cov_itt / (w2 * itt.itt_w);
    if (value < 0.0) return {0.0, true};
    return {value, false};
}

/// Normal-approximation interval: point +/- z_{alpha/2} sqrt(variance).
inline std::pair<double, double> confidence_interval(double point, double variance,
                                                     double alpha) {
    if (!(variance >= 0.0)) throw std::invalid_argument("variance must be >= 0");
    const double half = normal_two_sided_quantile(alpha) * std::sqrt(variance);
    return {point - half, point + half};
}

enum class EstimationMethod { complete, block };

inline std::string to_string(EstimationMethod m) {
    return m == EstimationMethod::complete ? "complete" : "block";
}

/// Complier ATE with Neymanian uncertainty for one analysis.
struct ComplierEstimate {
    double point = 0.0;
    double variance = 0.0;
    std::pair<double, double> ci{0.0, 0.0};
    double ci_alpha = 0.05;
    EstimationMethod method = EstimationMethod::complete;
    ITTEstimate itt; // window-level (complete) or block-weighted (block)
    std::size_t n = 0;
    double cutoff = 0.0;
    double bandwidth = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

inline ComplierEstimate finish_estimate(const ITTEstimate& itt, const EstimationOptions& opts,
                                        EstimationMethod method) {
    ComplierEstimate est;
    est.method = method;
    est.itt = itt;
    est.point = complier_ate(itt, opts.weak_threshold);
    const VarianceEstimate var = var_complier_ate(itt);
    est.variance = var.value;
    if (var.floored) est.warnings.push_back("delta-method variance was negative; floored at 0");
    est.ci = confidence_interval(est.point, est.variance, opts.ci_alpha);
    est.ci_alpha = opts.ci_alpha;
    return est;
}

} // namespace detail

/// Fuzzy-RDD estimate under local complete randomization. With perfect
/// compliance (w identical to z) this reduces exactly to the ITT:
/// point = itt_y and variance = var_itt_y.
inline ComplierEstimate complete_randomization_estimate(const Window& window,
                                                        const Dataset& data,
                                                        const EstimationOptions& opts = {}) {
    const ITTEstimate itt = itt_estimates(window, data);
    ComplierEstimate est = detail::finish_estimate(itt, opts, EstimationMethod::complete);
    est.n = window.size();
    est.cutoff = window.cutoff;
    est.bandwidth = window.bandwidth;
    return est;
}

/// Per-block piece of a block-randomized estimate.
struct BlockCell {
    std::string label;
    std::size_t size = 0, n_t = 0, n_c = 0;
    double point = 0.0;
    double variance = 0.0;
    double itt_y = 0.0;
    double itt_w = 0.0;
};

struct BlockEstimate {
    std::vector<BlockCell> per_block;
    ComplierEstimate pooled;
};

/// Block-randomized estimate: complete-randomization machinery inside each
/// block, pooled with block-size weights
///   point = sum_j |B_j| point_j / sum_j |B_j|
///   var   = sum_j |B_j|^2 var_j / (sum_j |B_j|)^2.
/// Blocks that fail estimability are a hard error (dropping them would
/// silently change the estimand); all offending blocks are listed.
inline BlockEstimate block_complier_ate(const Blocking& blocking, const Window& window,
                                        const Dataset& data,
                                        const EstimationOptions& opts = {}) {
    if (blocking.block_count() == 0) throw EstimationError("blocking has no blocks");

    std::vector<ITTEstimate> itts(blocking.block_count());
    std::string failures;
    for (std::size_t j = 0; j < blocking.block_count(); ++j) {
        std::vector<std::size_t> units;
        units.reserve(blocking.blocks[j].size());
        for (std::size_t pos : blocking.blocks[j]) units.push_back(window.members[pos]);
        try {
            itts[j] = itt_estimates(data, units);
            if (!(std::abs(itts[j].itt_w) >= opts.weak_threshold)) {
                throw EstimationError("weak compliance: |ITT_W| = " +
                                      dtos(std::abs(itts[j].itt_w)) + " below threshold " +
                                      dtos(opts.weak_threshold));
            }
        } catch (const EstimationError& e) {
            if (!failures.empty()) failures += "; ";
            failures += "block '" + blocking.labels[j] + "': " + e.what();
        }
    }
    if (!failures.empty()) {
        throw EstimationError("blocks not estimable: " + failures);
    }

    BlockEstimate estimate;
    std::size_t total_units = 0;
    for (const auto& block : blocking.blocks) total_units += block.size();
    const double total = static_cast<double>(total_units);

    KahanSum point_acc, var_acc;
    KahanSum itt_y_acc, itt_w_acc, var_y_acc, var_w_acc, cov_acc;
    std::size_t n_t = 0, n_c = 0;
    for (std::size_t j = 0; j < blocking.block_count(); ++j) {
        BlockCell cell;
        cell.label = blocking.labels[j];
        cell.size = blocking.blocks[j].size();
        cell.n_t = itts[j].n_t;
        cell.n_c = itts[j].n_c;
        cell.point = complier_ate(itts[j], opts.weak_threshold);
        const VarianceEstimate var = var_complier_ate(itts[j]);
        cell.variance = var.value;
        if (var.floored) {
            estimate.pooled.warnings.push_back("block '" + cell.label +
                                               "': delta-method variance floored at 0");
        }
        cell.itt_y = itts[j].itt_y;
        cell.itt_w = itts[j].itt_w;

        const double weight = static_cast<double>(cell.size) / total;
        point_acc.add(weight * cell.point);
        var_acc.add(weight * weight * cell.variance);
        itt_y_acc.add(weight * cell.itt_y);
        itt_w_acc.add(weight * cell.itt_w);
        var_y_acc.add(weight * weight * itts[j].var_itt_y);
        var_w_acc.add(weight * weight * itts[j].var_itt_w);
        cov_acc.add(weight * weight * itts[j].cov_itt);
        n_t += itts[j].n_t;
        n_c += itts[j].n_c;
        estimate.per_block.push_back(std::move(cell));
    }

    ComplierEstimate& pooled = estimate.pooled;
    pooled.method = EstimationMethod::block;
    pooled.point = point_acc.value();
    pooled.variance = var_acc.value();
    pooled.ci = confidence_interval(pooled.point, pooled.variance, opts.ci_alpha);
    pooled.ci_alpha = opts.ci_alpha;
    pooled.itt.itt_y = itt_y_acc.value();
    pooled.itt.itt_w = itt_w_acc.value();
    pooled.itt.var_itt_y = var_y_acc.value();
    pooled.itt.var_itt_w = var_w_acc.value();
    pooled.itt.cov_itt = cov_acc.value();
    pooled.itt.n_t = n_t;
    pooled.itt.n_c = n_c;
    pooled.n = total_units;
    pooled.cutoff = window.cutoff;
    pooled.bandwidth = window.bandwidth;
    return estimate;
}

} // namespace rdlocal
