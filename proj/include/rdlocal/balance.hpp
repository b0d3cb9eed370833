#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdlocal/dataset.hpp"
#include "rdlocal/encoding.hpp"
#include "rdlocal/errors.hpp"
#include "rdlocal/mechanism.hpp"
#include "rdlocal/numeric.hpp"
#include "rdlocal/rng.hpp"

namespace rdlocal {

/// Covariate balance statistics. All of them are magnitudes (large =
/// imbalanced) so the one-sided rejection region t >= t_obs applies, and
/// none of them sees outcome or receipt columns.
enum class StatisticKind { abs_mean_difference, std_mean_difference, mahalanobis };

inline std::string to_string(StatisticKind k) {
    switch (k) {
        case StatisticKind::abs_mean_difference: return "mean_diff";
        case StatisticKind::std_mean_difference: return "std_mean_diff";
        case StatisticKind::mahalanobis: return "mahalanobis";
    }
    return "?";
}

inline StatisticKind statistic_from_string(std::string_view s) {
    if (s == "mean_diff") return StatisticKind::abs_mean_difference;
    if (s == "std_mean_diff") return StatisticKind::std_mean_difference;
    if (s == "mahalanobis") return StatisticKind::mahalanobis;
    throw ConfigError("unknown statistic '" + std::string(s) +
                      "' (expected mean_diff, std_mean_diff or mahalanobis)");
}

/// |mean(x | z=1) - mean(x | z=0)|.
inline double mean_difference_stat(std::span<const int> z, std::span<const double> x) {
    if (z.size() != x.size()) throw std::invalid_argument("z and covariate length mismatch");
    KahanSum sum_t, sum_c;
    std::size_t n_t = 0, n_c = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] == 1) {
            sum_t.add(x[i]);
            ++n_t;
        } else {
            sum_c.add(x[i]);
            ++n_c;
        }
    }
    if (n_t == 0 || n_c == 0) throw Error("mean difference undefined: one arm is empty");
    return std::abs(sum_t.value() / static_cast<double>(n_t) -
                    sum_c.value() / static_cast<double>(n_c));
}

namespace detail {

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix; eigenvalues below
/// 1e-10 * lambda_max are treated as zero.
inline Eigen::MatrixXd symmetric_pinv(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cutoff = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > cutoff) inv[i] = 1.0 / ev[i];
    }
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// Sample covariance (denominator N-1) of the rows of X.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    const Eigen::RowVectorXd means = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - means;
    return centered.transpose() * centered / static_cast<double>(n - 1);
}

} // namespace detail

/// Omnibus balance statistic (N_T N_C / N) d' cov(X)^+ d with
/// d = colmean(X | z=1) - colmean(X | z=0). The covariance of X is taken
/// over the whole window and does not depend on z.
inline double mahalanobis_stat(std::span<const int> z, const Eigen::MatrixXd& x) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    if (z.size() != n) throw std::invalid_argument("z and covariate matrix length mismatch");
    if (n < 2) throw Error("Mahalanobis statistic needs at least 2 units");
    std::size_t n_t = 0;
    for (int v : z) n_t += static_cast<std::size_t>(v);
    const std::size_t n_c = n - n_t;
    if (n_t == 0 || n_c == 0) throw Error("Mahalanobis statistic undefined: one arm is empty");

    Eigen::VectorXd mean_t = Eigen::VectorXd::Zero(x.cols());
    Eigen::VectorXd mean_c = Eigen::VectorXd::Zero(x.cols());
    for (std::size_t i = 0; i < n; ++i) {
        if (z[i] == 1) {
            mean_t += x.row(static_cast<Eigen::Index>(i)).transpose();
        } else {
            mean_c += x.row(static_cast<Eigen::Index>(i)).transpose();
        }
    }
    mean_t /= static_cast<double>(n_t);
    mean_c /= static_cast<double>(n_c);
    const Eigen::VectorXd d = mean_t - mean_c;
    const Eigen::MatrixXd pinv = detail::symmetric_pinv(detail::sample_covariance(x));
    const double factor =
        static_cast<double>(n_t) * static_cast<double>(n_c) / static_cast<double>(n);
    return factor * d.dot(pinv * d);
}

/// Precomputed evaluator for one window: encodes covariates once, then maps
/// assignment vectors to statistic values. Degenerate assignments (an empty
/// arm, possible under Bernoulli draws) score +infinity on every statistic.
class BalanceEvaluator {
public:
    BalanceEvaluator(StatisticKind kind, const Window& window, const Dataset& data,
                     std::span<const std::string> covariate_names)
        : kind_(kind) {
        if (covariate_names.empty()) {
            throw ConfigError("balance test needs at least one covariate");
        }
        EncodedCovariates enc = encode_covariates(data, window.members, covariate_names);
        x_ = std::move(enc.matrix);
        if (x_.cols() == 0) {
            throw ConfigError("covariate encoding produced no columns "
                              "(single-level categorical covariates only?)");
        }
        if (kind == StatisticKind::mahalanobis) {
            if (x_.rows() < 2) throw Error("Mahalanobis statistic needs at least 2 units");
            names_ = {"mahalanobis"};
            cov_pinv_ = detail::symmetric_pinv(detail::sample_covariance(x_));
        } else {
            names_ = std::move(enc.term_names);
            if (kind == StatisticKind::std_mean_difference) {
                inv_sd_.resize(static_cast<std::size_t>(x_.cols()));
                for (Eigen::Index j = 0; j < x_.cols(); ++j) {
                    const double var = detail::sample_covariance(x_.col(j))(0, 0);
                    inv_sd_[static_cast<std::size_t>(j)] = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
                }
            }
        }
    }

    const std::vector<std::string>& statistic_names() const { return names_; }
    std::size_t statistic_count() const { return names_.size(); }
    std::size_t unit_count() const { return static_cast<std::size_t>(x_.rows()); }

    /// Writes one value per statistic name into `out`.
    void evaluate(std::span<const int> z, std::span<double> out) const {
        const std::size_t n = unit_count();
        if (z.size() != n) throw std::invalid_argument("assignment length mismatch");
        std::size_t n_t = 0;
        for (int v : z) n_t += static_cast<std::size_t>(v);
        const std::size_t n_c = n - n_t;
        if (n_t == 0 || n_c == 0) {
            std::fill(out.begin(), out.end(), std::numeric_limits<double>::infinity());
            return;
        }

        // both arm sums are accumulated directly (not as total minus treated)
        // so an assignment and its mirror produce bit-identical statistics
        Eigen::VectorXd sum_t = Eigen::VectorXd::Zero(x_.cols());
        Eigen::VectorXd sum_c = Eigen::VectorXd::Zero(x_.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x_.row(static_cast<Eigen::Index>(i)).transpose();
            if (z[i] == 1) {
                sum_t += row;
            } else {
                sum_c += row;
            }
        }
        const Eigen::VectorXd mean_t = sum_t / static_cast<double>(n_t);
        const Eigen::VectorXd mean_c = sum_c / static_cast<double>(n_c);
        const Eigen::VectorXd d = mean_t - mean_c;

        if (kind_ == StatisticKind::mahalanobis) {
            const double factor =
                static_cast<double>(n_t) * static_cast<double>(n_c) / static_cast<double>(n);
            out[0] = factor * d.dot(cov_pinv_ * d);
            return;
        }
        for (Eigen::Index j = 0; j < x_.cols(); ++j) {
            double v = std::abs(d[j]);
            if (kind_ == StatisticKind::std_mean_difference) {
                v *= inv_sd_[static_cast<std::size_t>(j)];
            }
            out[static_cast<std::size_t>(j)] = v;
        }
    }

private:
    StatisticKind kind_;
    std::vector<std::string> names_;
    Eigen::MatrixXd x_;
    Eigen::MatrixXd cov_pinv_;
    std::vector<double> inv_sd_;
};

/// How the randomization p-value is computed.
///   default_mode:  (1 + #{t >= t_obs}) / (M + 1)   - observed draw included
///   paper_exact:   #{t >= t_obs} / (M + 1)         - the literal formula
///   exact:         sum_z P(z) I(t(z) >= t_obs)     - full enumeration
enum class PValueMode { default_mode, paper_exact, exact };

inline std::string to_string(PValueMode m) {
    switch (m) {
        case PValueMode::default_mode: return "default";
        case PValueMode::paper_exact: return "paper_exact";
        case PValueMode::exact: return "exact";
    }
    return "?";
}

inline PValueMode p_mode_from_string(std::string_view s) {
    if (s == "default") return PValueMode::default_mode;
    if (s == "paper_exact") return PValueMode::paper_exact;
    if (s == "exact") return PValueMode::exact;
    throw ConfigError("unknown p-value mode '" + std::string(s) +
                      "' (expected default, paper_exact or exact)");
}

struct PValueOptions {
    PValueMode mode = PValueMode::default_mode;
    int draws = 1000; // M
    std::uint64_t seed = 0;
    std::uint64_t stream = 0; // namespace for draw indices
    std::size_t max_support = (1u << 20);
};

struct PValueReport {
    std::map<std::string, double> p_values;
    std::map<std::string, double> observed;
    int draws_used = 0;
    std::size_t degenerate_draws = 0;
};

/// Randomization p-values for every balance statistic at once, reusing one
/// set of assignment draws across covariates.
inline PValueReport randomization_p_values(const Window& window, const Dataset& data,
                                           const Mechanism& mechanism, StatisticKind kind,
                                           std::span<const std::string> covariate_names,
                                           const PValueOptions& options) {
    if (window.n_treated == 0 || window.n_control == 0) {
        throw Error("balance test needs both arms nonempty under the observed assignment");
    }
    if (options.mode != PValueMode::exact && options.draws < 1) {
        throw std::invalid_argument("number of Monte Carlo draws must be >= 1");
    }

    const BalanceEvaluator evaluator(kind, window, data, covariate_names);
    const std::vector<int> z_obs = observed_assignment(window, data);
    const std::size_t k = evaluator.statistic_count();

    std::vector<double> observed(k);
    evaluator.evaluate(z_obs, observed);

    PValueReport report;
    for (std::size_t j = 0; j < k; ++j) {
        report.observed[evaluator.statistic_names()[j]] = observed[j];
    }

    std::vector<double> t(k);
    if (options.mode == PValueMode::exact) {
        const auto support = enumerate_assignments(mechanism, options.max_support);
        std::vector<KahanSum> acc(k);
        for (const auto& entry : support) {
            evaluator.evaluate(entry.z, t);
            for (std::size_t j = 0; j < k; ++j) {
                if (t[j] >= observed[j]) acc[j].add(entry.probability);
            }
        }
        for (std::size_t j = 0; j < k; ++j) {
            report.p_values[evaluator.statistic_names()[j]] = acc[j].value();
        }
        return report;
    }

    const int m = options.draws;
    std::vector<long> count(k, 0);
    std::size_t degenerate = 0;
    for (int d = 0; d < m; ++d) {
        const std::uint64_t draw_index =
            CounterRng::derive_stream(options.stream, static_cast<std::uint64_t>(d));
        const std::vector<int> z = draw_assignment(mechanism, options.seed, draw_index);
        evaluator.evaluate(z, t);
        if (std::isinf(t[0])) ++degenerate;
        for (std::size_t j = 0; j < k; ++j) {
            if (t[j] >= observed[j]) ++count[j];
        }
    }
    if (degenerate == static_cast<std::size_t>(m)) {
        throw Error("all " + std::to_string(m) + " assignment draws were degenerate (empty arm)");
    }
    const double denom = static_cast<double>(m) + 1.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double numer = options.mode == PValueMode::default_mode
                                 ? 1.0 + static_cast<double>(count[j])
                                 : static_cast<double>(count[j]);
        report.p_values[evaluator.statistic_names()[j]] = numer / denom;
    }
    report.draws_used = m;
    report.degenerate_draws = degenerate;
    return report;
}

/// Outcome of the min-p plausibility rule for one (window, mechanism) pair.
struct BalanceResult {
    std::map<std::string, double> per_statistic_p;
    std::map<std::string, double> observed_stats;
    double p_min = 1.0;
    double alpha = 0.15;
    bool rejected = false; // p_min < alpha
    int m_draws = 0;
    std::size_t degenerate_draws = 0;

    bool plausible() const { return !rejected; }
};

/// Minimum p-value rule: reject when p_min < alpha (strict). Deliberately
/// applies no multiple-testing correction.
inline BalanceResult min_p_test(const std::map<std::string, double>& per_statistic_p,
                                double alpha) {
    if (per_statistic_p.empty()) throw std::invalid_argument("min_p_test: empty p-value map");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
    BalanceResult result;
    result.per_statistic_p = per_statistic_p;
    result.alpha = alpha;
    result.p_min = std::numeric_limits<double>::infinity();
    for (const auto& [name, p] : per_statistic_p) result.p_min = std::min(result.p_min, p);
    result.rejected = result.p_min < alpha;
    return result;
}

/// Full plausibility test: p-values for the chosen statistic plus the min-p
/// decision.
inline BalanceResult balance_test(const Window& window, const Dataset& data,
                                  const Mechanism& mechanism, StatisticKind kind,
                                  std::span<const std::string> covariate_names, double alpha,
                                  const PValueOptions& options) {
    const PValueReport report =
        randomization_p_values(window, data, mechanism, kind, covariate_names, options);
    BalanceResult result = min_p_test(report.p_values, alpha);
    result.observed_stats = report.observed;
    result.m_draws = report.draws_used;
    result.degenerate_draws = report.degenerate_draws;
    return result;
}

/// Balance covariates default to every declared covariate except a
/// supplied-propensity column, which parameterizes the mechanism itself.
inline std::vector<std::string> default_balance_covariates(const Dataset& data,
                                                           const MechanismSpec& spec) {
    std::vector<std::string> names;
    for (const auto& c : data.covariates()) {
        if (!spec.propensity_column.empty() && c.name == spec.propensity_column) continue;
        names.push_back(c.name);
    }
    return names;
}

enum class ScanStatus { tested, untestable, failed };

inline std::string to_string(ScanStatus s) {
    switch (s) {
        case ScanStatus::tested: return "tested";
        case ScanStatus::untestable: return "untestable";
        case ScanStatus::failed: return "failed";
    }
    return "?";
}

/// One grid point of the window-selection scan.
struct WindowScanPoint {
    double bandwidth = 0.0;
    std::size_t n = 0, n_t = 0, n_c = 0;
    ScanStatus status = ScanStatus::untestable;
    std::string message;
    double p_min = std::numeric_limits<double>::quiet_NaN();
    bool plausible = false;
    std::map<std::string, double> per_statistic_p;
};

struct WindowSelection {
    std::optional<double> selected_bandwidth; // largest plausible h
    std::vector<WindowScanPoint> scan;        // ascending bandwidth
};

/// Scans the bandwidth grid, testing the mechanism's plausibility at every
/// point (mechanism parameters are re-derived per window), and picks the
/// largest bandwidth whose balance test is plausible.
inline WindowSelection select_window(const Dataset& data, const MechanismSpec& spec,
                                     double cutoff, const std::vector<double>& grid,
                                     StatisticKind kind,
                                     std::span<const std::string> covariate_names, double alpha,
                                     const PValueOptions& options, std::size_t min_arm = 2) {
    if (grid.empty()) throw std::invalid_argument("bandwidth grid must be nonempty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw std::invalid_argument("bandwidths must be > 0");
        if (i > 0 && !(grid[i] > grid[i - 1])) {
            throw std::invalid_argument("bandwidth grid must be sorted strictly ascending");
        }
    }
    std::vector<std::string> default_names;
    if (covariate_names.empty()) {
        default_names = default_balance_covariates(data, spec);
        covariate_names = default_names;
    }

    WindowSelection selection;
    bool any_tested = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        WindowScanPoint point;
        point.bandwidth = grid[i];
        const Window window = window_units(data, cutoff, grid[i]);
        point.n = window.size();
        point.n_t = window.n_treated;
        point.n_c = window.n_control;
        if (window.n_treated < min_arm || window.n_control < min_arm) {
            point.status = ScanStatus::untestable;
            point.message = "fewer than " + std::to_string(min_arm) + " units in an arm";
            selection.scan.push_back(std::move(point));
            continue;
        }
        try {
            const Mechanism mechanism = bind_mechanism(spec, window, data);
            PValueOptions opts = options;
            opts.stream = CounterRng::derive_stream(options.stream, i);
            const BalanceResult result =
                balance_test(window, data, mechanism, kind, covariate_names, alpha, opts);
            point.status = ScanStatus::tested;
            point.p_min = result.p_min;
            point.plausible = result.plausible();
            point.per_statistic_p = result.per_statistic_p;
            any_tested = true;
            if (point.plausible) selection.selected_bandwidth = grid[i];
        } catch (const Error& e) {
            point.status = ScanStatus::failed;
            point.message = e.what();
        }
        selection.scan.push_back(std::move(point));
    }
    if (!any_tested) {
        throw Error("no testable window in the bandwidth grid");
    }
    return selection;
}

} // namespace rdlocal
