#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rdlocal/balance.hpp"
#include "rdlocal/dataset.hpp"
#include "rdlocal/errors.hpp"
#include "rdlocal/estimation.hpp"
#include "rdlocal/mechanism.hpp"
#include "rdlocal/numeric.hpp"
#include "rdlocal/rng.hpp"

namespace rdlocal {

/// x = mean + s_slope * (s - cutoff) + sd * N(0,1).
struct NumericCovariateLaw {
    std::string name;
    double mean = 0.0;
    double sd = 1.0;
    double s_slope = 0.0;
};

struct CategoricalCovariateLaw {
    std::string name;
    std::vector<std::string> levels;
    std::vector<double> probs; // must sum to 1
};

/// y(0) = intercept + s_slope * (s - cutoff) + sum numeric_coefs * x
///        + categorical level effects + noise_sd * N(0,1).
struct OutcomeModel {
    double intercept = 0.0;
    double s_slope = 0.0;
    double noise_sd = 1.0;
    std::vector<double> numeric_coefs;                    // per numeric covariate (or empty)
    std::vector<std::vector<double>> categorical_effects; // per categorical covariate, per level
};

/// Unit-level effect tau(s) = constant + jump * I(|s - cutoff| > jump_radius).
/// Under the exclusion restriction the effect reaches the outcome only
/// through receipt, so y(1) = y(0) + tau * w1.
struct EffectModel {
    double constant = 0.0;
    double jump = 0.0;
    double jump_radius = std::numeric_limits<double>::infinity();
};

/// P(W(1) = 1 | x) with W(0) = 0 (one-sided noncompliance by construction).
/// With logit coefficients, P_i = sigmoid(logit(prob) + sum coef_k x_ik).
struct ComplianceModel {
    double prob = 1.0;
    std::vector<double> numeric_logit_coefs; // per numeric covariate (or empty)
};

/// How the synthetic assignment arises. In every law the running variable
/// lands on the side of the cutoff matching z, so z = I(side(s)) holds in
/// the generated table exactly as in a loaded one.
enum class AssignmentLaw { running_threshold, complete, block, bernoulli };

inline std::string to_string(AssignmentLaw law) {
    switch (law) {
        case AssignmentLaw::running_threshold: return "running_threshold";
        case AssignmentLaw::complete: return "complete";
        case AssignmentLaw::block: return "block";
        case AssignmentLaw::bernoulli: return "bernoulli";
    }
    return "?";
}

inline AssignmentLaw assignment_law_from_string(std::string_view s) {
    if (s == "running_threshold") return AssignmentLaw::running_threshold;
    if (s == "complete") return AssignmentLaw::complete;
    if (s == "block") return AssignmentLaw::block;
    if (s == "bernoulli") return AssignmentLaw::bernoulli;
    throw ConfigError("unknown assignment law '" + std::string(s) + "'");
}

struct AssignmentPlan {
    AssignmentLaw law = AssignmentLaw::complete;
    double treated_fraction = 0.5; // complete/block: N_T share; bernoulli: constant propensity
    std::vector<std::string> block_covariates; // block law
    std::string propensity_column;             // bernoulli: emit e_i under this name if set
};

struct DGPConfig {
    std::size_t n = 100;
    double cutoff = 0.0;
    double half_range = 2000.0; // s spans [cutoff - half_range, cutoff + half_range]
    Direction direction = Direction::treated_if_le;
    AssignmentPlan assignment;
    std::vector<NumericCovariateLaw> numeric_covariates;
    std::vector<CategoricalCovariateLaw> categorical_covariates;
    OutcomeModel outcome;
    EffectModel effect;
    ComplianceModel compliance;
    std::uint64_t seed = 0;
};

/// Dataset plus the oracle-side quantities an analyst never observes:
/// both potential outcomes, the potential receipt, and complier flags.
struct OracleDataset {
    Dataset data; // with z assigned
    std::vector<double> y1, y0;
    std::vector<int> w1; // W(1); W(0) is identically 0

    bool complier(std::size_t i) const { return w1[i] == 1; }
};

namespace detail {

inline void validate_dgp(const DGPConfig& dgp) {
    if (dgp.n < 2) throw ConfigError("DGP needs n >= 2");
    if (!(dgp.half_range > 0.0)) throw ConfigError("DGP half_range must be > 0");
    for (const auto& c : dgp.categorical_covariates) {
        if (c.levels.size() < 1 || c.levels.size() != c.probs.size()) {
            throw ConfigError("categorical law '" + c.name + "' needs matching levels/probs");
        }
        double total = 0.0;
        for (double p : c.probs) {
            if (!(p >= 0.0)) throw ConfigError("negative level probability in '" + c.name + "'");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw ConfigError("level probabilities of '" + c.name + "' must sum to 1");
        }
    }
    if (!dgp.outcome.numeric_coefs.empty() &&
        dgp.outcome.numeric_coefs.size() != dgp.numeric_covariates.size()) {
        throw ConfigError("outcome.numeric_coefs size must match numeric covariate count");
    }
    if (!dgp.outcome.categorical_effects.empty() &&
        dgp.outcome.categorical_effects.size() != dgp.categorical_covariates.size()) {
        throw ConfigError("outcome.categorical_effects size must match categorical covariates");
    }
    for (std::size_t k = 0; k < dgp.outcome.categorical_effects.size(); ++k) {
        if (dgp.outcome.categorical_effects[k].size() !=
            dgp.categorical_covariates[k].levels.size()) {
            throw ConfigError("categorical_effects[" + std::to_string(k) +
                              "] must list one effect per level");
        }
    }
    if (!dgp.compliance.numeric_logit_coefs.empty() &&
        dgp.compliance.numeric_logit_coefs.size() != dgp.numeric_covariates.size()) {
        throw ConfigError("compliance.numeric_logit_coefs size must match numeric covariates");
    }
    if (!(dgp.compliance.prob >= 0.0 && dgp.compliance.prob <= 1.0)) {
        throw ConfigError("compliance.prob must be in [0,1]");
    }
    if (!dgp.compliance.numeric_logit_coefs.empty() &&
        !(dgp.compliance.prob > 0.0 && dgp.compliance.prob < 1.0)) {
        throw ConfigError("compliance logit coefficients need prob strictly inside (0,1)");
    }
    const AssignmentPlan& plan = dgp.assignment;
    if (plan.law == AssignmentLaw::bernoulli &&
        !(plan.treated_fraction > 0.0 && plan.treated_fraction < 1.0)) {
        throw ConfigError("bernoulli treated_fraction must be in (0,1)");
    }
    if ((plan.law == AssignmentLaw::complete || plan.law == AssignmentLaw::block) &&
        !(plan.treated_fraction > 0.0 && plan.treated_fraction < 1.0)) {
        throw ConfigError("treated_fraction must be in (0,1)");
    }
    if (plan.law == AssignmentLaw::block && plan.block_covariates.empty()) {
        throw ConfigError("block assignment law needs block covariates");
    }
}

inline std::size_t clamped_treated_count(std::size_t n, double fraction) {
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    return std::min(std::max<std::size_t>(k, 1), n - 1);
}

} // namespace detail

/// Generates a reproducible synthetic dataset with known potential outcomes
/// and compliance types.
inline OracleDataset generate_dataset(const DGPConfig& dgp) {
    detail::validate_dgp(dgp);
    const std::size_t n = dgp.n;
    CounterRng rng(dgp.seed, 0x5d9f3b);

    // categorical covariates first: block assignment may depend on them
    std::vector<CovariateColumn> columns;
    for (const auto& law : dgp.categorical_covariates) {
        CovariateColumn col;
        col.name = law.name;
        col.kind = CovariateKind::categorical;
        col.levels = law.levels;
        col.codes.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform01();
            double acc = 0.0;
            int code = static_cast<int>(law.levels.size()) - 1;
            for (std::size_t l = 0; l < law.levels.size(); ++l) {
                acc += law.probs[l];
                if (u < acc) {
                    code = static_cast<int>(l);
                    break;
                }
            }
            col.codes[i] = code;
        }
        columns.push_back(std::move(col));
    }

    // assignment
    std::vector<int> z(n, 0);
    switch (dgp.assignment.law) {
        case AssignmentLaw::running_threshold:
            break; // decided by s below
        case AssignmentLaw::complete: {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            const std::size_t k = detail::clamped_treated_count(n, dgp.assignment.treated_fraction);
            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
                std::swap(idx[i], idx[j]);
            }
            for (std::size_t i = 0; i < k; ++i) z[idx[i]] = 1;
            break;
        }
        case AssignmentLaw::block: {
            // group unit indices by the categorical block key
            std::map<std::string, std::vector<std::size_t>> groups;
            for (std::size_t i = 0; i < n; ++i) {
                std::string key;
                for (const auto& name : dgp.assignment.block_covariates) {
                    const auto it = std::find_if(columns.begin(), columns.end(),
                                                 [&](const auto& c) { return c.name == name; });
                    if (it == columns.end() || it->kind != CovariateKind::categorical) {
                        throw ConfigError("block covariate '" + name +
                                          "' is not a categorical DGP covariate");
                    }
                    key += "|" + it->levels[it->codes[i]];
                }
                groups[key].push_back(i);
            }
            for (auto& [key, idx] : groups) {
                if (idx.size() < 2) {
                    throw ConfigError("DGP block '" + key + "' has fewer than 2 units");
                }
                const std::size_t k =
                    detail::clamped_treated_count(idx.size(), dgp.assignment.treated_fraction);
                for (std::size_t i = 0; i < k; ++i) {
                    const std::size_t j =
                        i + static_cast<std::size_t>(rng.uniform_below(idx.size() - i));
                    std::swap(idx[i], idx[j]);
                }
                for (std::size_t i = 0; i < k; ++i) z[idx[i]] = 1;
            }
            break;
        }
        case AssignmentLaw::bernoulli: {
            for (std::size_t i = 0; i < n; ++i) {
                z[i] = rng.bernoulli(dgp.assignment.treated_fraction) ? 1 : 0;
            }
            break;
        }
    }

    // running variable; under mechanism laws s is drawn on the side implied
    // by z, so z = I(side(s, cutoff)) stays true in the emitted table
    std::vector<double> s(n);
    const bool le = dgp.direction == Direction::treated_if_le;
    for (std::size_t i = 0; i < n; ++i) {
        if (dgp.assignment.law == AssignmentLaw::running_threshold) {
            s[i] = rng.uniform(dgp.cutoff - dgp.half_range, dgp.cutoff + dgp.half_range);
            z[i] = (le ? s[i] <= dgp.cutoff : s[i] > dgp.cutoff) ? 1 : 0;
        } else {
            const bool lower_side = (z[i] == 1) == le;
            // lower side lands in [c - L, c), upper side in (c, c + L]
            s[i] = lower_side ? rng.uniform(dgp.cutoff - dgp.half_range, dgp.cutoff)
                              : dgp.cutoff + dgp.half_range * (1.0 - rng.uniform01());
        }
    }

    // numeric covariates (may lean on s)
    for (std::size_t k = 0; k < dgp.numeric_covariates.size(); ++k) {
        const auto& law = dgp.numeric_covariates[k];
        CovariateColumn col;
        col.name = law.name;
        col.kind = CovariateKind::numeric;
        col.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            col.values[i] = law.mean + law.s_slope * (s[i] - dgp.cutoff) + law.sd * rng.normal();
        }
        columns.push_back(std::move(col));
    }

    if (dgp.assignment.law == AssignmentLaw::bernoulli &&
        !dgp.assignment.propensity_column.empty()) {
        CovariateColumn col;
        col.name = dgp.assignment.propensity_column;
        col.kind = CovariateKind::numeric;
        col.values.assign(n, dgp.assignment.treated_fraction);
        columns.push_back(std::move(col));
    }

    // potential outcomes, receipt, compliance
    const std::size_t n_numeric = dgp.numeric_covariates.size();
    const std::size_t numeric_offset = dgp.categorical_covariates.size();
    std::vector<double> y0(n), y1(n);
    std::vector<int> w1(n);
    for (std::size_t i = 0; i < n; ++i) {
        double base = dgp.outcome.intercept + dgp.outcome.s_slope * (s[i] - dgp.cutoff);
        for (std::size_t k = 0; k < n_numeric && k < dgp.outcome.numeric_coefs.size(); ++k) {
            base += dgp.outcome.numeric_coefs[k] * columns[numeric_offset + k].values[i];
        }
        for (std::size_t k = 0; k < dgp.outcome.categorical_effects.size(); ++k) {
            base += dgp.outcome.categorical_effects[k][static_cast<std::size_t>(
                columns[k].codes[i])];
        }
        y0[i] = base + dgp.outcome.noise_sd * rng.normal();

        double compliance_p = dgp.compliance.prob;
        if (!dgp.compliance.numeric_logit_coefs.empty()) {
            double eta = std::log(compliance_p / (1.0 - compliance_p));
            for (std::size_t k = 0; k < n_numeric; ++k) {
                eta += dgp.compliance.numeric_logit_coefs[k] * columns[numeric_offset + k].values[i];
            }
            compliance_p = 1.0 / (1.0 + std::exp(-eta));
        }
        w1[i] = rng.bernoulli(compliance_p) ? 1 : 0;

        const double tau = dgp.effect.constant +
                           (std::abs(s[i] - dgp.cutoff) > dgp.effect.jump_radius
                                ? dgp.effect.jump
                                : 0.0);
        y1[i] = y0[i] + tau * static_cast<double>(w1[i]);
    }

    std::vector<double> y(n);
    std::vector<int> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = z[i] == 1 ? y1[i] : y0[i];
        w[i] = z[i] == 1 ? w1[i] : 0;
    }

    OracleDataset oracle;
    oracle.data = assign_treatment(
        Dataset(std::move(s), std::move(y), std::move(w), std::move(columns)), dgp.cutoff,
        dgp.direction);
    oracle.y1 = std::move(y1);
    oracle.y0 = std::move(y0);
    oracle.w1 = std::move(w1);
    return oracle;
}

enum class Population { all, compliers };

/// Finite-population mean of y(1) - y(0) over window units, optionally
/// restricted to compliers.
inline double true_local_ate(const OracleDataset& oracle, double cutoff, double bandwidth,
                             Population population) {
    const Window window = window_units(oracle.data, cutoff, bandwidth);
    KahanSum sum;
    std::size_t count = 0;
    for (std::size_t u : window.members) {
        if (population == Population::compliers && !oracle.complier(u)) continue;
        sum.add(oracle.y1[u] - oracle.y0[u]);
        ++count;
    }
    if (count == 0) {
        throw Error(population == Population::compliers
                        ? "no compliers in the window"
                        : "window is empty");
    }
    return sum.value() / static_cast<double>(count);
}

/// Brute-force exact randomization p-values: sum of mechanism probabilities
/// over support points whose statistic reaches the observed one. This is the
/// oracle the Monte Carlo p-value is validated against.
inline std::map<std::string, double> exact_p_oracle(const Window& window, const Dataset& data,
                                                    const Mechanism& mechanism,
                                                    StatisticKind kind,
                                                    std::span<const std::string> covariate_names,
                                                    std::size_t max_support = (1u << 20)) {
    if (window.n_treated == 0 || window.n_control == 0) {
        throw Error("exact p-value oracle needs both arms nonempty under the observed assignment");
    }
    const BalanceEvaluator evaluator(kind, window, data, covariate_names);
    const std::vector<int> z_obs = observed_assignment(window, data);
    const std::size_t k = evaluator.statistic_count();
    std::vector<double> observed(k), t(k);
    evaluator.evaluate(z_obs, observed);

    const auto support = enumerate_assignments(mechanism, max_support);
    std::vector<KahanSum> acc(k);
    for (const auto& entry : support) {
        evaluator.evaluate(entry.z, t);
        for (std::size_t j = 0; j < k; ++j) {
            if (t[j] >= observed[j]) acc[j].add(entry.probability);
        }
    }
    std::map<std::string, double> out;
    for (std::size_t j = 0; j < k; ++j) {
        out[evaluator.statistic_names()[j]] = acc[j].value();
    }
    return out;
}

struct CoverageOptions {
    int reps = 1000;
    double ci_alpha = 0.05;
    double balance_alpha = 0.15;
    StatisticKind statistic = StatisticKind::mahalanobis;
    PValueMode p_mode = PValueMode::default_mode;
    int balance_draws = 1000;
    double weak_threshold = 0.05;
    std::uint64_t seed = 0;
};

/// Aggregates of a coverage / validity study.
struct CoverageResult {
    int reps = 0;
    int estimated = 0;           // reps with a successful estimate
    int covered = 0;             // CIs containing the true complier effect
    double coverage = 0.0;       // covered / estimated
    double mean_ci_width = 0.0;  // over successful estimates
    int balance_tested = 0;
    int balance_rejected = 0;
    double rejection_rate = 0.0; // balance_rejected / balance_tested
    int estimation_failures = 0;
    int balance_failures = 0;
};

/// Re-simulates the DGP `reps` times, estimating the complier effect and
/// testing mechanism plausibility each time. The CI is scored against the
/// per-replication finite-population complier estimand. Estimability
/// failures are counted, not raised.
inline CoverageResult coverage_study(const DGPConfig& dgp, const MechanismSpec& spec,
                                     double bandwidth, const CoverageOptions& options) {
    if (options.reps < 100) throw std::invalid_argument("coverage study needs reps >= 100");
    CoverageResult result;
    result.reps = options.reps;
    KahanSum width_acc;

    for (int rep = 0; rep < options.reps; ++rep) {
        DGPConfig rep_dgp = dgp;
        rep_dgp.seed = CounterRng::derive_stream(dgp.seed, static_cast<std::uint64_t>(rep));
        const OracleDataset oracle = generate_dataset(rep_dgp);

        Window window;
        try {
            window = window_units(oracle.data, dgp.cutoff, bandwidth);
        } catch (const std::exception&) {
            ++result.estimation_failures;
            continue;
        }

        // estimation and truth
        try {
            const double truth =
                true_local_ate(oracle, dgp.cutoff, bandwidth, Population::compliers);
            EstimationOptions est_opts;
            est_opts.ci_alpha = options.ci_alpha;
            est_opts.weak_threshold = options.weak_threshold;
            ComplierEstimate estimate;
            if (spec.kind == MechanismKind::block) {
                const Blocking blocking =
                    build_blocks(window, oracle.data, spec.block_covariates);
                estimate = block_complier_ate(blocking, window, oracle.data, est_opts).pooled;
            } else {
                estimate = complete_randomization_estimate(window, oracle.data, est_opts);
            }
            ++result.estimated;
            if (estimate.ci.first <= truth && truth <= estimate.ci.second) ++result.covered;
            width_acc.add(estimate.ci.second - estimate.ci.first);
        } catch (const std::exception&) {
            ++result.estimation_failures;
        }

        // balance-test false-rejection rate under the true mechanism
        try {
            const Mechanism mechanism = bind_mechanism(spec, window, oracle.data);
            PValueOptions p_opts;
            p_opts.mode = options.p_mode;
            p_opts.draws = options.balance_draws;
            p_opts.seed = options.seed;
            p_opts.stream =
                CounterRng::derive_stream(options.seed, 0x9000000u + static_cast<std::uint64_t>(rep));
            const std::vector<std::string> names =
                default_balance_covariates(oracle.data, spec);
            const BalanceResult balance =
                balance_test(window, oracle.data, mechanism, options.statistic, names,
                             options.balance_alpha, p_opts);
            ++result.balance_tested;
            if (balance.rejected) ++result.balance_rejected;
        } catch (const std::exception&) {
            ++result.balance_failures;
        }
    }

    result.coverage = result.estimated > 0
                          ? static_cast<double>(result.covered) / result.estimated
                          : std::numeric_limits<double>::quiet_NaN();
    result.mean_ci_width = result.estimated > 0
                               ? width_acc.value() / result.estimated
                               : std::numeric_limits<double>::quiet_NaN();
    result.rejection_rate = result.balance_tested > 0
                                ? static_cast<double>(result.balance_rejected) /
                                      result.balance_tested
                                : std::numeric_limits<double>::quiet_NaN();
    return result;
}

} // namespace rdlocal
