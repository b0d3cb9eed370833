#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rdlocal/dataset.hpp"
#include "rdlocal/encoding.hpp"
#include "rdlocal/errors.hpp"
#include "rdlocal/logistic.hpp"
#include "rdlocal/numeric.hpp"
#include "rdlocal/rng.hpp"

namespace rdlocal {

enum class MechanismKind { bernoulli, complete, block };

inline std::string to_string(MechanismKind k) {
    switch (k) {
        case MechanismKind::bernoulli: return "bernoulli";
        case MechanismKind::complete: return "complete";
        case MechanismKind::block: return "block";
    }
    return "?";
}

inline MechanismKind mechanism_kind_from_string(std::string_view s) {
    if (s == "bernoulli") return MechanismKind::bernoulli;
    if (s == "complete") return MechanismKind::complete;
    if (s == "block") return MechanismKind::block;
    throw ConfigError("unknown mechanism kind '" + std::string(s) + "'");
}

/// Partition of window units into blocks formed by cross-classifying
/// categorical covariates. Positions are window-relative (0..n-1) and keep
/// window order inside each block; blocks are sorted by label.
struct Blocking {
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> blocks;
    std::vector<int> unit_block; // window position -> block index

    std::size_t block_count() const { return blocks.size(); }
};

inline Blocking build_blocks(const Window& window, const Dataset& data,
                             std::span<const std::string> covariate_names) {
    if (covariate_names.empty()) {
        throw ConfigError("block randomization requires at least one categorical covariate");
    }
    std::vector<const CovariateColumn*> cols;
    for (const auto& name : covariate_names) {
        const CovariateColumn& col = data.covariate(name);
        if (col.kind != CovariateKind::categorical) {
            throw ConfigError("covariate '" + name +
                              "' is numeric; blocks require categorical covariates "
                              "(discretize it before loading)");
        }
        cols.push_back(&col);
    }

    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> unit_labels(window.size());
    for (std::size_t pos = 0; pos < window.size(); ++pos) {
        const std::size_t unit = window.members[pos];
        std::string label;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c > 0) label += "|";
            label += covariate_names[c] + "=" + cols[c]->levels[cols[c]->codes[unit]];
        }
        groups[label].push_back(pos);
        unit_labels[pos] = std::move(label);
    }

    Blocking blocking;
    blocking.unit_block.assign(window.size(), -1);
    for (auto& [label, positions] : groups) {
        const int idx = static_cast<int>(blocking.blocks.size());
        for (std::size_t pos : positions) blocking.unit_block[pos] = idx;
        blocking.labels.push_back(label);
        blocking.blocks.push_back(std::move(positions));
    }
    return blocking;
}

/// Logistic propensity model fitted on window units (intercept + encoded
/// covariates), with IRLS diagnostics.
struct PropensityModel {
    std::vector<std::string> term_names;
    Eigen::VectorXd coefficients;
    std::vector<double> fitted; // per window unit, strictly inside (0,1)
    int iterations = 0;
    double max_score = 0.0;
};

inline PropensityModel fit_propensity(const Window& window, const Dataset& data,
                                      std::span<const std::string> covariate_names) {
    if (window.n_treated == 0 || window.n_control == 0) {
        throw Error("propensity fit requires both treated and control units in the window");
    }
    const EncodedCovariates enc = encode_covariates(data, window.members, covariate_names);
    const Eigen::Index n = static_cast<Eigen::Index>(window.size());

    Eigen::MatrixXd design(n, enc.matrix.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(enc.matrix.cols()) = enc.matrix;

    std::vector<std::string> names;
    names.reserve(enc.term_names.size() + 1);
    names.emplace_back("(intercept)");
    names.insert(names.end(), enc.term_names.begin(), enc.term_names.end());

    Eigen::VectorXd response(n);
    const auto& z = data.assignment();
    for (Eigen::Index i = 0; i < n; ++i) {
        response[i] = static_cast<double>(z[window.members[static_cast<std::size_t>(i)]]);
    }

    const LogisticFit fit = fit_logistic(design, response, names);
    PropensityModel model;
    model.term_names = std::move(names);
    model.coefficients = fit.coefficients;
    model.fitted = fit.fitted;
    model.iterations = fit.iterations;
    model.max_score = fit.max_score;
    return model;
}

/// Window-independent description of a local assignment mechanism, as it
/// appears in run configuration. Parameters (counts, blocks, propensities)
/// are re-derived when the spec is bound to a concrete window.
struct MechanismSpec {
    MechanismKind kind = MechanismKind::complete;
    std::vector<std::string> block_covariates;     // block only
    std::string propensity_column;                 // bernoulli: supplied scores
    std::vector<std::string> propensity_covariates; // bernoulli: fit when no column
    bool condition_on_nt = false;                  // bernoulli only
    std::string label;                             // optional display label

    std::string display_label() const {
        if (!label.empty()) return label;
        std::string s = to_string(kind);
        if (kind == MechanismKind::block) {
            s += "(";
            for (std::size_t i = 0; i < block_covariates.size(); ++i) {
                if (i > 0) s += ",";
                s += block_covariates[i];
            }
            s += ")";
        }
        if (kind == MechanismKind::bernoulli && condition_on_nt) s += "|n_t";
        return s;
    }
};

/// A local assignment mechanism bound to one window: the distribution
/// P(Z | X) over assignment vectors of the window's units.
struct Mechanism {
    MechanismKind kind = MechanismKind::complete;
    std::size_t n = 0;

    std::size_t n_treated = 0;          // complete, and bernoulli with condition_on_nt
    std::vector<double> propensity;     // bernoulli
    bool condition_on_nt = false;       // bernoulli
    Blocking blocking;                  // block
    std::vector<std::size_t> block_treated; // block: N_jT per block
};

inline Mechanism bind_mechanism(const MechanismSpec& spec, const Window& window,
                                const Dataset& data) {
    Mechanism m;
    m.kind = spec.kind;
    m.n = window.size();
    switch (spec.kind) {
        case MechanismKind::complete: {
            m.n_treated = window.n_treated;
            if (m.n_treated == 0 || m.n_treated == m.n) {
                throw Error("complete randomization needs 0 < N_T < window size (window has N_T=" +
                            std::to_string(m.n_treated) + " of " + std::to_string(m.n) + ")");
            }
            break;
        }
        case MechanismKind::block: {
            m.blocking = build_blocks(window, data, spec.block_covariates);
            const auto& z = data.assignment();
            m.block_treated.resize(m.blocking.block_count(), 0);
            for (std::size_t j = 0; j < m.blocking.block_count(); ++j) {
                for (std::size_t pos : m.blocking.blocks[j]) {
                    m.block_treated[j] += static_cast<std::size_t>(z[window.members[pos]]);
                }
            }
            break;
        }
        case MechanismKind::bernoulli: {
            if (!spec.propensity_column.empty()) {
                const CovariateColumn& col = data.covariate(spec.propensity_column);
                if (col.kind != CovariateKind::numeric) {
                    throw ConfigError("propensity column '" + spec.propensity_column +
                                      "' must be numeric");
                }
                m.propensity.resize(m.n);
                for (std::size_t i = 0; i < m.n; ++i) {
                    m.propensity[i] = col.values[window.members[i]];
                }
            } else {
                m.propensity = fit_propensity(window, data, spec.propensity_covariates).fitted;
            }
            for (double e : m.propensity) {
                if (!(e > 0.0 && e < 1.0)) {
                    throw Error("propensity scores must lie strictly inside (0,1); got " +
                                dtos(e));
                }
            }
            m.condition_on_nt = spec.condition_on_nt;
            m.n_treated = window.n_treated;
            break;
        }
    }
    return m;
}

/// Observed assignment restricted to window units (window order).
inline std::vector<int> observed_assignment(const Window& window, const Dataset& data) {
    const auto& z = data.assignment();
    std::vector<int> out(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) out[i] = z[window.members[i]];
    return out;
}

/// P(sum of independent Bernoulli(probs) = k) by dynamic programming.
inline double poisson_binomial_mass(std::span<const double> probs, std::size_t k) {
    if (k > probs.size()) return 0.0;
    std::vector<double> c(k + 1, 0.0);
    c[0] = 1.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double e = probs[i];
        const std::size_t top = std::min(k, i + 1);
        for (std::size_t j = top; j >= 1; --j) {
            c[j] = c[j] * (1.0 - e) + c[j - 1] * e;
        }
        c[0] *= (1.0 - e);
    }
    return c[k];
}

namespace detail {

// Uniform draw of `k` treated among positions [0, n): partial Fisher-Yates
// over an index array, writing 1s into z at the chosen positions.
inline void draw_complete_into(std::span<const std::size_t> positions, std::size_t k,
                               CounterRng& rng, std::vector<int>& z) {
    std::vector<std::size_t> idx(positions.begin(), positions.end());
    const std::size_t n = idx.size();
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < k; ++i) z[idx[i]] = 1;
}

} // namespace detail

/// One draw from the mechanism. Pure function of (seed, draw_index): the
/// same pair gives the same vector regardless of invocation order, so draws
/// can be evaluated concurrently.
inline std::vector<int> draw_assignment(const Mechanism& m, std::uint64_t seed,
                                        std::uint64_t draw_index) {
    CounterRng rng(seed, draw_index);
    std::vector<int> z(m.n, 0);
    switch (m.kind) {
        case MechanismKind::complete: {
            std::vector<std::size_t> all(m.n);
            std::iota(all.begin(), all.end(), 0);
            detail::draw_complete_into(all, m.n_treated, rng, z);
            break;
        }
        case MechanismKind::block: {
            for (std::size_t j = 0; j < m.blocking.block_count(); ++j) {
                detail::draw_complete_into(m.blocking.blocks[j], m.block_treated[j], rng, z);
            }
            break;
        }
        case MechanismKind::bernoulli: {
            if (!m.condition_on_nt) {
                for (std::size_t i = 0; i < m.n; ++i) {
                    z[i] = rng.bernoulli(m.propensity[i]) ? 1 : 0;
                }
            } else {
                constexpr std::uint64_t kBudget = 1000000;
                for (std::uint64_t attempt = 0; attempt < kBudget; ++attempt) {
                    std::size_t total = 0;
                    for (std::size_t i = 0; i < m.n; ++i) {
                        z[i] = rng.bernoulli(m.propensity[i]) ? 1 : 0;
                        total += static_cast<std::size_t>(z[i]);
                    }
                    if (total == m.n_treated) return z;
                }
                const double acceptance = poisson_binomial_mass(m.propensity, m.n_treated);
                throw SupportError(
                    "conditional Bernoulli rejection budget (1e6 attempts) exhausted; "
                    "acceptance probability is about " + dtos(acceptance));
            }
            break;
        }
    }
    return z;
}

/// One support point of an enumerable mechanism.
struct SupportEntry {
    std::vector<int> z;
    double probability;
};

namespace detail {

// Calls fn for every way of choosing `k` of the given positions.
template <typename Fn>
void for_each_combination(std::span<const std::size_t> positions, std::size_t k, Fn&& fn) {
    const std::size_t n = positions.size();
    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
        fn(std::span<const std::size_t>(pick));
        // advance to the next k-combination of {0..n-1}
        std::size_t i = k;
        while (i > 0) {
            --i;
            if (pick[i] != i + n - k) {
                ++pick[i];
                for (std::size_t j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
                break;
            }
            if (i == 0) return;
        }
        if (k == 0) return;
    }
}

} // namespace detail

/// Exhaustive support of the mechanism with exact probabilities. Intended
/// as the oracle for Monte Carlo tests; refuses supports larger than
/// `max_support` (default 2^20).
inline std::vector<SupportEntry> enumerate_assignments(const Mechanism& m,
                                                       std::size_t max_support = (1u << 20)) {
    std::vector<SupportEntry> support;
    const auto too_large = [max_support](double size) {
        return !(size <= static_cast<double>(max_support));
    };

    switch (m.kind) {
        case MechanismKind::complete: {
            const double count = choose(m.n, m.n_treated);
            if (too_large(count)) {
                throw SupportError("complete-randomization support has " + dtos(count) +
                                   " assignments; too large to enumerate, use Monte Carlo mode");
            }
            const double prob = 1.0 / count;
            std::vector<std::size_t> all(m.n);
            std::iota(all.begin(), all.end(), 0);
            support.reserve(static_cast<std::size_t>(count));
            detail::for_each_combination(all, m.n_treated, [&](std::span<const std::size_t> pick) {
                SupportEntry e{std::vector<int>(m.n, 0), prob};
                for (std::size_t i : pick) e.z[all[i]] = 1;
                support.push_back(std::move(e));
            });
            break;
        }
        case MechanismKind::block: {
            double count = 1.0;
            for (std::size_t j = 0; j < m.blocking.block_count(); ++j) {
                count *= choose(m.blocking.blocks[j].size(), m.block_treated[j]);
            }
            if (too_large(count)) {
                throw SupportError("block-randomization support has " + dtos(count) +
                                   " assignments; too large to enumerate, use Monte Carlo mode");
            }
            const double prob = 1.0 / count;
            // per-block lists of treated-position subsets
            std::vector<std::vector<std::vector<std::size_t>>> choices(m.blocking.block_count());
            for (std::size_t j = 0; j < m.blocking.block_count(); ++j) {
                const auto& positions = m.blocking.blocks[j];
                detail::for_each_combination(
                    positions, m.block_treated[j], [&](std::span<const std::size_t> pick) {
                        std::vector<std::size_t> treated;
                        treated.reserve(pick.size());
                        for (std::size_t i : pick) treated.push_back(positions[i]);
                        choices[j].push_back(std::move(treated));
                    });
            }
            std::vector<std::size_t> cursor(m.blocking.block_count(), 0);
            while (true) {
                SupportEntry e{std::vector<int>(m.n, 0), prob};
                for (std::size_t j = 0; j < cursor.size(); ++j) {
                    for (std::size_t pos : choices[j][cursor[j]]) e.z[pos] = 1;
                }
                support.push_back(std::move(e));
                std::size_t j = 0;
                while (j < cursor.size() && ++cursor[j] == choices[j].size()) {
                    cursor[j] = 0;
                    ++j;
                }
                if (j == cursor.size()) break;
            }
            break;
        }
        case MechanismKind::bernoulli: {
            if (!m.condition_on_nt) {
                if (m.n >= 64 || too_large(std::ldexp(1.0, static_cast<int>(m.n)))) {
                    throw SupportError("Bernoulli support has 2^" + std::to_string(m.n) +
                                       " assignments; too large to enumerate, use Monte Carlo mode");
                }
                const std::uint64_t total = std::uint64_t{1} << m.n;
                support.reserve(total);
                for (std::uint64_t mask = 0; mask < total; ++mask) {
                    SupportEntry e{std::vector<int>(m.n, 0), 1.0};
                    for (std::size_t i = 0; i < m.n; ++i) {
                        const bool treated = (mask >> i) & 1u;
                        e.z[i] = treated ? 1 : 0;
                        e.probability *= treated ? m.propensity[i] : 1.0 - m.propensity[i];
                    }
                    support.push_back(std::move(e));
                }
            } else {
                const double count = choose(m.n, m.n_treated);
                if (too_large(count)) {
                    throw SupportError("conditional Bernoulli support has " +
                                       dtos(count) +
                                       " assignments; too large to enumerate, use Monte Carlo mode");
                }
                const double norm = poisson_binomial_mass(m.propensity, m.n_treated);
                std::vector<std::size_t> all(m.n);
                std::iota(all.begin(), all.end(), 0);
                detail::for_each_combination(
                    all, m.n_treated, [&](std::span<const std::size_t> pick) {
                        SupportEntry e{std::vector<int>(m.n, 0), 1.0};
                        for (std::size_t i : pick) e.z[i] = 1;
                        for (std::size_t i = 0; i < m.n; ++i) {
                            e.probability *= e.z[i] ? m.propensity[i] : 1.0 - m.propensity[i];
                        }
                        e.probability /= norm;
                        support.push_back(std::move(e));
                    });
            }
            break;
        }
    }
    return support;
}

/// Exact probability mass of one assignment vector under the mechanism.
inline double assignment_probability(const Mechanism& m, std::span<const int> z) {
    if (z.size() != m.n) {
        throw std::invalid_argument("assignment vector length " + std::to_string(z.size()) +
                                    " does not match window size " + std::to_string(m.n));
    }
    for (int v : z) {
        if (v != 0 && v != 1) throw std::invalid_argument("assignment entries must be 0 or 1");
    }
    const std::size_t total =
        static_cast<std::size_t>(std::accumulate(z.begin(), z.end(), 0));
    switch (m.kind) {
        case MechanismKind::complete:
            return total == m.n_treated ? 1.0 / choose(m.n, m.n_treated) : 0.0;
        case MechanismKind::block: {
            double prob = 1.0;
            for (std::size_t j = 0; j < m.blocking.block_count(); ++j) {
                std::size_t t = 0;
                for (std::size_t pos : m.blocking.blocks[j]) {
                    t += static_cast<std::size_t>(z[pos]);
                }
                if (t != m.block_treated[j]) return 0.0;
                prob *= 1.0 / choose(m.blocking.blocks[j].size(), m.block_treated[j]);
            }
            return prob;
        }
        case MechanismKind::bernoulli: {
            double prob = 1.0;
            for (std::size_t i = 0; i < m.n; ++i) {
                prob *= z[i] ? m.propensity[i] : 1.0 - m.propensity[i];
            }
            if (m.condition_on_nt) {
                if (total != m.n_treated) return 0.0;
                prob /= poisson_binomial_mass(m.propensity, m.n_treated);
            }
            return prob;
        }
    }
    return 0.0;
}

} // namespace rdlocal
