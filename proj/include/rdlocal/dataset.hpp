#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rdlocal/errors.hpp"

namespace rdlocal {

enum class CovariateKind { numeric, categorical };

enum class Direction { treated_if_le, treated_if_gt };

inline std::string to_string(Direction d) {
    return d == Direction::treated_if_le ? "treated_if_le" : "treated_if_gt";
}

inline Direction direction_from_string(std::string_view s) {
    if (s == "treated_if_le") return Direction::treated_if_le;
    if (s == "treated_if_gt") return Direction::treated_if_gt;
    throw ConfigError("unknown direction '" + std::string(s) +
                      "' (expected treated_if_le or treated_if_gt)");
}

/// One covariate column. Numeric columns hold values; categorical columns
/// hold integer codes into a sorted level list.
struct CovariateColumn {
    std::string name;
    CovariateKind kind = CovariateKind::numeric;
    std::vector<double> values;      // numeric only
    std::vector<int> codes;          // categorical only
    std::vector<std::string> levels; // categorical only, sorted

    std::size_t size() const {
        return kind == CovariateKind::numeric ? values.size() : codes.size();
    }
};

/// Immutable unit-level table: running variable s, optional outcome y,
/// optional treatment receipt w, covariates, and the derived assignment z.
/// All analysis operations treat a Dataset as read-only.
class Dataset {
public:
    Dataset() = default;

    Dataset(std::vector<double> running,
            std::optional<std::vector<double>> outcome,
            std::optional<std::vector<int>> receipt,
            std::vector<CovariateColumn> covariates)
        : s_(std::move(running)),
          y_(std::move(outcome)),
          w_(std::move(receipt)),
          covariates_(std::move(covariates)) {
        validate();
    }

    std::size_t size() const { return s_.size(); }

    const std::vector<double>& running() const { return s_; }

    bool has_outcome() const { return y_.has_value(); }
    const std::vector<double>& outcome() const {
        if (!y_) throw Error("dataset has no outcome column");
        return *y_;
    }

    bool has_receipt() const { return w_.has_value(); }
    const std::vector<int>& receipt() const {
        if (!w_) throw Error("dataset has no treatment receipt column");
        return *w_;
    }

    bool has_assignment() const { return !z_.empty(); }
    const std::vector<int>& assignment() const {
        if (z_.empty()) throw Error("treatment assignment not derived yet (call assign_treatment)");
        return z_;
    }

    /// Observed receipt when present; otherwise the assignment itself
    /// (sharp design, perfect compliance).
    const std::vector<int>& effective_receipt() const {
        return w_ ? *w_ : assignment();
    }

    const std::vector<CovariateColumn>& covariates() const { return covariates_; }

    bool has_covariate(std::string_view name) const {
        return find_covariate(name) != nullptr;
    }

    const CovariateColumn& covariate(std::string_view name) const {
        const CovariateColumn* c = find_covariate(name);
        if (!c) throw Error("unknown covariate '" + std::string(name) + "'");
        return *c;
    }

    std::vector<std::string> covariate_names() const {
        std::vector<std::string> names;
        names.reserve(covariates_.size());
        for (const auto& c : covariates_) names.push_back(c.name);
        return names;
    }

    /// Returns a copy with z derived from the running variable. Idempotent;
    /// every other field is unchanged.
    friend Dataset assign_treatment(const Dataset& data, double cutoff, Direction direction);

private:
    const CovariateColumn* find_covariate(std::string_view name) const {
        for (const auto& c : covariates_) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }

    void validate() const {
        const std::size_t n = s_.size();
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(s_[i])) {
                throw LoadError("running variable not finite at row " + std::to_string(i + 1));
            }
        }
        if (y_ && y_->size() != n) throw LoadError("outcome column length mismatch");
        if (w_) {
            if (w_->size() != n) throw LoadError("receipt column length mismatch");
            for (std::size_t i = 0; i < n; ++i) {
                if ((*w_)[i] != 0 && (*w_)[i] != 1) {
                    throw LoadError("receipt not in {0,1} at row " + std::to_string(i + 1));
                }
            }
        }
        if (y_) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite((*y_)[i])) {
                    throw LoadError("outcome not finite at row " + std::to_string(i + 1));
                }
            }
        }
        std::map<std::string, int> seen;
        for (const auto& c : covariates_) {
            if (c.size() != n) throw LoadError("covariate '" + c.name + "' length mismatch");
            if (++seen[c.name] > 1) throw LoadError("duplicate covariate name '" + c.name + "'");
            if (c.kind == CovariateKind::numeric) {
                for (std::size_t i = 0; i < n; ++i) {
                    if (!std::isfinite(c.values[i])) {
                        throw LoadError("non-finite value in numeric column '" + c.name +
                                        "' at row " + std::to_string(i + 1));
                    }
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    if (c.codes[i] < 0 || c.codes[i] >= static_cast<int>(c.levels.size())) {
                        throw LoadError("bad level code in column '" + c.name + "'");
                    }
                }
            }
        }
    }

    std::vector<double> s_;
    std::optional<std::vector<double>> y_;
    std::optional<std::vector<int>> w_;
    std::vector<CovariateColumn> covariates_;
    std::vector<int> z_;
};

inline Dataset assign_treatment(const Dataset& data, double cutoff, Direction direction) {
    if (!std::isfinite(cutoff)) throw std::invalid_argument("cutoff must be finite");
    Dataset out = data;
    out.z_.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const bool treated = direction == Direction::treated_if_le
                                 ? data.running()[i] <= cutoff
                                 : data.running()[i] > cutoff;
        out.z_[i] = treated ? 1 : 0;
    }
    return out;
}

/// Symmetric closed window around the cutoff: {i : |s_i - cutoff| <= h}.
struct Window {
    double cutoff = 0.0;
    double bandwidth = 0.0;
    std::vector<std::size_t> members; // ascending dataset indices
    std::size_t n_treated = 0;
    std::size_t n_control = 0;

    std::size_t size() const { return members.size(); }
};

inline Window window_units(const Dataset& data, double cutoff, double bandwidth) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
    if (!std::isfinite(cutoff)) throw std::invalid_argument("cutoff must be finite");
    Window w;
    w.cutoff = cutoff;
    w.bandwidth = bandwidth;
    const auto& z = data.assignment();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double s = data.running()[i];
        if (cutoff - bandwidth <= s && s <= cutoff + bandwidth) {
            w.members.push_back(i);
            if (z[i] == 1) {
                ++w.n_treated;
            } else {
                ++w.n_control;
            }
        }
    }
    return w;
}

} // namespace rdlocal
