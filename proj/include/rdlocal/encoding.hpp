#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rdlocal/dataset.hpp"

namespace rdlocal {

/// Numeric encoding of a covariate set restricted to a unit list.
/// Numeric columns pass through; categorical columns expand to one
/// indicator per non-reference level (reference = first level in sorted
/// order), keeping the design full rank for saturated factors.
struct EncodedCovariates {
    Eigen::MatrixXd matrix;              // units x terms
    std::vector<std::string> term_names; // "col" or "col=level"
};

inline EncodedCovariates encode_covariates(const Dataset& data,
                                           std::span<const std::size_t> units,
                                           std::span<const std::string> covariate_names) {
    const std::size_t n = units.size();
    std::vector<std::pair<std::string, std::vector<double>>> terms;

    for (const auto& name : covariate_names) {
        const CovariateColumn& col = data.covariate(name);
        if (col.kind == CovariateKind::numeric) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = col.values[units[i]];
            terms.emplace_back(name, std::move(v));
        } else {
            for (std::size_t level = 1; level < col.levels.size(); ++level) {
                std::vector<double> v(n);
                for (std::size_t i = 0; i < n; ++i) {
                    v[i] = col.codes[units[i]] == static_cast<int>(level) ? 1.0 : 0.0;
                }
                terms.emplace_back(name + "=" + col.levels[level], std::move(v));
            }
        }
    }

    EncodedCovariates out;
    out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(terms.size()));
    out.term_names.reserve(terms.size());
    for (std::size_t j = 0; j < terms.size(); ++j) {
        out.term_names.push_back(terms[j].first);
        for (std::size_t i = 0; i < n; ++i) {
            out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                terms[j].second[i];
        }
    }
    return out;
}

} // namespace rdlocal
