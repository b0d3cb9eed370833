#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "rdlocal/errors.hpp"

namespace rdlocal {

/// Fitted logistic model for treatment assignment given covariates.
struct LogisticFit {
    Eigen::VectorXd coefficients;    // matches design columns
    std::vector<double> fitted;      // probabilities, strictly inside (0,1)
    int iterations = 0;
    double max_score = 0.0;          // sup-norm of the final score vector
};

namespace detail {

inline bool perfectly_separated(const Eigen::VectorXd& eta, const Eigen::VectorXd& z) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        if (z[i] == 1.0 && eta[i] <= 0.0) return false;
        if (z[i] == 0.0 && eta[i] >= 0.0) return false;
    }
    return true;
}

} // namespace detail

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares (Newton-Raphson on the log-likelihood). `design` must include the
/// intercept column. Converges when the score sup-norm drops to 1e-8.
///
/// Throws SeparationError when the MLE does not exist (complete or
/// quasi-complete separation) and Error when the design is rank deficient,
/// naming the collinear columns.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& design,
                                const Eigen::VectorXd& response,
                                const std::vector<std::string>& column_names,
                                int max_iterations = 100,
                                double score_tolerance = 1e-8) {
    const Eigen::Index n = design.rows();
    const Eigen::Index p = design.cols();
    if (response.size() != n) throw std::invalid_argument("design/response size mismatch");

    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        qr.setThreshold(1e-10);
        if (qr.rank() < p) {
            const auto perm = qr.colsPermutation().indices();
            std::string names;
            for (Eigen::Index j = qr.rank(); j < p; ++j) {
                if (!names.empty()) names += ", ";
                names += column_names[static_cast<std::size_t>(perm[j])];
            }
            throw Error("design matrix is rank deficient; collinear columns: " + names);
        }
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta(n), prob(n), weight(n);

    LogisticFit fit;
    for (int iter = 1; iter <= max_iterations; ++iter) {
        eta = design * beta;
        for (Eigen::Index i = 0; i < n; ++i) {
            prob[i] = 1.0 / (1.0 + std::exp(-eta[i]));
            weight[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-12);
        }
        const Eigen::VectorXd score = design.transpose() * (response - prob);
        fit.iterations = iter;
        fit.max_score = score.lpNorm<Eigen::Infinity>();
        if (fit.max_score <= score_tolerance) break;

        if (eta.lpNorm<Eigen::Infinity>() > 30.0 && detail::perfectly_separated(eta, response)) {
            throw SeparationError(
                "logistic MLE does not exist: complete or quasi-complete separation "
                "(linear predictor diverging)");
        }

        const Eigen::MatrixXd hessian =
            design.transpose() * weight.asDiagonal() * design;
        const Eigen::VectorXd step = hessian.ldlt().solve(score);
        if (!step.allFinite()) {
            throw SeparationError("logistic Newton step diverged (separation suspected)");
        }
        beta += step;
    }

    if (fit.max_score > score_tolerance) {
        eta = design * beta;
        if (eta.lpNorm<Eigen::Infinity>() > 15.0) {
            throw SeparationError(
                "logistic MLE does not exist: complete or quasi-complete separation "
                "(no convergence after " + std::to_string(fit.iterations) + " iterations)");
        }
        throw Error("logistic fit failed to converge in " + std::to_string(fit.iterations) +
                    " iterations (max |score| = " + std::to_string(fit.max_score) + ")");
    }

    eta = design * beta;
    fit.fitted.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pr = 1.0 / (1.0 + std::exp(-eta[i]));
        if (!(pr > 0.0 && pr < 1.0)) {
            throw SeparationError("fitted propensity hit the boundary of (0,1)");
        }
        fit.fitted[static_cast<std::size_t>(i)] = pr;
    }
    fit.coefficients = beta;
    return fit;
}

} // namespace rdlocal
