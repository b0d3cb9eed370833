#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rdlocal/mechanism.hpp"
#include "test_support.hpp"

using namespace rdlocal;
using test_support::dataset_with_assignment;
using test_support::numeric_column;

namespace {

// Brute-force likelihood-grid maximizer for a 2-parameter logistic model:
// coarse grid, then repeated refinement around the best cell.
std::pair<double, double> grid_mle(const std::vector<double>& x, const std::vector<int>& z) {
    const auto loglik = [&](double b0, double b1) {
        double ll = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double eta = b0 + b1 * x[i];
            ll += z[i] * eta - std::log1p(std::exp(eta));
        }
        return ll;
    };
    double lo0 = -20, hi0 = 20, lo1 = -20, hi1 = 20;
    double best0 = 0, best1 = 0;
    for (int round = 0; round < 12; ++round) {
        double best = -1e300;
        const double step0 = (hi0 - lo0) / 40.0;
        const double step1 = (hi1 - lo1) / 40.0;
        for (double b0 = lo0; b0 <= hi0 + 1e-15; b0 += step0) {
            for (double b1 = lo1; b1 <= hi1 + 1e-15; b1 += step1) {
                const double ll = loglik(b0, b1);
                if (ll > best) {
                    best = ll;
                    best0 = b0;
                    best1 = b1;
                }
            }
        }
        lo0 = best0 - 2 * step0;
        hi0 = best0 + 2 * step0;
        lo1 = best1 - 2 * step1;
        hi1 = best1 + 2 * step1;
    }
    return {best0, best1};
}

} // namespace

TEST_CASE("intercept-only propensity fit recovers the sample proportion") {
    std::vector<int> z(10, 0);
    for (int i = 0; i < 3; ++i) z[static_cast<std::size_t>(i)] = 1;
    const Dataset d = dataset_with_assignment(z, std::nullopt, std::nullopt, {});
    const Window w = window_units(d, 0.0, 10.0);
    const PropensityModel m = fit_propensity(w, d, std::vector<std::string>{});
    REQUIRE(m.fitted.size() == 10);
    for (double e : m.fitted) REQUIRE(e == Catch::Approx(0.3).margin(1e-9));
    REQUIRE(m.coefficients[0] == Catch::Approx(std::log(0.3 / 0.7)).margin(1e-7));
}

TEST_CASE("propensity fit matches a brute-force likelihood grid to 1e-4") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    const std::vector<int> z{0, 1, 0, 1, 1, 0};
    const Dataset d =
        dataset_with_assignment(z, std::nullopt, std::nullopt, {numeric_column("x", x)});
    const Window w = window_units(d, 0.0, 10.0);
    const std::vector<std::string> names{"x"};
    const PropensityModel m = fit_propensity(w, d, names);

    const auto [b0, b1] = grid_mle(x, z);
    REQUIRE(m.coefficients[0] == Catch::Approx(b0).margin(1e-4));
    REQUIRE(m.coefficients[1] == Catch::Approx(b1).margin(1e-4));
    REQUIRE(m.max_score <= 1e-8);
    for (double e : m.fitted) {
        REQUIRE(e > 0.0);
        REQUIRE(e < 1.0);
    }
}

TEST_CASE("perfectly separating covariate raises SeparationError") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    const std::vector<int> z{0, 0, 0, 1, 1, 1};
    const Dataset d =
        dataset_with_assignment(z, std::nullopt, std::nullopt, {numeric_column("x", x)});
    const Window w = window_units(d, 0.0, 10.0);
    const std::vector<std::string> names{"x"};
    REQUIRE_THROWS_AS(fit_propensity(w, d, names), SeparationError);
}

TEST_CASE("rank-deficient design names the collinear column") {
    const std::vector<int> z{0, 1, 0, 1, 1, 0};
    const Dataset d = dataset_with_assignment(
        z, std::nullopt, std::nullopt,
        {numeric_column("x", {1, 2, 3, 4, 5, 6}), numeric_column("x2", {2, 4, 6, 8, 10, 12})});
    const Window w = window_units(d, 0.0, 10.0);
    const std::vector<std::string> names{"x", "x2"};
    REQUIRE_THROWS_WITH(fit_propensity(w, d, names),
                        Catch::Matchers::ContainsSubstring("rank deficient"));
}

TEST_CASE("propensity fit needs both arms") {
    const Dataset d = dataset_with_assignment({1, 1, 1}, std::nullopt, std::nullopt, {});
    const Window w = window_units(d, 0.0, 10.0);
    REQUIRE_THROWS_AS(fit_propensity(w, d, std::vector<std::string>{}), Error);
}
