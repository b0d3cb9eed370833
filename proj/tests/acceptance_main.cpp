// Acceptance suite: one pass/fail line per criterion.
//
// Usage: rdlocal_acceptance [criterion...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rdlocal/rdlocal.hpp"

namespace {

using namespace rdlocal;
namespace fs = std::filesystem;

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool condition, const std::string& what) {
        if (!condition) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

Dataset dataset_with_assignment(const std::vector<int>& z,
                                std::vector<CovariateColumn> covariates) {
    std::vector<double> s(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) s[i] = z[i] == 1 ? -1.0 : 1.0;
    Dataset d(std::move(s), std::nullopt, std::nullopt, std::move(covariates));
    return assign_treatment(d, 0.0, Direction::treated_if_le);
}

CovariateColumn numeric_column(std::string name, std::vector<double> values) {
    CovariateColumn c;
    c.name = std::move(name);
    c.kind = CovariateKind::numeric;
    c.values = std::move(values);
    return c;
}

CovariateColumn categorical_column(std::string name, std::vector<std::string> levels,
                                   std::vector<int> codes) {
    CovariateColumn c;
    c.name = std::move(name);
    c.kind = CovariateKind::categorical;
    c.levels = std::move(levels);
    c.codes = std::move(codes);
    return c;
}

// ---------------------------------------------------------------------------
// 1. Monte Carlo p-values (paper_exact mode, M = 1e5) match the enumeration
//    oracle within 4 sqrt(p(1-p)/M) on randomized small windows, all three
//    mechanisms. Runtime < 1 min.
// ---------------------------------------------------------------------------
bool criterion_1() {
    Check check;
    const int m_draws = 100000;
    int windows_tested = 0;
    CounterRng gen(20260501, 0);

    for (int kind_idx = 0; kind_idx < 3; ++kind_idx) {
        const MechanismKind kind = kind_idx == 0   ? MechanismKind::complete
                                   : kind_idx == 1 ? MechanismKind::block
                                                   : MechanismKind::bernoulli;
        int done = 0;
        while (done < 8) {
            const std::size_t n = 5 + gen.uniform_below(4); // 5..8
            std::vector<int> z(n);
            std::vector<double> x(n), e(n);
            std::vector<int> g(n);
            for (std::size_t i = 0; i < n; ++i) {
                z[i] = gen.bernoulli(0.5) ? 1 : 0;
                x[i] = gen.normal();
                e[i] = gen.uniform(0.25, 0.75);
                g[i] = static_cast<int>(gen.uniform_below(2));
            }
            const std::size_t nt = static_cast<std::size_t>(
                std::count(z.begin(), z.end(), 1));
            if (nt == 0 || nt == n) continue;

            Dataset d = dataset_with_assignment(
                z, {numeric_column("x", x), numeric_column("e", e),
                    categorical_column("g", {"a", "b"}, g)});
            const Window w = window_units(d, 0.0, 10.0);
            MechanismSpec spec;
            spec.kind = kind;
            spec.block_covariates = {"g"};
            spec.propensity_column = "e";
            Mechanism mechanism;
            try {
                mechanism = bind_mechanism(spec, w, d);
            } catch (const Error&) {
                continue; // e.g. degenerate block counts; draw a fresh window
            }
            const std::vector<std::string> names{"x"};
            const double p_exact =
                exact_p_oracle(w, d, mechanism, StatisticKind::abs_mean_difference, names)
                    .at("x");
            if (!(p_exact > 0.0 && p_exact < 1.0)) continue;

            PValueOptions opts;
            opts.mode = PValueMode::paper_exact;
            opts.draws = m_draws;
            opts.seed = 99000 + static_cast<std::uint64_t>(done);
            opts.stream = static_cast<std::uint64_t>(kind_idx) * 1000 + done;
            const double p_mc = randomization_p_values(w, d, mechanism,
                                                       StatisticKind::abs_mean_difference,
                                                       names, opts)
                                    .p_values.at("x");
            const double se = std::sqrt(p_exact * (1.0 - p_exact) / m_draws);
            check.expect(std::abs(p_mc - p_exact) <= 4.0 * se,
                         to_string(kind) + " window " + std::to_string(done) + ": |" +
                             dtos(p_mc) + " - " + dtos(p_exact) + "| > 4se=" + dtos(4 * se));
            ++done;
            ++windows_tested;
        }
    }
    check.expect(windows_tested >= 20, "fewer than 20 windows tested");
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 2. Hand-enumerable fixture: n=4, N_T=2, x=(1,2,3,4), absolute mean
//    difference -> exact p = 1/3 exactly.
// ---------------------------------------------------------------------------
bool criterion_2() {
    Check check;
    Dataset d = dataset_with_assignment({1, 1, 0, 0}, {numeric_column("x", {1, 2, 3, 4})});
    const Window w = window_units(d, 0.0, 10.0);
    MechanismSpec spec;
    spec.kind = MechanismKind::complete;
    const Mechanism m = bind_mechanism(spec, w, d);
    const std::vector<std::string> names{"x"};

    const double p_oracle =
        exact_p_oracle(w, d, m, StatisticKind::abs_mean_difference, names).at("x");
    check.expect(p_oracle == 1.0 / 3.0, "oracle p = " + dtos(p_oracle) + " != 1/3");

    PValueOptions opts;
    opts.mode = PValueMode::exact;
    const double p_balance =
        randomization_p_values(w, d, m, StatisticKind::abs_mean_difference, names, opts)
            .p_values.at("x");
    check.expect(p_balance == 1.0 / 3.0, "balance exact p = " + dtos(p_balance) + " != 1/3");
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 3. Validity: under a correctly specified mechanism, the default-mode
//    rejection rate at alpha = 0.15 stays within 0.15 + 3 MC standard errors
//    over >= 2000 replications. Runtime < 5 min.
// ---------------------------------------------------------------------------
bool criterion_3() {
    Check check;
    DGPConfig dgp;
    dgp.n = 40;
    dgp.half_range = 50.0;
    dgp.assignment.law = AssignmentLaw::complete;
    dgp.numeric_covariates = {{"x1", 0.0, 1.0, 0.0}, {"x2", 1.0, 2.0, 0.0}};
    dgp.effect.constant = 0.4;
    dgp.seed = 2026;

    MechanismSpec spec;
    spec.kind = MechanismKind::complete;
    CoverageOptions opts;
    opts.reps = 2000;
    opts.balance_alpha = 0.15;
    opts.statistic = StatisticKind::mahalanobis;
    opts.p_mode = PValueMode::default_mode;
    opts.balance_draws = 1000;
    opts.seed = 515;
    const CoverageResult result = coverage_study(dgp, spec, 50.0, opts);

    const double bound =
        0.15 + 3.0 * std::sqrt(0.15 * 0.85 / static_cast<double>(result.balance_tested));
    std::cout << "    rejection rate " << dtos(result.rejection_rate) << " over "
              << result.balance_tested << " reps (bound " << dtos(bound) << ")\n";
    check.expect(result.balance_tested >= 2000, "fewer than 2000 tested replications");
    check.expect(result.rejection_rate <= bound, "rejection rate exceeds the bound");
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 4. Estimator identities over >= 1000 randomized cases: sharp reduction is
//    exact, J=1 blocking is bit-equal to complete, pooled point matches the
//    size-weighted block average to 1e-12.
// ---------------------------------------------------------------------------
bool criterion_4() {
    Check check;
    CounterRng gen(44, 0);
    int cases = 0;
    while (cases < 1000) {
        const std::size_t n = 8 + gen.uniform_below(24);
        std::vector<int> z(n), w(n), g(n);
        std::vector<double> y(n);
        std::size_t nt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = gen.bernoulli(0.5) ? 1 : 0;
            nt += static_cast<std::size_t>(z[i]);
            y[i] = gen.normal() * gen.uniform(0.5, 3.0);
            w[i] = z[i]; // sharp
            g[i] = static_cast<int>(gen.uniform_below(3));
        }
        if (nt < 2 || n - nt < 2) continue;

        // sharp reduction on the whole window
        Dataset sharp = dataset_with_assignment(z, {categorical_column(
                                                       "g", {"g0", "g1", "g2"}, g)});
        {
            Dataset with_y(sharp.running(), y, w, sharp.covariates());
            with_y = assign_treatment(with_y, 0.0, Direction::treated_if_le);
            const Window window = window_units(with_y, 0.0, 10.0);
            const ITTEstimate itt = itt_estimates(window, with_y);
            const ComplierEstimate est = complete_randomization_estimate(window, with_y);
            check.expect(est.point == itt.itt_y, "sharp point != itt_y");
            check.expect(est.variance == itt.var_itt_y, "sharp variance != var_itt_y");

            // J = 1 blocking: bit-for-bit equality with the complete estimate
            std::vector<int> ones(n, 0);
            Dataset one_block = dataset_with_assignment(z, {categorical_column(
                                                               "b", {"all"}, ones)});
            Dataset one_with_y(one_block.running(), y, w, one_block.covariates());
            one_with_y = assign_treatment(one_with_y, 0.0, Direction::treated_if_le);
            const Window window1 = window_units(one_with_y, 0.0, 10.0);
            const ComplierEstimate complete1 =
                complete_randomization_estimate(window1, one_with_y);
            const std::vector<std::string> bnames{"b"};
            const BlockEstimate block1 = block_complier_ate(
                build_blocks(window1, one_with_y, bnames), window1, one_with_y);
            check.expect(block1.pooled.point == complete1.point, "J=1 point not bit-equal");
            check.expect(block1.pooled.variance == complete1.variance,
                         "J=1 variance not bit-equal");
            check.expect(block1.pooled.ci == complete1.ci, "J=1 CI not bit-equal");

            // pooled weighted-average identity on the 3-block version
            Dataset blocked(with_y.running(), y, w,
                            {categorical_column("g", {"g0", "g1", "g2"}, g)});
            blocked = assign_treatment(blocked, 0.0, Direction::treated_if_le);
            const Window windowb = window_units(blocked, 0.0, 10.0);
            const std::vector<std::string> gnames{"g"};
            const Blocking blocking = build_blocks(windowb, blocked, gnames);
            BlockEstimate multi;
            try {
                multi = block_complier_ate(blocking, windowb, blocked);
            } catch (const EstimationError&) {
                continue; // some block lacks 2 units per arm; draw a fresh case
            }
            double num = 0.0, den = 0.0;
            for (const auto& cell : multi.per_block) {
                num += static_cast<double>(cell.size) * cell.point;
                den += static_cast<double>(cell.size);
            }
            check.expect(std::abs(multi.pooled.point - num / den) <= 1e-12,
                         "pooled point deviates from the weighted average");
        }
        ++cases;
        if (!check.ok) break;
    }
    std::cout << "    " << cases << " randomized cases\n";
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 5. CI conservativeness at 95% nominal: sharp constant-effect DGP and a
//    fuzzy DGP (compliance 0.7) against the complier estimand; coverage
//    >= 0.95 - 3 sqrt(0.05*0.95/reps), reps = 2000. Runtime < 10 min.
// ---------------------------------------------------------------------------
bool criterion_5() {
    Check check;
    const int reps = 2000;
    const double bound = 0.95 - 3.0 * std::sqrt(0.05 * 0.95 / reps);

    for (const bool fuzzy : {false, true}) {
        DGPConfig dgp;
        dgp.n = 100;
        dgp.half_range = 50.0;
        dgp.assignment.law = AssignmentLaw::complete;
        dgp.effect.constant = 1.0;
        dgp.outcome.noise_sd = 1.0;
        dgp.numeric_covariates = {{"x", 0.0, 1.0, 0.0}};
        dgp.compliance.prob = fuzzy ? 0.7 : 1.0;
        dgp.seed = fuzzy ? 611 : 610;

        MechanismSpec spec;
        spec.kind = MechanismKind::complete;
        CoverageOptions opts;
        opts.reps = reps;
        opts.ci_alpha = 0.05;
        opts.balance_draws = 200;
        opts.seed = fuzzy ? 71 : 70;
        const CoverageResult result = coverage_study(dgp, spec, 50.0, opts);
        std::cout << "    " << (fuzzy ? "fuzzy" : "sharp") << " coverage "
                  << dtos(result.coverage) << " over " << result.estimated
                  << " estimates (bound " << dtos(bound) << ")\n";
        check.expect(result.estimated >= reps * 9 / 10, "too many estimation failures");
        check.expect(result.coverage >= bound,
                     std::string(fuzzy ? "fuzzy" : "sharp") + " coverage below the bound");
    }
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 6. Precision ordering: with a blocking covariate explaining >= 50% of the
//    outcome variance, the mean block CI width is strictly below the mean
//    complete CI width over 1000 replications.
// ---------------------------------------------------------------------------
bool criterion_6() {
    Check check;
    DGPConfig dgp;
    dgp.n = 80;
    dgp.half_range = 50.0;
    dgp.assignment.law = AssignmentLaw::block;
    dgp.assignment.block_covariates = {"g"};
    dgp.categorical_covariates = {{"g", {"a", "b"}, {0.5, 0.5}}};
    // block effect 2.5 on noise sd 1: explains 2.5^2/4 / (2.5^2/4 + 1) = 61%
    dgp.outcome.categorical_effects = {{0.0, 2.5}};
    dgp.outcome.noise_sd = 1.0;
    dgp.effect.constant = 0.5;
    dgp.seed = 4242;

    const int reps = 1000;
    KahanSum complete_width, block_width;
    int used = 0;
    for (int rep = 0; rep < reps; ++rep) {
        DGPConfig rep_dgp = dgp;
        rep_dgp.seed = CounterRng::derive_stream(dgp.seed, static_cast<std::uint64_t>(rep));
        const OracleDataset oracle = generate_dataset(rep_dgp);
        const Window window = window_units(oracle.data, 0.0, 50.0);
        try {
            const ComplierEstimate complete =
                complete_randomization_estimate(window, oracle.data);
            const std::vector<std::string> names{"g"};
            const BlockEstimate block = block_complier_ate(
                build_blocks(window, oracle.data, names), window, oracle.data);
            complete_width.add(complete.ci.second - complete.ci.first);
            block_width.add(block.pooled.ci.second - block.pooled.ci.first);
            ++used;
        } catch (const EstimationError&) {
        }
    }
    const double mean_complete = complete_width.value() / used;
    const double mean_block = block_width.value() / used;
    std::cout << "    mean CI width: complete " << dtos(mean_complete) << ", block "
              << dtos(mean_block) << " (" << used << " reps)\n";
    check.expect(used >= 900, "too many estimation failures");
    check.expect(mean_block < mean_complete, "block CI not narrower than complete CI");
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 7. Decomposition identity on oracle potential outcomes: reconstruction of
//    the outer-window effect errs by <= 1e-12 on 100 random (h1, h2, DGP)
//    triples.
// ---------------------------------------------------------------------------
bool criterion_7() {
    Check check;
    CounterRng gen(7007, 0);
    int triples = 0;
    while (triples < 100) {
        DGPConfig dgp;
        dgp.n = 100 + gen.uniform_below(900);
        dgp.half_range = 100.0;
        dgp.assignment.law =
            gen.bernoulli(0.5) ? AssignmentLaw::running_threshold : AssignmentLaw::complete;
        dgp.effect.constant = gen.uniform(-2.0, 2.0);
        if (gen.bernoulli(0.5)) {
            dgp.effect.jump = gen.uniform(-3.0, 3.0);
            dgp.effect.jump_radius = gen.uniform(10.0, 80.0);
        }
        dgp.compliance.prob = gen.bernoulli(0.5) ? 1.0 : gen.uniform(0.5, 1.0);
        dgp.outcome.s_slope = gen.uniform(-0.02, 0.02);
        dgp.seed = gen.next_u64();

        const double h1 = gen.uniform(5.0, 60.0);
        const double h2 = h1 + gen.uniform(10.0, 40.0);
        const OracleDataset oracle = generate_dataset(dgp);

        const Window w1 = window_units(oracle.data, 0.0, h1);
        const Window w2 = window_units(oracle.data, 0.0, h2);
        const std::size_t n1 = w1.size();
        const std::size_t n2 = w2.size();
        if (n1 == 0 || n2 <= n1) continue;

        const double t1 = true_local_ate(oracle, 0.0, h1, Population::all);
        const double t2 = true_local_ate(oracle, 0.0, h2, Population::all);
        KahanSum ring_sum;
        for (std::size_t u : w2.members) {
            if (std::abs(oracle.data.running()[u]) <= h1) continue;
            ring_sum.add(oracle.y1[u] - oracle.y0[u]);
        }
        const double t_ring = ring_sum.value() / static_cast<double>(n2 - n1);
        const double reconstructed =
            (static_cast<double>(n1) * t1 + static_cast<double>(n2 - n1) * t_ring) /
            static_cast<double>(n2);
        check.expect(std::abs(t2 - reconstructed) <= 1e-12,
                     "triple " + std::to_string(triples) +
                         ": error = " + dtos(std::abs(t2 - reconstructed)));
        ++triples;
        if (!check.ok) break;
    }
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 8. Window selection returns the largest grid bandwidth whose exact-mode p
//    is >= 0.15, cross-checked against exhaustive per-h oracle p-values, on
//    data whose imbalance grows away from the cutoff.
// ---------------------------------------------------------------------------
bool criterion_8() {
    Check check;
    const std::vector<double> grid{15, 35, 55, 75, 95};
    int verified = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CounterRng gen(seed, 8);
        std::vector<double> s, x;
        std::vector<int> z;
        for (int i = 0; i < 20; ++i) {
            const double mag = 5.0 + 10.0 * (i / 2);
            const double v = (i % 2 == 0) ? -mag : mag;
            s.push_back(v);
            const double lean = std::max(0.0, std::abs(v) - 40.0) * ((v <= 0) ? 1.0 : -1.0);
            x.push_back(0.25 * lean + 0.4 * gen.normal());
            z.push_back(v <= 0 ? 1 : 0);
        }
        Dataset d(std::move(s), std::nullopt, std::nullopt, {numeric_column("x", std::move(x))});
        d = assign_treatment(d, 0.0, Direction::treated_if_le);

        MechanismSpec spec;
        spec.kind = MechanismKind::complete;
        PValueOptions opts;
        opts.mode = PValueMode::exact;
        const WindowSelection selection =
            select_window(d, spec, 0.0, grid, StatisticKind::abs_mean_difference, {}, 0.15,
                          opts);

        // oracle: exhaustive exact p per testable grid point
        double expected = -1.0;
        const std::vector<std::string> names{"x"};
        for (double h : grid) {
            const Window w = window_units(d, 0.0, h);
            if (w.n_treated < 2 || w.n_control < 2) continue;
            const double p = exact_p_oracle(w, d, bind_mechanism(spec, w, d),
                                            StatisticKind::abs_mean_difference, names)
                                 .at("x");
            if (p >= 0.15) expected = h;
        }
        const double selected =
            selection.selected_bandwidth ? *selection.selected_bandwidth : -1.0;
        check.expect(selected == expected,
                     "seed " + std::to_string(seed) + ": selected " + dtos(selected) +
                         ", oracle says " + dtos(expected));
        if (expected > 0 && expected < grid.back()) ++verified;
    }
    std::cout << "    " << verified
              << "/10 datasets selected an interior bandwidth (imbalance detected)\n";
    check.expect(verified >= 5, "imbalance rarely detected; fixture too weak");
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 9. Propensity fitting: IRLS matches a brute-force likelihood grid to 1e-4
//    on 6-point fixtures; separation raises the documented error.
// ---------------------------------------------------------------------------
bool criterion_9() {
    Check check;
    const auto grid_mle = [](const std::vector<double>& x, const std::vector<int>& z) {
        const auto loglik = [&](double b0, double b1) {
            double ll = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double eta = b0 + b1 * x[i];
                ll += z[i] * eta - std::log1p(std::exp(eta));
            }
            return ll;
        };
        double lo0 = -20, hi0 = 20, lo1 = -20, hi1 = 20, best0 = 0, best1 = 0;
        for (int round = 0; round < 12; ++round) {
            double best = -1e300;
            const double st0 = (hi0 - lo0) / 40.0, st1 = (hi1 - lo1) / 40.0;
            for (double b0 = lo0; b0 <= hi0 + 1e-15; b0 += st0) {
                for (double b1 = lo1; b1 <= hi1 + 1e-15; b1 += st1) {
                    const double ll = loglik(b0, b1);
                    if (ll > best) {
                        best = ll;
                        best0 = b0;
                        best1 = b1;
                    }
                }
            }
            lo0 = best0 - 2 * st0;
            hi0 = best0 + 2 * st0;
            lo1 = best1 - 2 * st1;
            hi1 = best1 + 2 * st1;
        }
        return std::pair{best0, best1};
    };

    const std::vector<std::vector<int>> fixtures{
        {0, 1, 0, 1, 1, 0}, {1, 0, 1, 1, 0, 0}, {0, 1, 1, 0, 1, 0}};
    const std::vector<std::vector<double>> xs{
        {1, 2, 3, 4, 5, 6}, {-1.2, 0.4, 1.1, -0.3, 2.2, 0.9}, {0.5, 0.1, 0.9, 0.2, 0.8, 0.4}};
    for (std::size_t f = 0; f < fixtures.size(); ++f) {
        Dataset d = dataset_with_assignment(fixtures[f], {numeric_column("x", xs[f])});
        const Window w = window_units(d, 0.0, 10.0);
        const std::vector<std::string> names{"x"};
        const PropensityModel model = fit_propensity(w, d, names);
        const auto [b0, b1] = grid_mle(xs[f], fixtures[f]);
        check.expect(std::abs(model.coefficients[0] - b0) <= 1e-4,
                     "fixture " + std::to_string(f) + ": intercept " +
                         dtos(model.coefficients[0]) + " vs grid " + dtos(b0));
        check.expect(std::abs(model.coefficients[1] - b1) <= 1e-4,
                     "fixture " + std::to_string(f) + ": slope " + dtos(model.coefficients[1]) +
                         " vs grid " + dtos(b1));
    }

    // complete separation must raise the documented error
    Dataset sep = dataset_with_assignment({0, 0, 0, 1, 1, 1},
                                          {numeric_column("x", {1, 2, 3, 4, 5, 6})});
    const Window w = window_units(sep, 0.0, 10.0);
    bool threw = false;
    try {
        const std::vector<std::string> names{"x"};
        fit_propensity(w, sep, names);
    } catch (const SeparationError&) {
        threw = true;
    }
    check.expect(threw, "separation did not raise SeparationError");
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

// ---------------------------------------------------------------------------
// 10. Reproducibility: rerunning a CLI command with the same effective
//     config and seed yields byte-identical analytic output.
// ---------------------------------------------------------------------------
bool criterion_10() {
    Check check;
    const fs::path dir = fs::temp_directory_path() / "rdlocal_acceptance_10";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const fs::path input = dir / "data.csv";
    {
        std::ofstream out(input);
        out << "s,y,w,x,g\n";
        CounterRng rng(10101, 0);
        for (int i = 0; i < 300; ++i) {
            const double s = rng.uniform(0.0, 2000.0);
            const int z = s <= 1000.0 ? 1 : 0;
            const int w = z == 1 && rng.bernoulli(0.75) ? 1 : 0;
            out << s << "," << (0.4 * w + rng.normal()) << "," << w << "," << rng.normal()
                << "," << (rng.bernoulli(0.5) ? "a" : "b") << "\n";
        }
    }

    const auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    const auto run = [&](const std::string& args) {
        const std::string cmd = std::string(RDLOCAL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };

    const std::string base = " --input " + input.string() +
                             " --running-col s --outcome-col y --receipt-col w"
                             " --covariate x:numeric --covariate g:categorical"
                             " --cutoff 1000 --seed 31 --out " + dir.string();

    for (const std::string& command :
         {std::string("windows --mechanism complete --grid 200:1000:200 --draws 400"),
          std::string("sensitivity --mechanism block --blocks g --grid 400,800 --draws 300"),
          std::string("estimate --mechanism complete --bandwidth 800")}) {
        check.expect(run(command + base) == 0, command + ": first run failed");
        std::vector<std::pair<fs::path, std::string>> first;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.path() == input) continue;
            first.emplace_back(entry.path(), slurp(entry.path()));
        }
        check.expect(run(command + base) == 0, command + ": second run failed");
        for (const auto& [path, bytes] : first) {
            check.expect(slurp(path) == bytes,
                         command + ": " + path.filename().string() + " not byte-identical");
        }
    }
    if (!check.ok) std::cout << "    " << check.detail << "\n";
    return check.ok;
}

struct Criterion {
    int id;
    const char* name;
    std::function<bool()> run;
    double time_budget_seconds; // 0 = unbounded
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {1, "Monte Carlo p-values match the enumeration oracle (all mechanisms)", criterion_1,
         60.0},
        {2, "hand-enumerable fixture: exact p = 1/3", criterion_2, 0.0},
        {3, "balance test validity under the true mechanism", criterion_3, 300.0},
        {4, "estimator identities (sharp, J=1, pooled weights)", criterion_4, 0.0},
        {5, "CI conservativeness at 95% (sharp and fuzzy)", criterion_5, 600.0},
        {6, "block randomization is more precise under prognostic blocks", criterion_6, 0.0},
        {7, "window decomposition identity on oracle effects", criterion_7, 0.0},
        {8, "window selection matches exhaustive exact p-values", criterion_8, 0.0},
        {9, "IRLS propensity fit matches the likelihood-grid oracle", criterion_9, 0.0},
        {10, "CLI reruns are byte-identical", criterion_10, 0.0},
    };
    return all;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

    bool all_ok = true;
    for (const Criterion& criterion : criteria()) {
        if (!selected.empty() &&
            std::find(selected.begin(), selected.end(), criterion.id) == selected.end()) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = criterion.run();
        } catch (const std::exception& e) {
            std::cout << "    exception: " << e.what() << "\n";
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && criterion.time_budget_seconds > 0.0 &&
            seconds > criterion.time_budget_seconds) {
            std::cout << "    exceeded the " << criterion.time_budget_seconds
                      << " s runtime budget\n";
            ok = false;
        }
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion.id << ": "
                  << criterion.name << " [" << static_cast<int>(seconds * 1000) << " ms]\n";
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}
