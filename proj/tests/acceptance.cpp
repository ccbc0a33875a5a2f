// Acceptance suite: one test case per release criterion, each printing a
// PASS/FAIL line with its metric and threshold.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bulkq/dessim.hpp"
#include "bulkq/runner.hpp"
#include "bulkq/scenario.hpp"
#include "bulkq/spectral.hpp"
#include "bulkq/stats.hpp"
#include "bulkq/transient.hpp"

using namespace bulkq;

namespace {

void report(const std::string& name, bool pass, double metric, double threshold) {
    std::printf("[%s] %-38s metric=%.6g threshold=%.6g\n", pass ? "PASS" : "FAIL", name.c_str(),
                metric, threshold);
    std::fflush(stdout);
}

double max_state_err(const Marginals& a, const Marginals& b) {
    double err = 0.0;
    for (std::size_t r = 0; r < a.idle.size(); ++r) err = std::max(err, std::abs(a.idle[r] - b.idle[r]));
    for (std::size_t n = 0; n < a.queue.size(); ++n) err = std::max(err, std::abs(a.queue[n] - b.queue[n]));
    return err;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Draw {
    SpectralPoint sp;
    BoundaryData c;
    QueueConfig q;
};

std::vector<Draw> spectral_draws(int count, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Draw> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double mu = 0.5 + 2.5 * u(gen);
        const double lambda = 2.0 * u(gen);
        const std::complex<double> gamma(-mu + 0.1 + (2.0 - (-mu + 0.1)) * u(gen),
                                         -2.0 + 4.0 * u(gen));
        BoundaryData c;
        const int support = 1 + static_cast<int>(4.99 * u(gen));
        for (int s = 0; s < support; ++s) {
            c.c.emplace_back(2.0 * u(gen) - 1.0, 2.0 * u(gen) - 1.0);
        }
        out.push_back({SpectralPoint(gamma, lambda, mu), c, QueueConfig(2, 3, mu)});
    }
    return out;
}

}  // namespace

TEST_CASE("criterion 1: conservation on the sinusoid scenario") {
    const QueueConfig q(2, 3, 1.0);
    const GridConfig g(40, 25.0, 25000);  // dt = dx = 1e-3
    const RateFunction rf = RateFunction::sinusoid(0.5, 0.3, 1.0, 0.0);
    const std::vector<double> cps = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0};

    const auto t0 = std::chrono::steady_clock::now();
    const Trajectory traj = solve(q, g, rf, 10.0, cps);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    double worst = 0.0;
    for (const StateVector& s : traj.states) {
        worst = std::max(worst, std::abs(total_mass(s, q, g) + s.lost_mass - 1.0));
    }
    report("conservation_max_dev", worst <= 1e-5, worst, 1e-5);
    report("conservation_runtime_s", seconds <= 60.0, seconds, 60.0);
    CHECK(worst <= 1e-5);
    CHECK(seconds <= 60.0);
}

TEST_CASE("criterion 2: triple agreement at constant rates") {
    struct Case {
        QueueConfig q;
        double lambda;
    };
    const std::vector<Case> cases = {{QueueConfig(1, 1, 1.0), 1.0},
                                     {QueueConfig(2, 3, 1.0), 0.8}};
    const std::vector<double> times = {0.1, 1.0, 5.0};
    const int levels = 50;
    const long reps = 100000;

    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const QueueConfig& q = cases[ci].q;
        const double lambda = cases[ci].lambda;
        const GridConfig g(levels, 25.0, 25000);
        const RateFunction rf = RateFunction::constant(lambda);
        const Trajectory traj = solve(q, g, rf, 5.0, times);
        const SimEstimate est = estimate(q, rf, times, levels, reps, 2029 + ci, 2);
        double pde_err = 0.0;
        double sim_excess = 0.0;
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            const Marginals ref = uniformization(q, lambda, levels, times[ti], 1e-10);
            const Marginals got = marginals(traj.states[ti], q, g);
            pde_err = std::max(pde_err, max_state_err(got, ref));
            for (int r = 0; r < q.k; ++r) {
                const double se = std::sqrt(ref.idle[static_cast<std::size_t>(r)] *
                                            (1.0 - ref.idle[static_cast<std::size_t>(r)]) / reps);
                sim_excess = std::max(sim_excess,
                                      std::abs(est.idle_prob[ti][static_cast<std::size_t>(r)] -
                                               ref.idle[static_cast<std::size_t>(r)]) - 3.0 * se);
            }
            for (int n = 0; n < levels; ++n) {
                const double se = std::sqrt(ref.queue[static_cast<std::size_t>(n)] *
                                            (1.0 - ref.queue[static_cast<std::size_t>(n)]) / reps);
                sim_excess = std::max(sim_excess,
                                      std::abs(est.queue_prob[ti][static_cast<std::size_t>(n)] -
                                               ref.queue[static_cast<std::size_t>(n)]) - 3.0 * se);
            }
        }
        const std::string tag = "triple_agreement_case" + std::to_string(ci);
        report(tag + "_pde", pde_err <= 5e-3, pde_err, 5e-3);
        report(tag + "_sim_3se_excess", sim_excess <= 0.0, sim_excess, 0.0);
        CHECK(pde_err <= 5e-3);
        CHECK(sim_excess <= 0.0);
        if (ci == 0) {
            const Marginals ref01 = uniformization(q, lambda, levels, 0.1, 1e-10);
            report("reference_p00_at_0.1", std::abs(ref01.idle[0] - 0.9092) < 5e-4,
                   ref01.idle[0], 0.9092);
            CHECK(ref01.idle[0] == Catch::Approx(0.9092).margin(5e-4));
        }
    }
}

TEST_CASE("criterion 3: first-order convergence against the chain") {
    const QueueConfig q(1, 1, 1.0);
    const double lambda = 1.0;
    const int levels = 20;
    const double x_max = 16.0;
    auto err_at = [&](int cells) {
        const GridConfig g(levels, x_max, cells);
        const Trajectory traj = solve(q, g, RateFunction::constant(lambda), 1.0, {1.0});
        const Marginals ref = uniformization(q, lambda, levels, 1.0, 1e-10);
        return max_state_err(marginals(traj.states[0], q, g), ref);
    };
    const double coarse = err_at(4000);  // dt = 4e-3
    const double fine = err_at(8000);    // dt = 2e-3
    const double ratio = fine / coarse;
    report("convergence_ratio", ratio >= 0.4 && ratio <= 0.6, ratio, 0.5);
    CHECK(ratio >= 0.4);
    CHECK(ratio <= 0.6);
}

TEST_CASE("criterion 4: kernel property over random spectral draws") {
    const auto draws = spectral_draws(100, 91);
    const GridConfig g(10, 12.0, 240);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (const Draw& d : draws) {
        const ComplexState s = eigenfunction(d.sp, d.c, d.q, g);
        worst = std::max(worst, residual_semi_analytic(d.sp, s, d.q, g));
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report("kernel_residual_max", worst <= 1e-10, worst, 1e-10);
    report("kernel_runtime_s", seconds <= 10.0, seconds, 10.0);
    CHECK(worst <= 1e-10);
    CHECK(seconds <= 10.0);
}

TEST_CASE("criterion 5: norm estimate from the kernel proof") {
    const auto draws = spectral_draws(100, 92);
    const GridConfig g(40, 30.0, 600);
    double worst_excess = -1.0;
    int checked = 0;
    for (const Draw& d : draws) {
        const double re_gamma = d.sp.big_gamma().real();
        if (!(d.sp.lambda < re_gamma)) continue;
        ++checked;
        const ComplexState s = eigenfunction(d.sp, d.c, d.q, g);
        double busy_norm = 0.0;
        for (const Complex& v : s.busy) busy_norm += std::abs(v);
        busy_norm *= g.dx;
        double c_norm = 0.0;
        for (const Complex& v : d.c.c) c_norm += std::abs(v);
        const double bound = (1.0 / re_gamma) / (1.0 - d.sp.lambda / re_gamma) * c_norm;
        worst_excess = std::max(worst_excess, busy_norm - bound);
    }
    report("norm_bound_excess", worst_excess <= 1e-8, worst_excess, 1e-8);
    report("norm_bound_draws_checked", checked == 100, checked, 100);
    CHECK(worst_excess <= 1e-8);
    CHECK(checked == 100);  // Re Gamma - lambda = Re gamma + mu > 0 on every draw
}

TEST_CASE("criterion 6: boundary identity of the Dirichlet columns") {
    const SpectralPoint sp({0.5, 0.0}, 1.0, 2.0);
    const QueueConfig q(2, 3, 2.0);
    const GridConfig g(12, 8.0, 160);
    const int n_b = 10;
    const DirichletArtifacts art = dirichlet(sp, q, g, n_b);
    double worst = 0.0;
    for (int j = 0; j < n_b; ++j) {
        const ComplexState& col = art.columns[static_cast<std::size_t>(j)];
        for (int n = 0; n < g.levels; ++n) {
            const Complex expected = n == j ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
            worst = std::max(worst,
                             std::abs(col.boundary_value[static_cast<std::size_t>(n)] - expected));
        }
    }
    report("dirichlet_boundary_identity", worst == 0.0, worst, 0.0);
    CHECK(worst == 0.0);  // exact by the closed form at x = 0
}

TEST_CASE("criterion 7: structure of the boundary coupling matrix") {
    const SpectralPoint sp({0.5, 0.0}, 1.0, 2.0);
    const QueueConfig q(2, 3, 2.0);
    const GridConfig g(14, 8.0, 160);
    const int n_b = 8;
    const DirichletArtifacts art = dirichlet(sp, q, g, n_b);

    const double mu_over_gamma = 2.0 / 3.5;
    const double ratio = 1.0 / 3.5;
    double worst_rel = 0.0;
    for (int n = 1; n + q.B < g.levels; ++n) {
        for (int j = 0; j < n_b && j <= n + q.B; ++j) {
            const double expected = mu_over_gamma * std::pow(ratio, n + q.B - j);
            worst_rel = std::max(worst_rel,
                                 std::abs(art.phi_d(n, j).real() - expected) / expected);
        }
    }
    // second-branch first-row entries, frozen from exact rational arithmetic
    const double a13 = art.phi_d(0, 2).real();  // i = 3 = k + 1
    const double a14 = art.phi_d(0, 3).real();  // i = 4 = B + 1
    const double dev13 = std::abs(a13 - 0.734693877551020) / 0.734693877551020;
    const double dev14 = std::abs(a14 - 0.571428571428571) / 0.571428571428571;
    const double worst = std::max({worst_rel, dev13, dev14});
    report("phid_structure_rel_dev", worst <= 1e-10, worst, 1e-10);
    CHECK(worst <= 1e-10);
}

TEST_CASE("criterion 8: the printed d11 discrepancy is flagged, not fatal") {
    const SpectralPoint sp({0.5, 0.0}, 1.0, 2.0);
    const QueueConfig q(2, 3, 2.0);
    const GridConfig g(12, 8.0, 160);
    const DirichletArtifacts art = dirichlet(sp, q, g, 8);

    bool flagged = false;
    double printed = 0.0, derived = 0.0;
    for (const ClosedFormRow& row : art.report) {
        if (row.object == "d" && row.index == "i=1;r=1") {
            printed = row.printed.real();
            derived = row.derived.real();
            flagged = row.rel_dev > kClosedFormWarnRelDev;
        }
    }
    report("d11_flagged", flagged, std::abs(printed - derived), kClosedFormWarnRelDev);
    CHECK(flagged);
    CHECK(derived == Catch::Approx(0.380952380952381).epsilon(1e-12));
    CHECK(printed == Catch::Approx(0.362811791383220).epsilon(1e-12));

    // the CLI spectral run must succeed (exit 0) despite the flagged rows
    const auto tmp = std::filesystem::temp_directory_path() / "bulkq_acc_c8";
    std::filesystem::remove_all(tmp);
    std::filesystem::create_directories(tmp);
    const std::string cfg =
        "[queue]\nk = 2\nB = 3\nmu = 2\n"
        "[rate]\ntype = constant\na = 1\n"
        "[grid]\nN = 12\nx_max = 8\nM = 160\n"
        "[run]\nhorizon = 0.5\ncheckpoints = 0.5\n"
        "[spectral]\ngamma = 0.5\nn_b = 8\n"
        "[sim]\nn_reps = 2000\nseed = 5\n";
    {
        std::ofstream out(tmp / "scenario.cfg", std::ios::binary);
        out << cfg;
    }
    const std::string cmd = std::string(BULKQ_CLI_PATH) + " spectral --config " +
                            (tmp / "scenario.cfg").string() + " --out " + (tmp / "out").string();
    const int rc = std::system(cmd.c_str());
    report("spectral_cli_exit", rc == 0, rc, 0);
    CHECK(rc == 0);
    const std::string rep = read_file(tmp / "out" / "dirichlet_report_0.csv");
    CHECK(rep.find("d,i=1;r=1") != std::string::npos);
    std::filesystem::remove_all(tmp);
}

TEST_CASE("criterion 9: thinning matches the Poisson law") {
    const RateFunction rf = RateFunction::sinusoid(0.5, 0.3, 1.0, 0.0);
    const double two_pi = 2.0 * std::acos(-1.0);
    const double mean = rf.integrate(0.0, two_pi);
    const int paths = 100000;
    std::vector<long> histogram(64, 0);
    for (int p = 0; p < paths; ++p) {
        Rng rng(derive_seed(90210, static_cast<std::uint64_t>(p)));
        long count = 0;
        double t = 0.0;
        while ((t = next_arrival(rf, t, rng)) <= two_pi) ++count;
        ++histogram[static_cast<std::size_t>(std::min<long>(count, 63))];
    }
    const GofResult gof = poisson_gof(histogram, mean, paths);
    report("thinning_gof_pvalue", gof.p_value >= 0.01, gof.p_value, 0.01);
    CHECK(gof.p_value >= 0.01);
}

TEST_CASE("solver tracks the simulator on a time-varying rate") {
    const QueueConfig q(2, 3, 1.0);
    const GridConfig g(20, 20.0, 20000);  // dt = 1e-3
    const RateFunction rf = RateFunction::sinusoid(0.5, 0.3, 1.0, 0.0);
    const std::vector<double> times = {5.0};
    const long reps = 100000;

    const Trajectory traj = solve(q, g, rf, 5.0, times);
    const Marginals got = marginals(traj.states[0], q, g);
    const SimEstimate est = estimate(q, rf, times, g.levels, reps, 515, 2);

    // standard errors under the null that the counts are binomial with the
    // solver's probabilities
    double excess = 0.0;
    const double n_reps = static_cast<double>(reps);
    for (int r = 0; r < q.k; ++r) {
        const double p = got.idle[static_cast<std::size_t>(r)];
        const double se = std::sqrt(std::max(0.0, p * (1.0 - p)) / n_reps);
        excess = std::max(excess, std::abs(p - est.idle_prob[0][static_cast<std::size_t>(r)]) -
                                      3.0 * se);
    }
    for (int n = 0; n < g.levels; ++n) {
        const double p = got.queue[static_cast<std::size_t>(n)];
        const double se = std::sqrt(std::max(0.0, p * (1.0 - p)) / n_reps);
        excess = std::max(excess, std::abs(p - est.queue_prob[0][static_cast<std::size_t>(n)]) -
                                      3.0 * se);
    }
    report("sinusoid_cross_check_3se_excess", excess <= 0.0, excess, 0.0);
    CHECK(excess <= 0.0);
}

TEST_CASE("criterion 10: verify runs are byte-identical") {
    const auto tmp = std::filesystem::temp_directory_path() / "bulkq_acc_c10";
    std::filesystem::remove_all(tmp);
    std::filesystem::create_directories(tmp);
    const std::string cfg =
        "[queue]\nk = 1\nB = 1\nmu = 1\n"
        "[rate]\ntype = constant\na = 1\n"
        "[grid]\nN = 25\nx_max = 15\nM = 7500\n"
        "[run]\nhorizon = 1\ncheckpoints = 0.5, 1\n"
        "[spectral]\ngamma = 0.5\nn_b = 8\n"
        "[sim]\nn_reps = 20000\nseed = 11\n";
    {
        std::ofstream out(tmp / "scenario.cfg", std::ios::binary);
        out << cfg;
    }
    auto run_once = [&](const std::string& sub) {
        const std::string cmd = std::string(BULKQ_CLI_PATH) + " verify --config " +
                                (tmp / "scenario.cfg").string() + " --out " +
                                (tmp / sub).string() + " --threads 2 > " +
                                (tmp / (sub + ".log")).string();
        return std::system(cmd.c_str());
    };
    const int rc1 = run_once("a");
    const int rc2 = run_once("b");
    report("verify_exit_codes", rc1 == 0 && rc2 == 0, rc1 + rc2, 0);
    REQUIRE(rc1 == 0);
    REQUIRE(rc2 == 0);

    bool identical = true;
    int compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(tmp / "a")) {
        const auto name = entry.path().filename();
        ++compared;
        if (read_file(entry.path()) != read_file(tmp / "b" / name)) identical = false;
    }
    report("verify_artifacts_identical", identical && compared >= 4, compared, 4);
    CHECK(identical);
    CHECK(compared >= 4);
    std::filesystem::remove_all(tmp);
}
