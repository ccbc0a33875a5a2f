#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "bulkq/dessim.hpp"
#include "bulkq/stats.hpp"
#include "bulkq/transient.hpp"

using namespace bulkq;

TEST_CASE("constant-rate arrivals have exponential gaps") {
    const RateFunction rf = RateFunction::constant(2.0);
    Rng rng(123);
    const int n = 100000;
    double sum = 0.0;
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
        const double next = next_arrival(rf, t, rng);
        sum += next - t;
        t = next;
    }
    const double mean = sum / n;
    const double se = 0.5 / std::sqrt(static_cast<double>(n));  // sd of Exp(2) is 1/2
    CHECK(std::abs(mean - 0.5) <= 3.0 * se);
}

TEST_CASE("zero rate yields the infinity sentinel") {
    Rng rng(1);
    CHECK(std::isinf(next_arrival(RateFunction::constant(0.0), 0.0, rng)));
    CHECK(std::isinf(next_arrival(RateFunction::piecewise({1.0}, {2.0, 0.0}), 1.5, rng)));
    // a zero piece followed by a live one is skipped, not absorbed
    const double t = next_arrival(RateFunction::piecewise({1.0}, {0.0, 3.0}), 0.0, rng);
    CHECK(t >= 1.0);
}

TEST_CASE("sinusoid arrival counts match the rate integral") {
    const RateFunction rf = RateFunction::sinusoid(0.5, 0.3, 1.0, 0.0);
    const double two_pi = 2.0 * std::acos(-1.0);
    const double expected = rf.integrate(0.0, two_pi);  // = pi
    const int paths = 100000;
    long total = 0;
    for (int p = 0; p < paths; ++p) {
        Rng rng(derive_seed(2024, static_cast<std::uint64_t>(p)));
        double t = 0.0;
        while ((t = next_arrival(rf, t, rng)) <= two_pi) ++total;
    }
    const double mean = static_cast<double>(total) / paths;
    const double se = std::sqrt(expected / paths);  // Poisson sd over sqrt(n)
    CHECK(std::abs(mean - expected) <= 3.0 * se);
}

TEST_CASE("thinning passes a goodness-of-fit test against the Poisson law") {
    const RateFunction rf = RateFunction::sinusoid(0.5, 0.3, 1.0, 0.0);
    const double two_pi = 2.0 * std::acos(-1.0);
    const double mean = rf.integrate(0.0, two_pi);
    const int paths = 100000;
    std::vector<long> histogram(64, 0);
    for (int p = 0; p < paths; ++p) {
        Rng rng(derive_seed(31337, static_cast<std::uint64_t>(p)));
        long count = 0;
        double t = 0.0;
        while ((t = next_arrival(rf, t, rng)) <= two_pi) ++count;
        ++histogram[static_cast<std::size_t>(std::min<long>(count, 63))];
    }
    const GofResult gof = poisson_gof(histogram, mean, paths);
    INFO("chi2 = " << gof.statistic << " dof = " << gof.dof << " p = " << gof.p_value);
    CHECK(gof.p_value >= 0.01);
}

TEST_CASE("no arrivals means the path never leaves the empty idle state") {
    const QueueConfig q(2, 3, 1.0);
    const auto path = simulate_path(q, RateFunction::constant(0.0), 10.0,
                                    {0.5, 2.0, 10.0}, 99);
    REQUIRE(path.size() == 3);
    for (const PathObservation& ob : path) {
        CHECK(ob.queue == 0);
        CHECK_FALSE(ob.busy);
    }
}

TEST_CASE("fast servers drain the queue almost always") {
    const QueueConfig q(1, 1000000, 100.0);
    const RateFunction rf = RateFunction::constant(1.0);
    int busy_with_backlog = 0;
    const int paths = 2000;
    for (int p = 0; p < paths; ++p) {
        const auto path = simulate_path(q, rf, 5.0, {5.0},
                                        derive_seed(5150, static_cast<std::uint64_t>(p)));
        if (path[0].busy && path[0].queue >= 1) ++busy_with_backlog;
    }
    CHECK(static_cast<double>(busy_with_backlog) / paths < 0.05);
}

TEST_CASE("estimate is deterministic and partitions the replications") {
    const QueueConfig q(2, 3, 1.0);
    const RateFunction rf = RateFunction::sinusoid(0.5, 0.3, 1.0, 0.0);
    const std::vector<double> cps = {0.5, 1.5};
    const SimEstimate a = estimate(q, rf, cps, 12, 2000, 777, 1);
    const SimEstimate b = estimate(q, rf, cps, 12, 2000, 777, 3);
    for (std::size_t c = 0; c < cps.size(); ++c) {
        long total = 0;
        for (long v : a.counts[c]) total += v;
        CHECK(total == 2000);  // frequencies partition the replications exactly
        double sum = 0.0;
        for (double v : a.idle_prob[c]) sum += v;
        for (double v : a.queue_prob[c]) sum += v;
        CHECK(sum == Catch::Approx(1.0).margin(1e-12));
        CHECK(a.counts[c] == b.counts[c]);  // thread count cannot matter
        CHECK(a.idle_prob[c] == b.idle_prob[c]);
        CHECK(a.queue_prob[c] == b.queue_prob[c]);
    }

    const SimEstimate c1 = estimate(q, rf, cps, 12, 500, 42, 2);
    const SimEstimate c2 = estimate(q, rf, cps, 12, 500, 42, 2);
    CHECK(c1.idle_prob == c2.idle_prob);
    CHECK(c1.queue_se == c2.queue_se);
}

TEST_CASE("single replication gives indicator frequencies") {
    const QueueConfig q(1, 1, 1.0);
    const SimEstimate e = estimate(q, RateFunction::constant(1.0), {0.3}, 5, 1, 9);
    double sum = 0.0;
    int ones = 0;
    for (double v : e.idle_prob[0]) {
        CHECK((v == 0.0 || v == 1.0));
        sum += v;
        ones += v == 1.0;
    }
    for (double v : e.queue_prob[0]) {
        CHECK((v == 0.0 || v == 1.0));
        sum += v;
        ones += v == 1.0;
    }
    CHECK(sum == 1.0);
    CHECK(ones == 1);
}

TEST_CASE("constant-rate estimates agree with the chain in total variation") {
    // union-bound concentration threshold at confidence 0.99 over m cells:
    // sqrt((m ln 2 + ln(1/alpha)) / (2 n))
    std::mt19937_64 gen(4242);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int cfg = 0; cfg < 5; ++cfg) {
        const int k = 1 + static_cast<int>(3.0 * u(gen));
        const int B = k + static_cast<int>((4.0 - k) * u(gen));
        const double mu = 0.5 + 1.5 * u(gen);
        const double lambda = 0.3 + 0.9 * u(gen);
        const QueueConfig q(k, B, mu);
        const int levels = 30;
        const long reps = 100000;
        const SimEstimate est = estimate(q, RateFunction::constant(lambda), {1.0, 5.0},
                                         levels, reps, 1000 + cfg, 2);
        for (std::size_t c = 0; c < 2; ++c) {
            const double t = c == 0 ? 1.0 : 5.0;
            const Marginals ref = uniformization(q, lambda, levels, t, 1e-12);
            double tv = 0.0;
            for (int r = 0; r < k; ++r) {
                tv += std::abs(est.idle_prob[c][static_cast<std::size_t>(r)] -
                               ref.idle[static_cast<std::size_t>(r)]);
            }
            for (int n = 0; n < levels; ++n) {
                tv += std::abs(est.queue_prob[c][static_cast<std::size_t>(n)] -
                               ref.queue[static_cast<std::size_t>(n)]);
            }
            tv *= 0.5;
            const double m_cells = static_cast<double>(k + levels);
            const double bound = std::sqrt((m_cells * std::log(2.0) + std::log(100.0)) /
                                           (2.0 * static_cast<double>(reps)));
            INFO("cfg " << cfg << " t " << t << " tv " << tv << " bound " << bound);
            CHECK(tv <= bound);
        }
    }
}
