#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "bulkq/model.hpp"
#include "bulkq/rates.hpp"

namespace bulkq {

/// Deterministic random stream. Draws go through explicit inverse-CDF
/// formulas on top of the standardized mt19937_64 sequence, so identical
/// seeds give identical paths on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double exponential(double rate) {
        return -std::log1p(-uniform()) / rate;
    }

private:
    std::mt19937_64 engine_;
};

/// Counter-derived replication seed: splitmix64 of the master seed plus the
/// replication index, so replications are reproducible independently of
/// execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Next arrival epoch after `t` of the non-homogeneous Poisson process, by
/// thinning against the interval majorant. Piecewise rates are thinned piece
/// by piece so the majorant is exact; a rate that is identically zero from
/// `t` on returns +infinity.
inline double next_arrival(const RateFunction& rf, double t, Rng& rng) {
    if (!(t >= 0.0)) throw std::invalid_argument("next_arrival: t must be nonnegative");
    constexpr double kInf = std::numeric_limits<double>::infinity();

    if (rf.kind() == RateFunction::Kind::Piecewise) {
        const auto& breaks = rf.breakpoints();
        const auto& values = rf.values();
        double s = t;
        std::size_t piece = static_cast<std::size_t>(
            std::upper_bound(breaks.begin(), breaks.end(), s) - breaks.begin());
        while (true) {
            const double bound = values[piece];
            const double piece_end = piece < breaks.size() ? breaks[piece] : kInf;
            if (bound <= 0.0) {
                if (piece_end == kInf) return kInf;
                s = piece_end;
                ++piece;
                continue;
            }
            // homogeneous within a piece: direct sampling, no rejection
            const double cand = s + rng.exponential(bound);
            if (cand < piece_end) return cand;
            if (piece_end == kInf) return cand;
            s = piece_end;
            ++piece;
        }
    }

    const double bound = rf.upper_bound(t, t);  // global majorant for these variants
    if (bound <= 0.0) return kInf;
    double s = t;
    while (true) {
        s += rng.exponential(bound);
        if (rng.uniform() * bound < rf.eval(s)) return s;
    }
}

struct PathObservation {
    int queue = 0;
    bool busy = false;
};

/// Single replication of the queue dynamics. Service starts once at least k
/// customers wait and takes min(queue, B) of them; customers left behind by
/// a completion keep waiting until the threshold is reached again. Only
/// waiting customers count toward the queue; the batch in service does not.
inline std::vector<PathObservation> simulate_path(const QueueConfig& q, const RateFunction& rf,
                                                  double horizon,
                                                  const std::vector<double>& checkpoints,
                                                  std::uint64_t seed) {
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (!(checkpoints[i] >= 0.0) || checkpoints[i] > horizon ||
            (i > 0 && checkpoints[i] < checkpoints[i - 1])) {
            throw std::invalid_argument("simulate_path: checkpoints must ascend within [0, horizon]");
        }
    }
    constexpr double kInf = std::numeric_limits<double>::infinity();
    Rng rng(seed);

    std::vector<PathObservation> out;
    out.reserve(checkpoints.size());
    int queue = 0;
    bool busy = false;
    double completion = kInf;
    double arrival = next_arrival(rf, 0.0, rng);
    std::size_t cp = 0;

    while (cp < checkpoints.size()) {
        const double next_event = std::min(arrival, completion);
        while (cp < checkpoints.size() && checkpoints[cp] < next_event) {
            out.push_back({queue, busy});
            ++cp;
        }
        if (cp >= checkpoints.size() || next_event > horizon) {
            while (cp < checkpoints.size()) {
                out.push_back({queue, busy});
                ++cp;
            }
            break;
        }
        if (arrival <= completion) {  // arrival first on floating-point ties
            const double now = arrival;
            ++queue;
            if (!busy && queue >= q.k) {
                queue -= std::min(queue, q.B);
                busy = true;
                completion = now + rng.exponential(q.mu);
            }
            arrival = next_arrival(rf, now, rng);
        } else {
            const double now = completion;
            if (queue >= q.k) {
                queue -= std::min(queue, q.B);
                completion = now + rng.exponential(q.mu);
            } else {
                busy = false;
                completion = kInf;
            }
        }
    }
    return out;
}

/// Empirical state probabilities with binomial standard errors. Busy queue
/// lengths at or above `levels` are folded into the top recorded bucket.
struct SimEstimate {
    std::vector<double> checkpoints;
    int k = 0;
    int levels = 0;
    std::vector<std::vector<long>> counts;        // per checkpoint, idle states then busy
    std::vector<std::vector<double>> idle_prob;   // per checkpoint, length k
    std::vector<std::vector<double>> idle_se;
    std::vector<std::vector<double>> queue_prob;  // per checkpoint, length levels
    std::vector<std::vector<double>> queue_se;
    long n_reps = 0;
    std::uint64_t seed = 0;
};

/// Runs independent replications with counter-derived seeds and reduces the
/// observation counts. The result depends only on the inputs, not on the
/// number of worker threads.
inline SimEstimate estimate(const QueueConfig& q, const RateFunction& rf,
                            const std::vector<double>& checkpoints, int levels, long n_reps,
                            std::uint64_t master_seed, int threads = 1) {
    if (n_reps < 1) throw std::invalid_argument("estimate: n_reps must be at least 1");
    if (levels < 1) throw std::invalid_argument("estimate: levels must be at least 1");
    if (checkpoints.empty()) throw std::invalid_argument("estimate: checkpoints must be nonempty");
    const double horizon = checkpoints.back();
    const int n_cp = static_cast<int>(checkpoints.size());
    const int n_states = q.k + levels;

    std::vector<std::vector<long>> counts;  // [checkpoint][state]
    const int n_threads = std::max(1, static_cast<int>(std::min<long>(threads, n_reps)));
    std::vector<std::vector<std::vector<long>>> partial(
        static_cast<std::size_t>(n_threads),
        std::vector<std::vector<long>>(static_cast<std::size_t>(n_cp),
                                       std::vector<long>(static_cast<std::size_t>(n_states), 0)));

    auto worker = [&](int tid, long lo, long hi) {
        auto& local = partial[static_cast<std::size_t>(tid)];
        for (long rep = lo; rep < hi; ++rep) {
            const auto path = simulate_path(q, rf, horizon, checkpoints,
                                            derive_seed(master_seed, static_cast<std::uint64_t>(rep)));
            for (int c = 0; c < n_cp; ++c) {
                const PathObservation& ob = path[static_cast<std::size_t>(c)];
                const int bucket = ob.busy ? q.k + std::min(ob.queue, levels - 1) : ob.queue;
                ++local[static_cast<std::size_t>(c)][static_cast<std::size_t>(bucket)];
            }
        }
    };

    if (n_threads == 1) {
        worker(0, 0, n_reps);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (n_reps + n_threads - 1) / n_threads;
        for (int tid = 0; tid < n_threads; ++tid) {
            const long lo = tid * chunk;
            const long hi = std::min<long>(n_reps, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(worker, tid, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    counts.assign(static_cast<std::size_t>(n_cp),
                  std::vector<long>(static_cast<std::size_t>(n_states), 0));
    for (const auto& local : partial) {
        for (int c = 0; c < n_cp; ++c) {
            for (int s = 0; s < n_states; ++s) {
                counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)] +=
                    local[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)];
            }
        }
    }

    SimEstimate est;
    est.checkpoints = checkpoints;
    est.k = q.k;
    est.levels = levels;
    est.n_reps = n_reps;
    est.seed = master_seed;
    est.counts = counts;
    const double n = static_cast<double>(n_reps);
    for (int c = 0; c < n_cp; ++c) {
        std::vector<double> ip, is, qp, qs;
        for (int r = 0; r < q.k; ++r) {
            const double p = static_cast<double>(counts[static_cast<std::size_t>(c)]
                                                       [static_cast<std::size_t>(r)]) / n;
            ip.push_back(p);
            is.push_back(std::sqrt(p * (1.0 - p) / n));
        }
        for (int s = 0; s < levels; ++s) {
            const double p = static_cast<double>(counts[static_cast<std::size_t>(c)]
                                                       [static_cast<std::size_t>(q.k + s)]) / n;
            qp.push_back(p);
            qs.push_back(std::sqrt(p * (1.0 - p) / n));
        }
        est.idle_prob.push_back(std::move(ip));
        est.idle_se.push_back(std::move(is));
        est.queue_prob.push_back(std::move(qp));
        est.queue_se.push_back(std::move(qs));
    }
    return est;
}

}  // namespace bulkq
