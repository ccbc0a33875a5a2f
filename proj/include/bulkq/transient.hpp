#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "bulkq/model.hpp"
#include "bulkq/rates.hpp"

namespace bulkq {

namespace detail {

/// Per-step event fractions for a frozen mid-step rate. Splitting the
/// non-survival mass proportionally between arrival and service keeps every
/// outflow matched by an inflow, so the step conserves mass to round-off.
struct StepFactors {
    double busy_survive;  // exp(-(lambda+mu) dt)
    double to_next_level; // arrival share of the event mass
    double to_service;    // service share of the event mass
    double idle_survive;  // exp(-lambda dt)
    double idle_leave;    // 1 - exp(-lambda dt)

    StepFactors(double lambda, double mu, double dt) {
        const double total = lambda + mu;
        busy_survive = std::exp(-total * dt);
        const double event = -std::expm1(-total * dt);
        to_next_level = total > 0.0 ? lambda / total * event : 0.0;
        to_service = total > 0.0 ? mu / total * event : 0.0;
        idle_survive = std::exp(-lambda * dt);
        idle_leave = -std::expm1(-lambda * dt);
    }
};

/// One step of the transport scheme, writing into `out` (distinct storage).
/// `level_mass` must hold the pre-step per-level masses and is updated to the
/// post-step masses.
inline void step_into(const StateVector& in, StateVector& out, std::vector<double>& level_mass,
                      double t, const QueueConfig& q, const GridConfig& g,
                      const RateFunction& rf) {
    const int N = g.levels;
    const int M = g.cells;
    const double dx = g.dx;
    const double lambda = rf.eval(t + 0.5 * g.dt);
    const StepFactors f(lambda, q.mu, g.dt);

    // Boundary inflow masses from the pre-step state: completed batches
    // restart at age zero on the level B below, pooled over levels k..B into
    // level 0 together with the threshold crossing from the last idle level.
    std::vector<double> inflow(static_cast<std::size_t>(N), 0.0);
    {
        double head = f.idle_leave * in.idle[static_cast<std::size_t>(q.k - 1)];
        for (int i = q.k; i <= q.B && i < N; ++i) {
            head += f.to_service * level_mass[static_cast<std::size_t>(i)];
        }
        inflow[0] = head;
        for (int n = 1; n < N; ++n) {
            if (n + q.B < N) {
                inflow[static_cast<std::size_t>(n)] =
                    f.to_service * level_mass[static_cast<std::size_t>(n + q.B)];
            }
        }
    }

    // Truncation losses: survival and arrival portions shifted past x_max,
    // plus the arrival portion leaving the top level.
    double lost = 0.0;
    for (int n = 0; n < N; ++n) {
        const double edge = in.at(n, M - 1);
        lost += f.busy_survive * edge * dx;
        lost += f.to_next_level * edge * dx;  // target cell or level is off-grid either way
    }
    for (int j = 0; j + 1 < M; ++j) {
        lost += f.to_next_level * in.at(N - 1, j) * dx;
    }

    // Idle levels: exponential survival, cascade to the next idle level, and
    // service completions from busy levels below k.
    {
        std::vector<double> next(static_cast<std::size_t>(q.k), 0.0);
        for (int r = 0; r < q.k; ++r) {
            double v = f.idle_survive * in.idle[static_cast<std::size_t>(r)];
            if (r > 0) v += f.idle_leave * in.idle[static_cast<std::size_t>(r - 1)];
            if (r < N) v += f.to_service * level_mass[static_cast<std::size_t>(r)];
            next[static_cast<std::size_t>(r)] = v;
        }
        out.idle = std::move(next);
    }

    // Busy grid: exact one-cell shift with decay, plus the arrival coupling
    // from the level below. Fresh level masses are accumulated on the fly.
    out.levels = N;
    out.cells = M;
    out.busy.resize(static_cast<std::size_t>(N) * static_cast<std::size_t>(M));
    double min_density = 0.0;
    for (int n = 0; n < N; ++n) {
        const double* src = in.busy.data() + static_cast<std::size_t>(n) * M;
        const double* below = n > 0 ? in.busy.data() + static_cast<std::size_t>(n - 1) * M : nullptr;
        double* dst = out.busy.data() + static_cast<std::size_t>(n) * M;
        double mass = dst[0] = inflow[static_cast<std::size_t>(n)] / dx;
        if (below) {
            for (int j = 1; j < M; ++j) {
                const double v = f.busy_survive * src[j - 1] + f.to_next_level * below[j - 1];
                dst[j] = v;
                mass += v;
            }
        } else {
            for (int j = 1; j < M; ++j) {
                const double v = f.busy_survive * src[j - 1];
                dst[j] = v;
                mass += v;
            }
        }
        level_mass[static_cast<std::size_t>(n)] = mass * dx;
        min_density = std::min(min_density, *std::min_element(dst, dst + M));
    }

    out.lost_mass = in.lost_mass + lost;
    if (min_density < -1e-9) {
        throw std::runtime_error("step: negative density of " + std::to_string(min_density) +
                                 " indicates scheme instability");
    }
}

inline std::vector<double> level_masses(const StateVector& s, const GridConfig& g) {
    std::vector<double> m(static_cast<std::size_t>(g.levels), 0.0);
    for (int n = 0; n < g.levels; ++n) {
        double acc = 0.0;
        const double* row = s.busy.data() + static_cast<std::size_t>(n) * g.cells;
        for (int j = 0; j < g.cells; ++j) acc += row[j];
        m[static_cast<std::size_t>(n)] = acc * g.dx;
    }
    return m;
}

}  // namespace detail

/// Advances the state by one time step dt = dx.
inline StateVector step(const StateVector& s, double t, const QueueConfig& q, const GridConfig& g,
                        const RateFunction& rf) {
    check_shapes(s, q, g);
    require_compatible(q, g);
    if (!(t >= 0.0)) throw std::invalid_argument("step: t must be nonnegative");
    StateVector out(q.k, g.levels, g.cells);
    std::vector<double> masses = detail::level_masses(s, g);
    detail::step_into(s, out, masses, t, q, g, rf);
    return out;
}

struct Trajectory {
    std::vector<double> times;
    std::vector<StateVector> states;
    QueueConfig queue;
    GridConfig grid;
    std::string rate_descriptor;
};

using ProgressHook = std::function<void(std::size_t checkpoint_index)>;

/// Integrates the state equations from the initial condition (all mass on the
/// empty-idle state) up to `horizon`, recording the state at each checkpoint.
/// Checkpoints must be multiples of dt inside [0, horizon].
inline Trajectory solve(const QueueConfig& q, const GridConfig& g, const RateFunction& rf,
                        double horizon, const std::vector<double>& checkpoints,
                        const ProgressHook& progress = {}) {
    require_compatible(q, g);
    if (!(horizon >= 0.0)) throw std::invalid_argument("solve: horizon must be nonnegative");
    const double steps_real = horizon / g.dt;
    if (steps_real > 2e9) throw std::invalid_argument("solve: horizon/dt exceeds the step guard");
    const long n_steps = std::lround(steps_real);
    if (std::abs(n_steps * g.dt - horizon) > 1e-9 * std::max(1.0, horizon)) {
        throw std::invalid_argument("solve: horizon must be a multiple of dt");
    }

    std::vector<long> cp_steps;
    cp_steps.reserve(checkpoints.size());
    for (double c : checkpoints) {
        if (!(c >= 0.0) || c > horizon + 1e-12) {
            throw std::invalid_argument("solve: checkpoints must lie in [0, horizon]");
        }
        const long idx = std::lround(c / g.dt);
        if (std::abs(idx * g.dt - c) > 1e-9 * std::max(1.0, c)) {
            throw std::invalid_argument("solve: checkpoints must be multiples of dt");
        }
        cp_steps.push_back(idx);
    }
    if (!std::is_sorted(cp_steps.begin(), cp_steps.end())) {
        throw std::invalid_argument("solve: checkpoints must be ascending");
    }

    Trajectory traj{{}, {}, q, g, rf.describe()};
    StateVector cur = StateVector::initial(q, g);
    StateVector buf = StateVector::zero(q, g);
    std::vector<double> masses = detail::level_masses(cur, g);

    std::size_t cp = 0;
    auto record_due = [&](long step_idx) {
        while (cp < cp_steps.size() && cp_steps[cp] == step_idx) {
            traj.times.push_back(static_cast<double>(step_idx) * g.dt);
            traj.states.push_back(cur);
            if (progress) progress(cp);
            ++cp;
        }
    };
    record_due(0);
    for (long i = 0; i < n_steps; ++i) {
        detail::step_into(cur, buf, masses, static_cast<double>(i) * g.dt, q, g, rf);
        std::swap(cur, buf);
        record_due(i + 1);
    }
    return traj;
}

/// Transient distribution of the constant-rate Markov chain on the states
/// (r idle, r < k) and (n busy, n < levels), computed with the Poisson-
/// weighted power series of the uniformized chain, truncated once the
/// remaining Poisson tail mass drops below `tol`. Exponential service makes
/// this chain exact for constant arrival rates, so it serves as an
/// independent oracle for the transport solver.
inline Marginals uniformization(const QueueConfig& q, double lambda, int levels, double t,
                                double tol) {
    if (!std::isfinite(lambda) || !std::isfinite(t) || !(lambda >= 0.0) || !(t >= 0.0)) {
        throw std::invalid_argument("uniformization: lambda and t must be finite and nonnegative");
    }
    if (levels < q.B + 1) throw std::invalid_argument("uniformization: levels must be at least B + 1");
    if (!(tol > 0.0)) throw std::invalid_argument("uniformization: tol must be positive");

    const int dim = q.k + levels;
    std::vector<double> p(static_cast<std::size_t>(dim), 0.0);
    p[0] = 1.0;

    const double rate = lambda + q.mu;  // uniform exit-rate bound
    const double theta = rate * t;
    if (theta > 0.0) {
        // One step of the uniformized discrete chain: v <- v P with
        // P = I + Q/rate.
        auto dtmc_step = [&](const std::vector<double>& v, std::vector<double>& nv) {
            std::fill(nv.begin(), nv.end(), 0.0);
            for (int r = 0; r < q.k; ++r) {
                const double m = v[static_cast<std::size_t>(r)];
                if (m == 0.0) continue;
                const double go = lambda / rate;
                nv[static_cast<std::size_t>(r)] += m * (1.0 - go);
                if (r + 1 < q.k) {
                    nv[static_cast<std::size_t>(r + 1)] += m * go;
                } else {
                    nv[static_cast<std::size_t>(q.k)] += m * go;  // (k-1,0) -> (0,1)
                }
            }
            for (int n = 0; n < levels; ++n) {
                const double m = v[static_cast<std::size_t>(q.k + n)];
                if (m == 0.0) continue;
                double stay = 1.0;
                if (lambda > 0.0 && n + 1 < levels) {
                    const double go = lambda / rate;
                    nv[static_cast<std::size_t>(q.k + n + 1)] += m * go;
                    stay -= go;
                }
                const double serve = q.mu / rate;
                stay -= serve;
                if (n < q.k) {
                    nv[static_cast<std::size_t>(n)] += m * serve;
                } else if (n <= q.B) {
                    nv[static_cast<std::size_t>(q.k)] += m * serve;
                } else {
                    nv[static_cast<std::size_t>(q.k + n - q.B)] += m * serve;
                }
                nv[static_cast<std::size_t>(q.k + n)] += m * stay;
            }
        };

        std::vector<double> v = p;
        std::vector<double> nv(v.size());
        std::vector<double> acc(v.size(), 0.0);
        double weight = std::exp(-theta);  // Poisson(theta) pmf at 0
        double cum = weight;
        for (std::size_t i = 0; i < v.size(); ++i) acc[i] = weight * v[i];
        const long hard_cap = static_cast<long>(theta + 60.0 * std::sqrt(theta + 1.0) + 200.0);
        for (long m = 1; cum < 1.0 - tol && m <= hard_cap; ++m) {
            dtmc_step(v, nv);
            std::swap(v, nv);
            weight *= theta / static_cast<double>(m);
            cum += weight;
            for (std::size_t i = 0; i < v.size(); ++i) acc[i] += weight * v[i];
        }
        p = std::move(acc);
    }

    Marginals out;
    out.idle.assign(p.begin(), p.begin() + q.k);
    out.queue.assign(p.begin() + q.k, p.end());
    return out;
}

}  // namespace bulkq
