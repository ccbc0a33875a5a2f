#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bulkq {

/// Model parameters of the bulk queue: service starts once at least k
/// customers wait, at most B are served per batch, service is exponential
/// with rate mu.
struct QueueConfig {
    int k;
    int B;
    double mu;

    QueueConfig(int k_, int B_, double mu_) : k(k_), B(B_), mu(mu_) {
        if (k < 1) throw std::invalid_argument("QueueConfig: k must be at least 1");
        if (B < k) throw std::invalid_argument("QueueConfig: k must not exceed B");
        if (!(mu > 0.0)) throw std::invalid_argument("QueueConfig: mu must be positive");
    }
};

/// Truncated, discretized realization of the busy part of the state space:
/// `levels` queue-length levels, each carrying `cells` age cells of width dx
/// on [0, x_max]. The time step equals dx so transport along characteristics
/// is an exact one-cell shift.
struct GridConfig {
    int levels;    // queue-length truncation N
    double x_max;  // age horizon
    int cells;     // age cells M
    double dx;
    double dt;

    GridConfig(int levels_, double x_max_, int cells_)
        : levels(levels_), x_max(x_max_), cells(cells_) {
        if (levels < 1) throw std::invalid_argument("GridConfig: levels must be at least 1");
        if (cells < 2) throw std::invalid_argument("GridConfig: cells must be at least 2");
        if (!(x_max > 0.0)) throw std::invalid_argument("GridConfig: x_max must be positive");
        dx = x_max / cells;
        dt = dx;
    }

    /// Default grid: age horizon 25/mu resolved at dx = dt = 1e-3, and
    /// enough levels that truncation mass is negligible at desk scales.
    static GridConfig defaults(const QueueConfig& q) {
        const double x_max = 25.0 / q.mu;
        const int cells = static_cast<int>(std::lround(x_max / 1e-3));
        const int levels = std::max(5 * q.B, 40);
        return GridConfig(levels, x_max, cells);
    }

    double midpoint(int j) const { return (j + 0.5) * dx; }
};

inline void require_compatible(const QueueConfig& q, const GridConfig& g) {
    if (g.levels < q.B + 1) {
        throw std::invalid_argument("GridConfig: levels must be at least B + 1");
    }
}

/// Truncated state: k idle probabilities plus a levels x cells matrix of busy
/// densities sampled at cell midpoints. `lost_mass` accumulates probability
/// discarded at the truncation boundaries so conservation stays observable.
struct StateVector {
    std::vector<double> idle;
    int levels = 0;
    int cells = 0;
    std::vector<double> busy;  // level-major, busy[n*cells + j] ~ p_{n,1}(x_j)
    double lost_mass = 0.0;

    StateVector() = default;
    StateVector(int k, int levels_, int cells_)
        : idle(static_cast<std::size_t>(k), 0.0),
          levels(levels_),
          cells(cells_),
          busy(static_cast<std::size_t>(levels_) * static_cast<std::size_t>(cells_), 0.0) {}

    double& at(int n, int j) { return busy[static_cast<std::size_t>(n) * cells + j]; }
    double at(int n, int j) const { return busy[static_cast<std::size_t>(n) * cells + j]; }

    /// All mass on the empty-idle state, busy grid empty.
    static StateVector initial(const QueueConfig& q, const GridConfig& g) {
        StateVector s(q.k, g.levels, g.cells);
        s.idle[0] = 1.0;
        return s;
    }

    static StateVector zero(const QueueConfig& q, const GridConfig& g) {
        return StateVector(q.k, g.levels, g.cells);
    }
};

inline void check_shapes(const StateVector& s, const QueueConfig& q, const GridConfig& g) {
    if (static_cast<int>(s.idle.size()) != q.k || s.levels != g.levels || s.cells != g.cells ||
        s.busy.size() != static_cast<std::size_t>(g.levels) * static_cast<std::size_t>(g.cells)) {
        throw std::invalid_argument("StateVector: shape mismatch against configuration");
    }
}

/// Sum of idle probabilities plus the midpoint quadrature of all busy levels.
inline double total_mass(const StateVector& s, const QueueConfig& q, const GridConfig& g) {
    check_shapes(s, q, g);
    double acc = 0.0;
    for (double v : s.idle) acc += v;
    double busy_acc = 0.0;
    for (double v : s.busy) busy_acc += v;
    return acc + busy_acc * g.dx;
}

/// Discretized C^k x l1(L1) norm: absolute idle entries plus the quadrature
/// of absolute busy densities.
inline double x_norm(const StateVector& s, const QueueConfig& q, const GridConfig& g) {
    check_shapes(s, q, g);
    double acc = 0.0;
    for (double v : s.idle) acc += std::abs(v);
    double busy_acc = 0.0;
    for (double v : s.busy) busy_acc += std::abs(v);
    return acc + busy_acc * g.dx;
}

struct Marginals {
    std::vector<double> idle;   // copied through
    std::vector<double> queue;  // per-level mass, Q[n] = integral of level n
};

inline Marginals marginals(const StateVector& s, const QueueConfig& q, const GridConfig& g) {
    check_shapes(s, q, g);
    Marginals m;
    m.idle = s.idle;
    m.queue.assign(static_cast<std::size_t>(g.levels), 0.0);
    for (int n = 0; n < g.levels; ++n) {
        double acc = 0.0;
        const double* row = s.busy.data() + static_cast<std::size_t>(n) * g.cells;
        for (int j = 0; j < g.cells; ++j) acc += row[j];
        m.queue[static_cast<std::size_t>(n)] = acc * g.dx;
    }
    return m;
}

}  // namespace bulkq
