#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "bulkq/model.hpp"

namespace bulkq {

/// Flattened ordering of the truncated state: idle levels first, then the
/// busy grid level-major.
inline int flat_index_idle(int r) { return r; }
inline int flat_index_busy(const QueueConfig& q, const GridConfig& g, int n, int j) {
    return q.k + n * g.cells + j;
}
inline int flat_dim(const QueueConfig& q, const GridConfig& g) {
    return q.k + g.levels * g.cells;
}

inline Eigen::VectorXd flatten(const StateVector& s, const QueueConfig& q, const GridConfig& g) {
    check_shapes(s, q, g);
    Eigen::VectorXd v(flat_dim(q, g));
    for (int r = 0; r < q.k; ++r) v[r] = s.idle[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < s.busy.size(); ++i) v[q.k + static_cast<Eigen::Index>(i)] = s.busy[i];
    return v;
}

/// Truncated matrix realizations of the system operator and its boundary
/// operators. `A_m` is the maximal operator without boundary coupling (the
/// j = 0 cells receive no inflow); `L_trace` extracts the x = 0 value of each
/// busy level (first-cell value); `Phi` expresses the physical boundary
/// inflow in terms of the interior state.
struct OperatorAssembly {
    Eigen::SparseMatrix<double> A_m;      // dim x dim
    Eigen::SparseMatrix<double> L_trace;  // levels x dim
    Eigen::SparseMatrix<double> Phi;      // levels x dim
    int k = 0;
    int levels = 0;
    int cells = 0;
    double dx = 0.0;
    double lambda = 0.0;
    double mu = 0.0;
};

/// Assembles the block operator for a frozen arrival rate. Block layout:
/// idle-idle is lower bidiagonal (-lambda diagonal, +lambda subdiagonal),
/// idle-busy couples idle level r to the quadrature of busy level r with
/// weight mu, busy-busy has the upwind transport-decay operator on the
/// diagonal and +lambda on the level subdiagonal.
inline OperatorAssembly assemble(const QueueConfig& q, const GridConfig& g, double lambda,
                                 std::size_t dim_cap = 2'000'000) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("assemble: lambda must be nonnegative");
    require_compatible(q, g);
    const std::size_t dim = static_cast<std::size_t>(q.k) +
                            static_cast<std::size_t>(g.levels) * static_cast<std::size_t>(g.cells);
    if (dim > dim_cap) {
        throw std::invalid_argument("assemble: flattened dimension exceeds the configured cap");
    }

    const int n_dim = static_cast<int>(dim);
    const double dx = g.dx;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(dim * 4);

    // idle-idle block
    for (int r = 0; r < q.k; ++r) {
        trips.emplace_back(r, r, -lambda);
        if (r + 1 < q.k) trips.emplace_back(r + 1, r, lambda);
    }
    // idle-busy block: mu times the quadrature row of busy level r
    for (int r = 0; r < q.k; ++r) {
        for (int j = 0; j < g.cells; ++j) {
            trips.emplace_back(r, flat_index_busy(q, g, r, j), q.mu * dx);
        }
    }
    // busy-busy block: upwind transport with decay, +lambda from the level below
    for (int n = 0; n < g.levels; ++n) {
        for (int j = 0; j < g.cells; ++j) {
            const int idx = flat_index_busy(q, g, n, j);
            trips.emplace_back(idx, idx, -1.0 / dx - (lambda + q.mu));
            if (j > 0) trips.emplace_back(idx, flat_index_busy(q, g, n, j - 1), 1.0 / dx);
            if (n > 0) trips.emplace_back(idx, flat_index_busy(q, g, n - 1, j), lambda);
        }
    }

    OperatorAssembly out;
    out.A_m.resize(n_dim, n_dim);
    out.A_m.setFromTriplets(trips.begin(), trips.end());

    std::vector<Eigen::Triplet<double>> trace_trips;
    trace_trips.reserve(static_cast<std::size_t>(g.levels));
    for (int n = 0; n < g.levels; ++n) {
        trace_trips.emplace_back(n, flat_index_busy(q, g, n, 0), 1.0);
    }
    out.L_trace.resize(g.levels, n_dim);
    out.L_trace.setFromTriplets(trace_trips.begin(), trace_trips.end());

    std::vector<Eigen::Triplet<double>> phi_trips;
    phi_trips.emplace_back(0, flat_index_idle(q.k - 1), lambda);
    for (int i = q.k; i <= q.B && i < g.levels; ++i) {
        for (int j = 0; j < g.cells; ++j) {
            phi_trips.emplace_back(0, flat_index_busy(q, g, i, j), q.mu * dx);
        }
    }
    for (int n = 1; n < g.levels; ++n) {
        if (n + q.B >= g.levels) continue;  // inflow source outside truncation
        for (int j = 0; j < g.cells; ++j) {
            phi_trips.emplace_back(n, flat_index_busy(q, g, n + q.B, j), q.mu * dx);
        }
    }
    out.Phi.resize(g.levels, n_dim);
    out.Phi.setFromTriplets(phi_trips.begin(), phi_trips.end());

    out.k = q.k;
    out.levels = g.levels;
    out.cells = g.cells;
    out.dx = dx;
    out.lambda = lambda;
    out.mu = q.mu;
    return out;
}

/// Boundary inflow rates applied directly to a state: entry 0 is mu times
/// the total mass of levels k..B plus lambda times the last idle
/// probability; entry n is mu times the mass of level n + B.
inline std::vector<double> apply_phi(const QueueConfig& q, const GridConfig& g, double lambda,
                                     const StateVector& s) {
    check_shapes(s, q, g);
    const Marginals m = marginals(s, q, g);
    std::vector<double> out(static_cast<std::size_t>(g.levels), 0.0);
    double head = lambda * s.idle[static_cast<std::size_t>(q.k - 1)];
    for (int i = q.k; i <= q.B && i < g.levels; ++i) {
        head += q.mu * m.queue[static_cast<std::size_t>(i)];
    }
    out[0] = head;
    for (int n = 1; n < g.levels; ++n) {
        if (n + q.B < g.levels) {
            out[static_cast<std::size_t>(n)] = q.mu * m.queue[static_cast<std::size_t>(n + q.B)];
        }
    }
    return out;
}

/// x = 0 values of each busy level, realized as the first-cell value.
inline std::vector<double> boundary_trace(const StateVector& s, const GridConfig& g) {
    if (s.levels != g.levels || s.cells != g.cells) {
        throw std::invalid_argument("boundary_trace: shape mismatch");
    }
    std::vector<double> out(static_cast<std::size_t>(g.levels));
    for (int n = 0; n < g.levels; ++n) out[static_cast<std::size_t>(n)] = s.at(n, 0);
    return out;
}

/// Maximal operator with the boundary inflow folded in: each level's j = 0
/// cell receives Phi row n scaled by 1/dx. Columns of the result conserve
/// mass (quadrature-weighted column sums vanish) except at the truncation
/// boundaries.
inline Eigen::SparseMatrix<double> closed_generator(const OperatorAssembly& a) {
    Eigen::SparseMatrix<double> inflow(a.A_m.rows(), a.A_m.cols());
    std::vector<Eigen::Triplet<double>> trips;
    for (int outer = 0; outer < a.Phi.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(a.Phi, outer); it; ++it) {
            const int n = static_cast<int>(it.row());
            const int target = a.k + n * a.cells;  // cell (n, 0)
            trips.emplace_back(target, static_cast<int>(it.col()), it.value() / a.dx);
        }
    }
    inflow.setFromTriplets(trips.begin(), trips.end());
    return a.A_m + inflow;
}

/// Quadrature weights of the mass functional on the flattened state: 1 for
/// idle entries, dx for busy cells.
inline Eigen::VectorXd mass_weights(const OperatorAssembly& a) {
    Eigen::VectorXd w(a.A_m.rows());
    for (int r = 0; r < a.k; ++r) w[r] = 1.0;
    for (Eigen::Index i = a.k; i < w.size(); ++i) w[i] = a.dx;
    return w;
}

/// Sparse triplet dump (row, col, value), one entry per line.
inline void write_triplets(std::ostream& os, const Eigen::SparseMatrix<double>& m) {
    os.precision(17);
    for (int col = 0; col < m.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, col); it; ++it) {
            os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
        }
    }
}

}  // namespace bulkq
