#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "bulkq/dessim.hpp"
#include "bulkq/model.hpp"
#include "bulkq/spectral.hpp"
#include "bulkq/transient.hpp"

namespace bulkq {

/// Shortest round-tripping decimal representation, so artifacts are
/// byte-stable across runs.
inline std::string csv_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char probe[32];
            std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
            std::sscanf(probe, "%lf", &back);
            if (back == v) return probe;
        }
    }
    return buf;
}

/// Trajectory rows: t, idle levels, per-level queue masses, then the mass
/// accounting columns.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t";
    for (int r = 0; r < traj.queue.k; ++r) os << ",idle_" << r;
    for (int n = 0; n < traj.grid.levels; ++n) os << ",Q_" << n;
    os << ",total_mass,lost_mass\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const StateVector& s = traj.states[i];
        const Marginals m = marginals(s, traj.queue, traj.grid);
        os << csv_num(traj.times[i]);
        for (double v : m.idle) os << ',' << csv_num(v);
        for (double v : m.queue) os << ',' << csv_num(v);
        os << ',' << csv_num(total_mass(s, traj.queue, traj.grid)) << ','
           << csv_num(s.lost_mass) << '\n';
    }
}

/// Estimate rows: one line per checkpoint and state label.
inline void write_estimate_csv(std::ostream& os, const SimEstimate& est) {
    os << "t,state_label,probability,std_error\n";
    for (std::size_t c = 0; c < est.checkpoints.size(); ++c) {
        for (int r = 0; r < est.k; ++r) {
            os << csv_num(est.checkpoints[c]) << ",idle_" << r << ','
               << csv_num(est.idle_prob[c][static_cast<std::size_t>(r)]) << ','
               << csv_num(est.idle_se[c][static_cast<std::size_t>(r)]) << '\n';
        }
        for (int n = 0; n < est.levels; ++n) {
            os << csv_num(est.checkpoints[c]) << ",busy_" << n << ','
               << csv_num(est.queue_prob[c][static_cast<std::size_t>(n)]) << ','
               << csv_num(est.queue_se[c][static_cast<std::size_t>(n)]) << '\n';
        }
    }
}

/// Closed-form comparison rows as produced by the Dirichlet verification.
inline void write_report_csv(std::ostream& os, const std::vector<ClosedFormRow>& rows) {
    os << "object,index,printed_value_re,printed_value_im,derived_value_re,derived_value_im,abs_dev,rel_dev\n";
    for (const ClosedFormRow& r : rows) {
        os << r.object << ',' << r.index << ',' << csv_num(r.printed.real()) << ','
           << csv_num(r.printed.imag()) << ',' << csv_num(r.derived.real()) << ','
           << csv_num(r.derived.imag()) << ',' << csv_num(r.abs_dev) << ','
           << csv_num(r.rel_dev) << '\n';
    }
}

struct ResidualRow {
    std::complex<double> gamma;
    double semi_analytic;
    double discrete;
};

inline void write_residual_csv(std::ostream& os, const std::vector<ResidualRow>& rows) {
    os << "gamma_re,gamma_im,residual_semi_analytic,residual_discrete\n";
    for (const ResidualRow& r : rows) {
        os << csv_num(r.gamma.real()) << ',' << csv_num(r.gamma.imag()) << ','
           << csv_num(r.semi_analytic) << ',' << csv_num(r.discrete) << '\n';
    }
}

struct IndicatorRow {
    std::complex<double> gamma;
    double indicator;
};

inline void write_indicator_csv(std::ostream& os, const std::vector<IndicatorRow>& rows) {
    os << "gamma_re,gamma_im,indicator\n";
    for (const IndicatorRow& r : rows) {
        os << csv_num(r.gamma.real()) << ',' << csv_num(r.gamma.imag()) << ','
           << csv_num(r.indicator) << '\n';
    }
}

}  // namespace bulkq
