#pragma once

#include <cctype>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bulkq/model.hpp"
#include "bulkq/rates.hpp"

namespace bulkq {

/// Configuration error with the offending line number baked into the message.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
    ConfigError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg) {}
};

struct SpectralBlock {
    std::vector<std::complex<double>> gammas;
    bool has_sweep = false;
    double sweep_start = 0.0;
    double sweep_stop = 0.0;
    int sweep_count = 0;
    int n_boundary = 10;
    std::optional<double> frozen_lambda;  // defaults to the rate if constant

    friend bool operator==(const SpectralBlock& a, const SpectralBlock& b) {
        return a.gammas == b.gammas && a.has_sweep == b.has_sweep &&
               a.sweep_start == b.sweep_start && a.sweep_stop == b.sweep_stop &&
               a.sweep_count == b.sweep_count && a.n_boundary == b.n_boundary &&
               a.frozen_lambda == b.frozen_lambda;
    }
};

struct SimBlock {
    long n_reps = 100000;
    std::uint64_t seed = 1;

    friend bool operator==(const SimBlock& a, const SimBlock& b) {
        return a.n_reps == b.n_reps && a.seed == b.seed;
    }
};

/// A fully resolved run description: queue and grid parameters, the arrival
/// rate, the time window, and the optional spectral and simulation blocks.
struct Scenario {
    QueueConfig queue{1, 1, 1.0};
    RateFunction rate = RateFunction::constant(1.0);
    GridConfig grid{40, 25.0, 25000};
    double horizon = 0.0;
    std::vector<double> checkpoints;
    bool has_spectral = false;
    SpectralBlock spectral;
    SimBlock sim;
    std::string out_dir;  // empty means caller decides

    friend bool operator==(const Scenario& a, const Scenario& b) {
        return a.queue.k == b.queue.k && a.queue.B == b.queue.B && a.queue.mu == b.queue.mu &&
               a.rate == b.rate && a.grid.levels == b.grid.levels &&
               a.grid.x_max == b.grid.x_max && a.grid.cells == b.grid.cells &&
               a.horizon == b.horizon && a.checkpoints == b.checkpoints &&
               a.has_spectral == b.has_spectral && a.spectral == b.spectral && a.sim == b.sim &&
               a.out_dir == b.out_dir;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double parse_double(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, "malformed number '" + s + "'");
    }
}

inline long parse_long(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(line, "malformed integer '" + s + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError(line, "malformed unsigned integer '" + s + "'");
    }
}

inline std::vector<double> parse_double_list(const std::string& s, int line) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item, line));
    }
    return out;
}

struct RawEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

using RawSection = std::map<std::string, RawEntry>;

}  // namespace detail

/// Parses the line-oriented section/key=value scenario format. Unknown
/// sections or keys are errors; every message carries the line number.
inline Scenario parse_config(const std::string& text) {
    using detail::RawEntry;
    using detail::RawSection;
    std::map<std::string, RawSection> sections;
    std::map<std::string, int> section_lines;

    std::istringstream in(text);
    std::string raw;
    std::string current;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        std::string stripped = hash == std::string::npos ? raw : raw.substr(0, hash);
        stripped = detail::trim(stripped);
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']') throw ConfigError(line_no, "malformed section header");
            current = detail::trim(stripped.substr(1, stripped.size() - 2));
            if (current != "queue" && current != "rate" && current != "grid" &&
                current != "run" && current != "spectral" && current != "sim") {
                throw ConfigError(line_no, "unknown section [" + current + "]");
            }
            sections[current];
            section_lines[current] = line_no;
            continue;
        }
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
        if (current.empty()) throw ConfigError(line_no, "key outside of any section");
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError(line_no, "empty key");
        if (sections[current].count(key)) throw ConfigError(line_no, "duplicate key '" + key + "'");
        sections[current][key] = RawEntry{value, line_no, false};
    }

    auto section = [&](const std::string& name) -> RawSection* {
        auto it = sections.find(name);
        return it == sections.end() ? nullptr : &it->second;
    };
    auto take = [&](RawSection* sec, const std::string& key) -> RawEntry* {
        if (!sec) return nullptr;
        auto it = sec->find(key);
        if (it == sec->end()) return nullptr;
        it->second.used = true;
        return &it->second;
    };
    auto require = [&](RawSection* sec, const std::string& sec_name,
                       const std::string& key) -> RawEntry& {
        RawEntry* e = take(sec, key);
        if (!e) {
            throw ConfigError("missing required key '" + key + "' in section [" + sec_name + "]");
        }
        return *e;
    };

    RawSection* queue_sec = section("queue");
    if (!queue_sec) throw ConfigError("missing required section [queue]");
    const RawEntry& k_e = require(queue_sec, "queue", "k");
    const RawEntry& b_e = require(queue_sec, "queue", "B");
    const RawEntry& mu_e = require(queue_sec, "queue", "mu");
    const long k = detail::parse_long(k_e.value, k_e.line);
    const long B = detail::parse_long(b_e.value, b_e.line);
    const double mu = detail::parse_double(mu_e.value, mu_e.line);
    if (k < 1) throw ConfigError(k_e.line, "k must be at least 1");
    if (B < k) throw ConfigError(b_e.line, "k must not exceed B");
    if (!(mu > 0.0)) throw ConfigError(mu_e.line, "mu must be positive");

    RawSection* rate_sec = section("rate");
    if (!rate_sec) throw ConfigError("missing required section [rate]");
    const RawEntry& type_e = require(rate_sec, "rate", "type");
    RateFunction rate = RateFunction::constant(1.0);
    try {
        if (type_e.value == "constant") {
            const RawEntry& a = require(rate_sec, "rate", "a");
            rate = RateFunction::constant(detail::parse_double(a.value, a.line));
        } else if (type_e.value == "sinusoid") {
            const RawEntry& a = require(rate_sec, "rate", "a");
            const RawEntry& b = require(rate_sec, "rate", "b");
            const RawEntry& om = require(rate_sec, "rate", "omega");
            const RawEntry& ph = require(rate_sec, "rate", "phi");
            rate = RateFunction::sinusoid(
                detail::parse_double(a.value, a.line), detail::parse_double(b.value, b.line),
                detail::parse_double(om.value, om.line), detail::parse_double(ph.value, ph.line));
        } else if (type_e.value == "piecewise") {
            const RawEntry& br = require(rate_sec, "rate", "breaks");
            const RawEntry& va = require(rate_sec, "rate", "values");
            rate = RateFunction::piecewise(detail::parse_double_list(br.value, br.line),
                                           detail::parse_double_list(va.value, va.line));
        } else {
            throw ConfigError(type_e.line, "unknown rate type '" + type_e.value + "'");
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(type_e.line, e.what());
    }

    QueueConfig queue(static_cast<int>(k), static_cast<int>(B), mu);
    GridConfig grid = GridConfig::defaults(queue);
    if (RawSection* grid_sec = section("grid")) {
        long levels = grid.levels;
        double x_max = grid.x_max;
        long cells = 0;
        const RawEntry* n_e = take(grid_sec, "N");
        const RawEntry* x_e = take(grid_sec, "x_max");
        const RawEntry* m_e = take(grid_sec, "M");
        if (n_e) levels = detail::parse_long(n_e->value, n_e->line);
        if (x_e) x_max = detail::parse_double(x_e->value, x_e->line);
        if (m_e) {
            cells = detail::parse_long(m_e->value, m_e->line);
        } else {
            cells = static_cast<long>(std::lround(x_max / 1e-3));  // default resolution
        }
        try {
            grid = GridConfig(static_cast<int>(levels), x_max, static_cast<int>(cells));
            require_compatible(queue, grid);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(section_lines["grid"], e.what());
        }
    }

    Scenario sc{queue, rate, grid};
    if (RawSection* run_sec = section("run")) {
        if (const RawEntry* e = take(run_sec, "horizon")) {
            sc.horizon = detail::parse_double(e->value, e->line);
            if (!(sc.horizon >= 0.0)) throw ConfigError(e->line, "horizon must be nonnegative");
        }
        if (const RawEntry* e = take(run_sec, "checkpoints")) {
            sc.checkpoints = detail::parse_double_list(e->value, e->line);
            for (double c : sc.checkpoints) {
                if (!(c >= 0.0) || c > sc.horizon) {
                    throw ConfigError(e->line, "checkpoints must lie in [0, horizon]");
                }
            }
        }
        if (const RawEntry* e = take(run_sec, "out")) sc.out_dir = e->value;
    }
    if (RawSection* sp_sec = section("spectral")) {
        sc.has_spectral = true;
        if (const RawEntry* e = take(sp_sec, "gamma")) {
            const auto re = detail::parse_double_list(e->value, e->line);
            std::vector<double> im(re.size(), 0.0);
            if (const RawEntry* ei = take(sp_sec, "gamma_im")) {
                im = detail::parse_double_list(ei->value, ei->line);
                if (im.size() != re.size()) {
                    throw ConfigError(ei->line, "gamma_im must have the same length as gamma");
                }
            }
            for (std::size_t i = 0; i < re.size(); ++i) sc.spectral.gammas.emplace_back(re[i], im[i]);
        }
        if (const RawEntry* e = take(sp_sec, "sweep")) {
            const auto parts = detail::parse_double_list(e->value, e->line);
            if (parts.size() != 3 || parts[2] < 2.0) {
                throw ConfigError(e->line, "sweep must be 'start, stop, count' with count >= 2");
            }
            sc.spectral.has_sweep = true;
            sc.spectral.sweep_start = parts[0];
            sc.spectral.sweep_stop = parts[1];
            sc.spectral.sweep_count = static_cast<int>(parts[2]);
        }
        if (const RawEntry* e = take(sp_sec, "n_b")) {
            sc.spectral.n_boundary = static_cast<int>(detail::parse_long(e->value, e->line));
            if (sc.spectral.n_boundary < 1 || sc.spectral.n_boundary > grid.levels) {
                throw ConfigError(e->line, "n_b must lie in [1, N]");
            }
        }
        if (const RawEntry* e = take(sp_sec, "lambda")) {
            const double lam = detail::parse_double(e->value, e->line);
            if (!(lam >= 0.0)) throw ConfigError(e->line, "lambda must be nonnegative");
            sc.spectral.frozen_lambda = lam;
        }
    }
    if (RawSection* sim_sec = section("sim")) {
        if (const RawEntry* e = take(sim_sec, "n_reps")) {
            sc.sim.n_reps = detail::parse_long(e->value, e->line);
            if (sc.sim.n_reps < 1) throw ConfigError(e->line, "n_reps must be at least 1");
        }
        if (const RawEntry* e = take(sim_sec, "seed")) {
            sc.sim.seed = detail::parse_u64(e->value, e->line);
        }
    }

    // fail-closed: every provided key must have been consumed
    for (const auto& [name, sec] : sections) {
        for (const auto& [key, entry] : sec) {
            if (!entry.used) {
                throw ConfigError(entry.line, "unknown key '" + key + "' in section [" + name + "]");
            }
        }
    }
    return sc;
}

/// Canonical serialization; parse_config(serialize_config(s)) == s for every
/// valid scenario.
inline std::string serialize_config(const Scenario& sc) {
    std::ostringstream os;
    os.precision(17);
    os << "[queue]\n";
    os << "k = " << sc.queue.k << "\n";
    os << "B = " << sc.queue.B << "\n";
    os << "mu = " << sc.queue.mu << "\n";
    os << "\n[rate]\n";
    switch (sc.rate.kind()) {
        case RateFunction::Kind::Constant:
            os << "type = constant\n";
            os << "a = " << sc.rate.const_value() << "\n";
            break;
        case RateFunction::Kind::Sinusoid:
            os << "type = sinusoid\n";
            os << "a = " << sc.rate.sin_base() << "\n";
            os << "b = " << sc.rate.sin_amplitude() << "\n";
            os << "omega = " << sc.rate.sin_omega() << "\n";
            os << "phi = " << sc.rate.sin_phase() << "\n";
            break;
        case RateFunction::Kind::Piecewise: {
            os << "type = piecewise\n";
            os << "breaks = ";
            for (std::size_t i = 0; i < sc.rate.breakpoints().size(); ++i) {
                os << (i ? ", " : "") << sc.rate.breakpoints()[i];
            }
            os << "\nvalues = ";
            for (std::size_t i = 0; i < sc.rate.values().size(); ++i) {
                os << (i ? ", " : "") << sc.rate.values()[i];
            }
            os << "\n";
            break;
        }
    }
    os << "\n[grid]\n";
    os << "N = " << sc.grid.levels << "\n";
    os << "x_max = " << sc.grid.x_max << "\n";
    os << "M = " << sc.grid.cells << "\n";
    os << "\n[run]\n";
    os << "horizon = " << sc.horizon << "\n";
    if (!sc.checkpoints.empty()) {
        os << "checkpoints = ";
        for (std::size_t i = 0; i < sc.checkpoints.size(); ++i) {
            os << (i ? ", " : "") << sc.checkpoints[i];
        }
        os << "\n";
    }
    if (!sc.out_dir.empty()) os << "out = " << sc.out_dir << "\n";
    if (sc.has_spectral) {
        os << "\n[spectral]\n";
        if (!sc.spectral.gammas.empty()) {
            os << "gamma = ";
            for (std::size_t i = 0; i < sc.spectral.gammas.size(); ++i) {
                os << (i ? ", " : "") << sc.spectral.gammas[i].real();
            }
            os << "\ngamma_im = ";
            for (std::size_t i = 0; i < sc.spectral.gammas.size(); ++i) {
                os << (i ? ", " : "") << sc.spectral.gammas[i].imag();
            }
            os << "\n";
        }
        if (sc.spectral.has_sweep) {
            os << "sweep = " << sc.spectral.sweep_start << ", " << sc.spectral.sweep_stop << ", "
               << sc.spectral.sweep_count << "\n";
        }
        os << "n_b = " << sc.spectral.n_boundary << "\n";
        if (sc.spectral.frozen_lambda) os << "lambda = " << *sc.spectral.frozen_lambda << "\n";
    }
    os << "\n[sim]\n";
    os << "n_reps = " << sc.sim.n_reps << "\n";
    os << "seed = " << sc.sim.seed << "\n";
    return os.str();
}

}  // namespace bulkq
