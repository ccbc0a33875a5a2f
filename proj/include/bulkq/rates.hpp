#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bulkq {

/// Time-varying arrival intensity. Three families are supported: a constant
/// rate, a sinusoid a + b*sin(omega*t + phi), and a right-continuous
/// piecewise-constant function. All families are nonnegative on [0, inf) and
/// expose a closed-form integral plus an interval majorant for thinning.
class RateFunction {
public:
    enum class Kind { Constant, Sinusoid, Piecewise };

    static RateFunction constant(double a) {
        if (!(a >= 0.0)) {
            throw std::invalid_argument("RateFunction: intensity must be nonnegative");
        }
        RateFunction rf;
        rf.kind_ = Kind::Constant;
        rf.a_ = a;
        return rf;
    }

    static RateFunction sinusoid(double a, double b, double omega, double phase) {
        if (!(a >= std::abs(b))) {
            throw std::invalid_argument("RateFunction: intensity must be nonnegative (requires a >= |b|)");
        }
        RateFunction rf;
        rf.kind_ = Kind::Sinusoid;
        rf.a_ = a;
        rf.b_ = b;
        rf.omega_ = omega;
        rf.phase_ = phase;
        return rf;
    }

    static RateFunction piecewise(std::vector<double> breakpoints, std::vector<double> values) {
        if (values.size() != breakpoints.size() + 1) {
            throw std::invalid_argument("RateFunction: piecewise needs one more value than breakpoints");
        }
        for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
            if (!(breakpoints[i] < breakpoints[i + 1])) {
                throw std::invalid_argument("RateFunction: breakpoints must be strictly ascending");
            }
        }
        for (double v : values) {
            if (!(v >= 0.0)) {
                throw std::invalid_argument("RateFunction: intensity must be nonnegative");
            }
        }
        RateFunction rf;
        rf.kind_ = Kind::Piecewise;
        rf.breaks_ = std::move(breakpoints);
        rf.values_ = std::move(values);
        return rf;
    }

    double eval(double t) const {
        if (!(t >= 0.0)) {
            throw std::invalid_argument("RateFunction::eval: t must be nonnegative");
        }
        switch (kind_) {
            case Kind::Constant:
                return a_;
            case Kind::Sinusoid:
                return a_ + b_ * std::sin(omega_ * t + phase_);
            case Kind::Piecewise:
                return values_[piece_index(t)];
        }
        return 0.0;
    }

    /// Majorant of the rate over [t0, t1]; tight for constant and piecewise.
    double upper_bound(double t0, double t1) const {
        check_interval(t0, t1);
        switch (kind_) {
            case Kind::Constant:
                return a_;
            case Kind::Sinusoid:
                return a_ + std::abs(b_);
            case Kind::Piecewise: {
                const std::size_t i0 = piece_index(t0);
                const std::size_t i1 = piece_index(t1);
                return *std::max_element(values_.begin() + static_cast<std::ptrdiff_t>(i0),
                                         values_.begin() + static_cast<std::ptrdiff_t>(i1) + 1);
            }
        }
        return 0.0;
    }

    /// Closed-form integral of the rate over [t0, t1].
    double integrate(double t0, double t1) const {
        check_interval(t0, t1);
        switch (kind_) {
            case Kind::Constant:
                return a_ * (t1 - t0);
            case Kind::Sinusoid: {
                if (omega_ == 0.0) {
                    return (a_ + b_ * std::sin(phase_)) * (t1 - t0);
                }
                const double primitive1 = -b_ / omega_ * std::cos(omega_ * t1 + phase_);
                const double primitive0 = -b_ / omega_ * std::cos(omega_ * t0 + phase_);
                return a_ * (t1 - t0) + (primitive1 - primitive0);
            }
            case Kind::Piecewise: {
                double acc = 0.0;
                double lo = t0;
                std::size_t i = piece_index(t0);
                while (i < breaks_.size() && breaks_[i] < t1) {
                    acc += values_[i] * (breaks_[i] - lo);
                    lo = breaks_[i];
                    ++i;
                }
                acc += values_[i] * (t1 - lo);
                return acc;
            }
        }
        return 0.0;
    }

    Kind kind() const { return kind_; }
    double const_value() const { return a_; }
    double sin_base() const { return a_; }
    double sin_amplitude() const { return b_; }
    double sin_omega() const { return omega_; }
    double sin_phase() const { return phase_; }
    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<double>& values() const { return values_; }

    bool is_constant() const { return kind_ == Kind::Constant; }

    /// Serialized form: variant name plus parameter list.
    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind_) {
            case Kind::Constant:
                os << "constant(" << a_ << ")";
                break;
            case Kind::Sinusoid:
                os << "sinusoid(" << a_ << ", " << b_ << ", " << omega_ << ", " << phase_ << ")";
                break;
            case Kind::Piecewise: {
                os << "piecewise(breaks=[";
                for (std::size_t i = 0; i < breaks_.size(); ++i) {
                    os << (i ? ", " : "") << breaks_[i];
                }
                os << "], values=[";
                for (std::size_t i = 0; i < values_.size(); ++i) {
                    os << (i ? ", " : "") << values_[i];
                }
                os << "])";
                break;
            }
        }
        return os.str();
    }

    friend bool operator==(const RateFunction& x, const RateFunction& y) {
        if (x.kind_ != y.kind_) return false;
        switch (x.kind_) {
            case Kind::Constant:
                return x.a_ == y.a_;
            case Kind::Sinusoid:
                return x.a_ == y.a_ && x.b_ == y.b_ && x.omega_ == y.omega_ && x.phase_ == y.phase_;
            case Kind::Piecewise:
                return x.breaks_ == y.breaks_ && x.values_ == y.values_;
        }
        return false;
    }

private:
    RateFunction() = default;

    static void check_interval(double t0, double t1) {
        if (!(0.0 <= t0 && t0 <= t1)) {
            throw std::invalid_argument("RateFunction: interval must satisfy 0 <= t0 <= t1");
        }
    }

    // Right-continuous lookup: index of the piece whose half-open interval contains t.
    std::size_t piece_index(double t) const {
        return static_cast<std::size_t>(
            std::upper_bound(breaks_.begin(), breaks_.end(), t) - breaks_.begin());
    }

    Kind kind_ = Kind::Constant;
    double a_ = 0.0, b_ = 0.0, omega_ = 0.0, phase_ = 0.0;
    std::vector<double> breaks_, values_;
};

}  // namespace bulkq
