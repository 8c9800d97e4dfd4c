#pragma once

#include <optional>
#include <string>

#include "bgw/model.hpp"
#include "bgw/scale.hpp"

namespace bgw {

// Optimal immigration control of a pure branching population kept above `floor`.
struct ControlProblem {
    ModelSpec spec;
    int floor = 0;
    double q = 0.0;
};

struct BellmanViolation {
    int x;
    int f;
    double lhs;
    double rhs;
};

struct BellmanReport {
    bool ok = true;
    int checks = 0;
    std::optional<BellmanViolation> violation;
};

namespace detail {

inline ScaleFunction control_scale(const ControlProblem& pb, const QuadConfig& cfg) {
    require_valid(pb.spec);
    if (has_immigration(pb.spec))
        throw PreconditionError("control problem needs mu = 0");
    if (pb.floor < 0)
        throw PreconditionError("floor >= 0");
    if (!(pb.q >= 0))
        throw PreconditionError("q >= 0");
    if (!(pb.q > 0) && !(root_varphi(pb.spec) < 1.0))
        throw UnsupportedRegime("q > 0 or supercritical branching");
    return scale_function(pb.spec, pb.q, cfg);
}

inline double gap(const ScaleFunction& f, int a) { return f(a) - f(a + 1); }

inline double value(const ScaleFunction& f, int a, int x) {
    const double b = gap(f, a);
    return x > a ? f(x) / b : double(a + 1 - x) + f(a + 1) / b;
}

} // namespace detail

inline double barrier_gap(const ControlProblem& pb, int a, const QuadConfig& cfg = {}) {
    const auto f = detail::control_scale(pb, cfg);
    if (a < pb.floor)
        throw PreconditionError("barrier a >= floor");
    return detail::gap(f, a);
}

inline double barrier_value(const ControlProblem& pb, int a, int x, const QuadConfig& cfg = {}) {
    const auto f = detail::control_scale(pb, cfg);
    if (a < pb.floor)
        throw PreconditionError("barrier a >= floor");
    if (x < 0)
        throw PreconditionError("x >= 0");
    return detail::value(f, a, x);
}

inline double optimal_value(const ControlProblem& pb, int x, const QuadConfig& cfg = {}) {
    return barrier_value(pb, pb.floor, x, cfg);
}

// Grid check of the two inequalities that make W_floor a Bellman solution.
inline BellmanReport verify_bellman(const ControlProblem& pb, int x_max, int f_max, const QuadConfig& cfg = {},
                                    double tol = 1e-9) {
    const auto F = detail::control_scale(pb, cfg);
    const int a = pb.floor;
    const double B = detail::gap(F, a);
    BellmanReport rep;
    auto check = [&](int x, int f, double lhs, double rhs) {
        ++rep.checks;
        if (lhs < rhs - tol * std::max(1.0, std::abs(rhs)) && rep.ok) {
            rep.ok = false;
            rep.violation = BellmanViolation{x, f, lhs, rhs};
        }
    };
    for (int x = 0; x <= a; ++x)
        for (int f = a + 2 - x; f <= f_max; ++f)
            check(x, f, f + F(x + f) / B, a + 1 - x + F(a + 1) / B);
    for (int x = a + 1; x <= x_max; ++x)
        for (int f = 1; f <= f_max; ++f)
            check(x, f, f + F(x + f) / B, F(x) / B);
    return rep;
}

} // namespace bgw
