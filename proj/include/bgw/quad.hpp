#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "bgw/error.hpp"

namespace bgw::quad {

struct QuadConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-13;
    int max_depth = 60;

    void check() const {
        if (!(rel_tol > 0) || !(abs_tol > 0))
            throw PreconditionError("quadrature tolerances must be > 0");
        if (max_depth < 1)
            throw PreconditionError("max_depth >= 1");
    }
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
};

// Integral of f over (a, b); integrable endpoint singularities are fine.
template <class F>
QuadResult integrate(F f, double a, double b, const QuadConfig& cfg = {}) {
    cfg.check();
    if (!(a < b))
        throw PreconditionError("integrate needs a < b");
    boost::math::quadrature::tanh_sinh<double> rule(std::min(cfg.max_depth, 20));
    QuadResult r;
    double l1 = 0.0;
    std::size_t levels = 0;
    r.value = rule.integrate(f, a, b, std::min(cfg.rel_tol, 1e-6), &r.error, &l1, &levels);
    if (!(r.error <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(r.value))))
        throw NonConvergence("integrate: tolerance not reached", r.value, r.error);
    return r;
}

// Adaptive 15-point Gauss-Kronrod on a short smooth panel. Bisects until the
// Kronrod error estimate is below max(abs_tol, 1e-14 |value|) on each piece.
template <class F>
double panel(F f, double a, double b, int max_depth = 12, double abs_tol = 1e-15) {
    if (a == b)
        return 0.0;
    if (a > b)
        return -panel(f, b, a, max_depth, abs_tol);
    double err = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &err);
    err *= 0.5 * (b - a); // Boost reports the estimate on the reference interval
    if (max_depth <= 0 || err <= std::max(abs_tol, 1e-14 * std::abs(v)))
        return v;
    const double m = 0.5 * (a + b);
    return panel(f, a, m, max_depth - 1, abs_tol) + panel(f, m, b, max_depth - 1, abs_tol);
}

// A point v of (lo, hi) with both endpoint distances kept to full relative accuracy.
struct Point {
    double v = 0.0;
    double from_lo = 0.0; // v - lo
    double to_hi = 0.0;   // hi - v
};

// Double-exponential parametrization v(u) = lo + (hi - lo) / (1 + exp(-pi sinh u)).
class Segment {
public:
    Segment(double lo, double hi) : lo_(lo), hi_(hi) {
        if (!(lo < hi))
            throw PreconditionError("segment needs lo < hi");
        const double len = hi - lo;
        u_hi_ = std::asinh(std::log(len / 1e-300) / std::numbers::pi);
        u_lo_ = -u_hi_;
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double u_min() const { return u_lo_; }
    double u_max() const { return u_hi_; }

    Point at(double u) const {
        const double s = std::numbers::pi * std::sinh(u);
        const double len = hi_ - lo_;
        Point p;
        if (s >= 0) {
            const double e = std::exp(-s);
            p.from_lo = len / (1.0 + e);
            p.to_hi = len * e / (1.0 + e);
        } else {
            const double e = std::exp(s);
            p.from_lo = len * e / (1.0 + e);
            p.to_hi = len / (1.0 + e);
        }
        p.v = s >= 0 ? hi_ - p.to_hi : lo_ + p.from_lo;
        return p;
    }

    // dv/du
    double jacobian(double u) const {
        const double s = std::numbers::pi * std::sinh(u);
        const double e = std::exp(-std::abs(s));
        return (hi_ - lo_) * std::numbers::pi * std::cosh(u) * e / ((1.0 + e) * (1.0 + e));
    }

    double u_of(double v) const {
        const double a = v - lo_, b = hi_ - v;
        if (!(a > 0 && b > 0))
            throw DomainError("point outside segment");
        return std::asinh(std::log(a / b) / std::numbers::pi);
    }

    // Shrinks the parameter range from both ends while `ok` fails.
    template <class Pred>
    void trim(Pred ok, double step = 1.0 / 64) {
        while (u_hi_ > 0 && !ok(at(u_hi_)))
            u_hi_ -= step;
        while (u_lo_ < 0 && !ok(at(u_lo_)))
            u_lo_ += step;
    }

    // Natural log of v, accurate next to either endpoint.
    double log_v(const Point& p) const {
        if (hi_ == 1.0 && p.to_hi < 0.25)
            return std::log1p(-p.to_hi);
        return std::log(p.v);
    }

private:
    double lo_, hi_;
    double u_lo_, u_hi_;
};

enum class RefKind { lower_end, upper_end, interior };

struct Reference {
    RefKind kind = RefKind::lower_end;
    double u = 0.0; // used for interior references
};

// L(u) = sign * integral of rate(v) dv from the reference point to v(u).
class CumulativeIntegral {
public:
    using Rate = std::function<double(const Point&)>;

    CumulativeIntegral(Segment seg, Rate rate, Reference ref, double sign)
        : seg_(std::move(seg)), rate_(std::move(rate)), ref_(ref), sign_(sign) {}

    const Segment& segment() const { return seg_; }
    const Reference& reference() const { return ref_; }

    double integrand(double u) const { return rate_(seg_.at(u)) * seg_.jacobian(u); }

    // sign * integral of rate over v(u0)..v(u1)
    double between(double u0, double u1) const {
        return sign_ * panel([this](double u) { return integrand(u); }, u0, u1);
    }

    double at(double u) const {
        switch (ref_.kind) {
        case RefKind::interior:
            return between(ref_.u, u);
        case RefKind::lower_end: {
            const double u0 = seg_.u_min();
            const Point p = seg_.at(u0);
            return sign_ * rate_(p) * p.from_lo + chained(u0, u);
        }
        case RefKind::upper_end: {
            const double u1 = seg_.u_max();
            const Point p = seg_.at(u1);
            return -sign_ * rate_(p) * p.to_hi + chained(u1, u);
        }
        }
        return 0.0;
    }

    double at_v(double v) const { return at(seg_.u_of(v)); }

private:
    // Splits long stretches into unit panels so each Gauss-Kronrod call sees a smooth piece.
    double chained(double u0, double u1) const {
        const int n = std::max(1, int(std::ceil(std::abs(u1 - u0))));
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            acc += between(u0 + (u1 - u0) * i / n, u0 + (u1 - u0) * (i + 1) / n);
        return acc;
    }

    Segment seg_;
    Rate rate_;
    Reference ref_;
    double sign_;
};

// Quadrature nodes of an integral over a segment, refined until probe functionals settle.
struct NodeSet {
    std::vector<Point> points;
    std::vector<double> log_v;
    std::vector<double> weights; // step * jacobian * integrand without the v^x factor
    double error = 0.0;          // largest relative change of a probe at the last level
    int levels = 0;
};

struct GridNode {
    double u;
    Point pt;
    double jac;
    double L; // cumulative integral at u, -inf once past the cutoff
};

// Builds tanh-sinh nodes for integral over the segment of weight(node) * v^x.
// `cutoff` marks where exp(L) is negligible: nodes beyond it (seen from the
// reference) get L = -inf. Use -inf to disable.
inline NodeSet build_nodes(const CumulativeIntegral& L,
                           const std::function<double(const GridNode&)>& weight,
                           const std::vector<double>& probes, const QuadConfig& cfg,
                           double cutoff = -1000.0) {
    cfg.check();
    const Segment& seg = L.segment();
    const Reference ref = L.reference();
    const int max_level = std::clamp(cfg.max_depth, 1, 11);
    double h = 0.5;

    std::vector<GridNode> nodes;
    auto make = [&](double u) { return GridNode{u, seg.at(u), seg.jacobian(u), 0.0}; };
    auto fill_from = [&](const GridNode* from, GridNode& n) {
        if (from == nullptr) {
            n.L = L.at(n.u);
        } else if (std::isinf(from->L) || from->L < cutoff) {
            n.L = -std::numeric_limits<double>::infinity();
        } else {
            n.L = from->L + L.between(from->u, n.u);
        }
    };

    auto eval_probes = [&](double step, std::vector<double>& out) {
        out.assign(probes.size(), 0.0);
        for (const auto& n : nodes) {
            const double w = weight(n) * n.jac;
            if (w == 0.0)
                continue;
            const double lv = seg.log_v(n.pt);
            for (std::size_t i = 0; i < probes.size(); ++i)
                out[i] += w * std::exp(probes[i] * lv);
        }
        for (auto& s : out)
            s *= step;
    };

    // Level 0.
    {
        const int jlo = int(std::ceil(seg.u_min() / h)), jhi = int(std::floor(seg.u_max() / h));
        for (int j = jlo; j <= jhi; ++j)
            nodes.push_back(make(j * h));
        const int n = int(nodes.size());
        if (ref.kind == RefKind::lower_end) {
            fill_from(nullptr, nodes[0]);
            for (int i = 1; i < n; ++i)
                fill_from(&nodes[i - 1], nodes[i]);
        } else if (ref.kind == RefKind::upper_end) {
            fill_from(nullptr, nodes[n - 1]);
            for (int i = n - 2; i >= 0; --i)
                fill_from(&nodes[i + 1], nodes[i]);
        } else {
            int k = 0;
            while (k < n && nodes[k].u < ref.u)
                ++k;
            for (int i = k; i < n; ++i)
                fill_from(i == k ? nullptr : &nodes[i - 1], nodes[i]);
            for (int i = k - 1; i >= 0; --i)
                fill_from(i == k - 1 ? nullptr : &nodes[i + 1], nodes[i]);
        }
    }

    std::vector<double> prev, cur;
    eval_probes(h, prev);
    NodeSet out;
    double err = std::numeric_limits<double>::infinity();
    int level = 0;
    for (level = 1; level <= max_level; ++level) {
        h *= 0.5;
        std::vector<GridNode> merged;
        merged.reserve(2 * nodes.size() + 4);
        const int jlo = int(std::ceil(seg.u_min() / h)), jhi = int(std::floor(seg.u_max() / h));
        std::size_t k = 0;
        for (int j = jlo; j <= jhi; ++j) {
            if (j % 2 == 0) {
                merged.push_back(nodes[k++]);
            } else {
                merged.push_back(make(j * h));
                merged.back().L = std::numeric_limits<double>::quiet_NaN();
            }
        }
        const int n = int(merged.size());
        for (int i = 0; i < n; ++i) {
            if (!std::isnan(merged[i].L))
                continue;
            GridNode& nd = merged[i];
            const GridNode* left = i > 0 ? &merged[i - 1] : nullptr;
            const GridNode* right = i + 1 < n ? &merged[i + 1] : nullptr;
            switch (ref.kind) {
            case RefKind::lower_end:
                fill_from(left, nd);
                break;
            case RefKind::upper_end:
                fill_from(right, nd);
                break;
            case RefKind::interior:
                if (nd.u < ref.u)
                    fill_from(right && right->u <= ref.u ? right : nullptr, nd);
                else
                    fill_from(left && left->u >= ref.u ? left : nullptr, nd);
                break;
            }
        }
        nodes.swap(merged);
        eval_probes(h, cur);
        err = 0.0;
        double scale_all = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i)
            scale_all = std::max(scale_all, std::abs(cur[i]));
        bool done = true;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            const double d = std::abs(cur[i] - prev[i]);
            const double rel = d / std::max(std::abs(cur[i]), 1e-300);
            err = std::max(err, std::min(rel, d / std::max(scale_all, 1e-300)));
            if (d > std::max(cfg.abs_tol * scale_all, cfg.rel_tol * std::abs(cur[i])))
                done = false;
        }
        prev = cur;
        if (done && level >= 2)
            break;
    }
    out.levels = std::min(level, max_level);
    out.error = err;
    if (!(err <= 1e-6))
        throw NonConvergence("scale kernel did not settle", prev.empty() ? 0.0 : prev[0], err);
    for (const auto& n : nodes) {
        const double w = weight(n) * n.jac * h;
        if (w == 0.0 || !std::isfinite(w))
            continue;
        out.points.push_back(n.pt);
        out.log_v.push_back(seg.log_v(n.pt));
        out.weights.push_back(w);
    }
    return out;
}

} // namespace bgw::quad
