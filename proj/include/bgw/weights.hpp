#pragma once

#include <cmath>
#include <limits>

#include "bgw/model.hpp"
#include "bgw/quad.hpp"

namespace bgw::quad {

// Drift lambda (p~(v) - v) - qbar v and deficit 1 - r~(v) on a segment whose
// endpoints may be roots of the drift. Next to a root the drift is evaluated
// from the p.g.f. difference, so relative accuracy survives at distance 1e-300.
class SegmentModel {
public:
    SegmentModel(const ModelSpec& spec, double qbar, Segment seg, bool lo_root, bool hi_root)
        : spec_(spec), qbar_(qbar), seg_(std::move(seg)), lo_root_(lo_root), hi_root_(hi_root) {}

    const ModelSpec& spec() const { return spec_; }
    const Segment& segment() const { return seg_; }
    Segment& segment() { return seg_; }

    double drift(const Point& p) const {
        const double l = spec_.lambda;
        if (p.from_lo <= p.to_hi) {
            if (lo_root_)
                return l * offspring_pgf_delta(spec_.offspring, seg_.lo(), p.from_lo) - (l + qbar_) * p.from_lo;
        } else if (hi_root_) {
            return l * offspring_pgf_delta(spec_.offspring, seg_.hi(), -p.to_hi) + (l + qbar_) * p.to_hi;
        }
        return l * (offspring_pgf(spec_.offspring, p.v) - p.v) - qbar_ * p.v;
    }

    double deficit(const Point& p) const {
        if (!has_immigration(spec_))
            return 0.0;
        const double t = seg_.hi() == 1.0 ? p.to_hi : 1.0 - p.v;
        return immigration_deficit(spec_.immigration, t, p.v);
    }

    // (q + mu (1 - r~(v))) / |drift(v)|
    double gamma(double q, const Point& p) const {
        return (q + spec_.mu * deficit(p)) / std::abs(drift(p));
    }

    void trim() {
        seg_.trim([this](const Point& p) {
            const double d = std::abs(drift(p));
            return p.from_lo > 0 && p.to_hi > 0 && d > 1e-280 && std::isfinite(d);
        });
    }

private:
    ModelSpec spec_;
    double qbar_;
    Segment seg_;
    bool lo_root_, hi_root_;
};

// -integral of gamma from `delimiter` to v, v in (0, upper); upper is a drift root.
inline CumulativeIntegral lower_log_omega(const ModelSpec& spec, double q, double qbar, double upper,
                                          double delimiter) {
    SegmentModel m(spec, qbar, Segment(0.0, upper), false, true);
    m.trim();
    Reference ref;
    if (delimiter > 0) {
        ref.kind = RefKind::interior;
        ref.u = m.segment().u_of(delimiter);
    }
    const Segment seg = m.segment();
    return CumulativeIntegral(seg, [m, q](const Point& p) { return m.gamma(q, p); }, ref, -1.0);
}

// -integral of gamma from v to 1, v in (varphi, 1).
inline CumulativeIntegral upper_log_omega(const ModelSpec& spec, double q, double varphi) {
    SegmentModel m(spec, 0.0, Segment(varphi, 1.0), true, true);
    m.trim();
    const Segment seg = m.segment();
    return CumulativeIntegral(seg, [m, q](const Point& p) { return m.gamma(q, p); },
                              Reference{RefKind::upper_end, 0.0}, 1.0);
}

inline void check_open_unit(double v) {
    if (!(v > 0.0 && v < 1.0))
        throw DomainError("v must lie in (0,1)");
}

inline double rho(const ModelSpec& spec, double v) {
    check_open_unit(v);
    const double varphi = root_varphi(spec);
    if (std::abs(v - varphi) < 1e-14)
        throw DomainError("rho is singular at v = varphi");
    const double d = v - varphi;
    return spec.lambda * std::abs(offspring_pgf_delta(spec.offspring, varphi, d) - d);
}

inline double gamma_q(const ModelSpec& spec, double q, double v) {
    if (!(q >= 0))
        throw PreconditionError("q >= 0");
    const double r = rho(spec, v);
    const double num = q + (has_immigration(spec) ? spec.mu * immigration_deficit(spec.immigration, 1.0 - v) : 0.0);
    return num / r;
}

inline double log_omega_lower(const ModelSpec& spec, double q, double v, const QuadConfig& cfg = {},
                              double delimiter = std::numeric_limits<double>::quiet_NaN()) {
    cfg.check();
    const double varphi = root_varphi(spec);
    const double phq = root_phi_q(spec, q);
    if (phq >= varphi)
        throw PreconditionError("log_omega_lower needs phi_q < varphi");
    if (!(v > 0 && v < varphi))
        throw DomainError("v must lie in (0, varphi)");
    const double theta = std::isnan(delimiter) ? phq : delimiter;
    if (v == theta)
        return 0.0;
    return lower_log_omega(spec, q, 0.0, varphi, theta).at_v(v);
}

inline double log_omega_upper(const ModelSpec& spec, double q, double v, const QuadConfig& cfg = {}) {
    cfg.check();
    if (!is_explosive(spec))
        throw PreconditionError("log_omega_upper needs an explosive model");
    if (!(q > 0))
        throw PreconditionError("log_omega_upper needs q > 0");
    const double varphi = root_varphi(spec);
    if (!(v > varphi && v < 1))
        throw DomainError("v must lie in (varphi, 1)");
    return upper_log_omega(spec, q, varphi).at_v(v);
}

} // namespace bgw::quad
