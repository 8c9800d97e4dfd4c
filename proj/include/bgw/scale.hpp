#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bgw/model.hpp"
#include "bgw/quad.hpp"
#include "bgw/weights.hpp"

namespace bgw {

using quad::QuadConfig;

constexpr double tie_tol = 1e-9;

// f(x) = offset + factor * sum_j w_j v_j^x, or base^x on the power branch.
class ScaleFunction {
public:
    static ScaleFunction power(double base) {
        ScaleFunction f;
        f.power_ = true;
        f.base_ = base;
        return f;
    }

    ScaleFunction(quad::NodeSet nodes, double offset, double factor)
        : nodes_(std::move(nodes)), offset_(offset), factor_(factor) {}

    double operator()(double x) const {
        if (power_)
            return std::pow(base_, x);
        return offset_ + factor_ * sum(x, [](const quad::Point&) { return 1.0; });
    }

    // offset * g_sum + factor * sum_j w_j v_j^x g(v_j); the power branch gives base^x g(base).
    template <class G>
    double transform(double x, G g, double g_sum = 1.0) const {
        if (power_)
            return std::pow(base_, x) * g(quad::Point{base_, base_, 1.0 - base_});
        return offset_ * g_sum + factor_ * sum(x, g);
    }

    bool is_power() const { return power_; }
    double base() const { return base_; }
    double error() const { return power_ ? 0.0 : nodes_.error; }
    std::size_t node_count() const { return nodes_.weights.size(); }

private:
    ScaleFunction() = default;

    template <class G>
    double sum(double x, G g) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < nodes_.weights.size(); ++j)
            acc += nodes_.weights[j] * std::exp(x * nodes_.log_v[j]) * g(nodes_.points[j]);
        return acc;
    }

    bool power_ = false;
    double base_ = 1.0;
    quad::NodeSet nodes_;
    double offset_ = 0.0;
    double factor_ = 1.0;
};

namespace detail {

inline const std::vector<double>& probe_orders() {
    static const std::vector<double> p{0.0, 1.0, 4.0, 16.0, 64.0};
    return p;
}

// Nodes for the integral over (0, upper) of exp(L)/|drift| v^x with L from lower_log_omega.
inline quad::NodeSet lower_kernel(const ModelSpec& spec, double q, double qbar, double upper, double delimiter,
                                  const QuadConfig& cfg) {
    quad::SegmentModel m(spec, qbar, quad::Segment(0.0, upper), false, true);
    m.trim();
    auto L = quad::lower_log_omega(spec, q, qbar, upper, delimiter);
    auto weight = [&m](const quad::GridNode& n) {
        if (std::isinf(n.L))
            return 0.0;
        return std::exp(n.L - std::log(std::abs(m.drift(n.pt))));
    };
    return quad::build_nodes(L, weight, probe_orders(), cfg);
}

inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace detail

// Phi_q for q > 0. `delimiter` replaces phi_q as lower limit of the inner integral.
inline ScaleFunction phi_q_function(const ModelSpec& spec, double q, const QuadConfig& cfg = {},
                                    std::optional<double> delimiter = {}) {
    require_valid(spec);
    cfg.check();
    if (!(q > 0))
        throw PreconditionError("phi_q_fn needs q > 0");
    const double varphi = root_varphi(spec);
    const double phq = root_phi_q(spec, q);
    if (phq > varphi + tie_tol)
        throw UnsupportedRegime("phi_q > varphi", "phi_q=" + detail::num(phq) + ", varphi=" + detail::num(varphi));
    if (std::abs(phq - varphi) < tie_tol)
        return ScaleFunction::power(varphi);
    const double theta = delimiter.value_or(phq);
    if (!(theta >= 0 && theta < varphi))
        throw PreconditionError("delimiter must lie in [0, varphi)");
    return ScaleFunction(detail::lower_kernel(spec, q, 0.0, varphi, theta, cfg), 0.0, q);
}

inline ScaleFunction psi_q_function(const ModelSpec& spec, double q, const QuadConfig& cfg = {}) {
    require_valid(spec);
    cfg.check();
    if (!(q > 0))
        throw PreconditionError("psi_q_fn needs q > 0");
    if (!is_explosive(spec))
        throw UnsupportedRegime("explosivity fails", "psi_q needs an explosive model");
    const double varphi = root_varphi(spec);
    const double phq = root_phi_q(spec, q);
    if (phq >= varphi - tie_tol)
        throw UnsupportedRegime("phi_q >= varphi", "phi_q=" + detail::num(phq) + ", varphi=" + detail::num(varphi));
    quad::SegmentModel m(spec, 0.0, quad::Segment(varphi, 1.0), true, true);
    m.trim();
    auto L = quad::upper_log_omega(spec, q, varphi);
    auto weight = [&m](const quad::GridNode& n) {
        if (std::isinf(n.L))
            return 0.0;
        return std::exp(n.L - std::log(std::abs(m.drift(n.pt))));
    };
    return ScaleFunction(quad::build_nodes(L, weight, detail::probe_orders(), cfg), 1.0, -q);
}

namespace detail {

// Decides whether the integral of exp(L)/|drift| near 1 is finite by comparing
// its contributions over the decades (1 - 10^-k, 1 - 10^-(k+1)), k = 2..5.
inline bool phi0_integral_finite(const ModelSpec& spec, double phi) {
    quad::SegmentModel m(spec, 0.0, quad::Segment(0.0, 1.0), false, true);
    m.trim();
    auto L = quad::lower_log_omega(spec, 0.0, 0.0, 1.0, phi);
    const auto& seg = m.segment();
    std::vector<double> d;
    for (int k = 2; k <= 5; ++k) {
        const double u0 = seg.u_of(1.0 - std::pow(10.0, -k));
        const double u1 = seg.u_of(1.0 - std::pow(10.0, -(k + 1)));
        const double L0 = L.at(u0);
        auto f = [&](double u) {
            const quad::Point p = seg.at(u);
            return std::exp(L0 + L.between(u0, u) - std::log(std::abs(m.drift(p)))) * seg.jacobian(u);
        };
        d.push_back(quad::panel(f, u0, u1, 8));
    }
    for (double x : d)
        if (!std::isfinite(x))
            return false;
    if (d[2] <= 0)
        return true;
    return d[3] / d[2] <= 1.0 / 1.5;
}

} // namespace detail

// Phi_0, following the case split of its definition.
inline ScaleFunction phi_0_function(const ModelSpec& spec, const QuadConfig& cfg = {}) {
    require_valid(spec);
    cfg.check();
    const double varphi = root_varphi(spec);
    const double phi = root_phi(spec);
    if (phi > varphi + tie_tol)
        throw UnsupportedRegime("phi > varphi", "phi=" + detail::num(phi) + ", varphi=" + detail::num(varphi));
    if (!has_immigration(spec) || std::abs(phi - varphi) < tie_tol)
        return ScaleFunction::power(varphi);
    const double deficit_at_varphi = immigration_deficit(spec.immigration, 1.0 - varphi);
    bool integral = false;
    if (varphi < 1.0 && spec.mu * deficit_at_varphi > 0)
        integral = true;
    else if (varphi == 1.0 && phi < 1.0 - tie_tol)
        integral = detail::phi0_integral_finite(spec, phi);
    if (!integral)
        return ScaleFunction::power(varphi);
    return ScaleFunction(detail::lower_kernel(spec, 0.0, 0.0, varphi, phi, cfg), 0.0, spec.mu);
}

// Phi_q for q > 0 and Phi_0 for q = 0.
inline ScaleFunction scale_function(const ModelSpec& spec, double q, const QuadConfig& cfg = {}) {
    return q > 0 ? phi_q_function(spec, q, cfg) : phi_0_function(spec, cfg);
}

// Phi_{q,qbar}: prefactor q - mu (r~(varphi_qbar) - 1), drift reduced by qbar v.
inline ScaleFunction phi_q_qbar_function(const ModelSpec& spec, double q, double qbar, const QuadConfig& cfg = {}) {
    require_valid(spec);
    cfg.check();
    if (!(q >= 0) || !(qbar >= 0))
        throw PreconditionError("q >= 0 and qbar >= 0");
    const double vb = root_varphi_qbar(spec, qbar);
    if (!(q > 0 || vb < 1.0))
        throw UnsupportedRegime("q > 0 or varphi_qbar < 1");
    const double pre = q - (has_immigration(spec) ? spec.mu * (immigration_pgf_unchecked(spec.immigration, vb) - 1.0) : 0.0);
    if (!has_immigration(spec) && q == 0)
        return ScaleFunction::power(vb);
    if (!(pre > 1e-12))
        throw UnsupportedRegime("q > mu (r~(varphi_qbar) - 1)", "prefactor=" + detail::num(pre));
    const double phq = root_phi_q(spec, q);
    if (phq >= vb)
        throw UnsupportedRegime("q > mu (r~(varphi_qbar) - 1)", "phi_q=" + detail::num(phq));
    return ScaleFunction(detail::lower_kernel(spec, q, qbar, vb, phq, cfg), 0.0, pre);
}

enum class ScaleTag { phi_q, psi_q, phi_q_qbar };

inline double harmonic_residual(const ModelSpec& spec, double q, double qbar, ScaleTag tag, int x,
                                const QuadConfig& cfg = {}) {
    if (x < 1)
        throw PreconditionError("harmonic_residual needs x >= 1");
    ScaleFunction f = tag == ScaleTag::phi_q   ? phi_q_function(spec, q, cfg)
                      : tag == ScaleTag::psi_q ? psi_q_function(spec, q, cfg)
                                               : phi_q_qbar_function(spec, q, qbar, cfg);
    const double qb = tag == ScaleTag::phi_q_qbar ? qbar : 0.0;
    const double fx = f(x);
    const double lhs = (q + qb * x + spec.lambda * x + spec.mu) * fx;

    double branch = 0.0;
    if (auto t = std::get_if<TabularOffspring>(&spec.offspring)) {
        for (std::size_t k = 0; k < t->pmf.size(); ++k)
            if (t->pmf[k] != 0.0)
                branch += t->pmf[k] * f(double(x) + double(k) - 1.0);
    } else {
        const auto& law = spec.offspring;
        branch = f.transform(x - 1.0, [&](const quad::Point& p) { return offspring_pgf(law, p.v); });
    }
    double imm = 0.0;
    if (has_immigration(spec)) {
        if (auto t = std::get_if<TabularImmigration>(&spec.immigration)) {
            for (std::size_t i = 0; i < t->pmf.size(); ++i)
                if (t->pmf[i] != 0.0)
                    imm += t->pmf[i] * f(double(x) + double(i) - 1.0);
        } else {
            const auto& law = spec.immigration;
            imm = f.transform(double(x), [&](const quad::Point& p) { return immigration_pgf_unchecked(law, p.v); });
        }
    }
    const double rhs = spec.lambda * x * branch + spec.mu * imm;
    return std::abs(lhs - rhs) / std::abs(lhs);
}

inline double phi_q_fn(const ModelSpec& spec, double q, int x, const QuadConfig& cfg = {}) {
    return phi_q_function(spec, q, cfg)(x);
}
inline double psi_q_fn(const ModelSpec& spec, double q, int x, const QuadConfig& cfg = {}) {
    return psi_q_function(spec, q, cfg)(x);
}
inline double phi_0_fn(const ModelSpec& spec, int x, const QuadConfig& cfg = {}) {
    return phi_0_function(spec, cfg)(x);
}
inline double phi_q_qbar_fn(const ModelSpec& spec, double q, double qbar, int x, const QuadConfig& cfg = {}) {
    return phi_q_qbar_function(spec, q, qbar, cfg)(x);
}

} // namespace bgw
