#pragma once

#include <cmath>
#include <vector>

#include "bgw/model.hpp"
#include "bgw/scale.hpp"

namespace bgw {

struct AtMinLaw {
    std::vector<double> pmf; // P_x(X_G = k), k = 0..x
};

struct Jump {
    int target;
    double prob;
};

struct GeneratorRow {
    int state;
    double leave_rate;
    std::vector<Jump> jumps;
    double kill_rate = 0.0; // nonzero only at state 1
};

struct ConditionedGenerator {
    std::vector<GeneratorRow> rows; // states 1..x_max

    const GeneratorRow& row(int x) const { return rows.at(std::size_t(x - 1)); }
};

namespace detail {

inline void check_levels(int x, int a) {
    if (a < 0 || x < a)
        throw PreconditionError("levels must satisfy 0 <= a <= x");
}

} // namespace detail

inline double lt_first_passage(const ModelSpec& spec, double q, int x, int a, const QuadConfig& cfg = {}) {
    detail::check_levels(x, a);
    if (!(q >= 0))
        throw PreconditionError("q >= 0");
    const auto f = scale_function(spec, q, cfg);
    return x == a ? 1.0 : f(x) / f(a);
}

inline double prob_passage(const ModelSpec& spec, int x, int a, const QuadConfig& cfg = {}) {
    detail::check_levels(x, a);
    const auto f = phi_0_function(spec, cfg);
    return x == a ? 1.0 : f(x) / f(a);
}

inline bool certain_extinction(const ModelSpec& spec, const QuadConfig& cfg = {}) {
    require_valid(spec);
    cfg.check();
    const double varphi = root_varphi(spec);
    const double phi = root_phi(spec);
    if (phi > varphi + tie_tol)
        throw UnsupportedRegime("phi > varphi");
    if (varphi < 1.0)
        return false;
    if (!has_immigration(spec) || phi >= 1.0 - tie_tol)
        return true;
    return !detail::phi0_integral_finite(spec, phi);
}

inline double lt_explosion_before(const ModelSpec& spec, double q, int x, int a, const QuadConfig& cfg = {}) {
    detail::check_levels(x, a);
    const auto psi = psi_q_function(spec, q, cfg);
    if (x == a)
        return 0.0;
    const auto phi = phi_q_function(spec, q, cfg);
    return psi(x) - psi(a) * phi(x) / phi(a);
}

inline double prob_explosion_before(const ModelSpec& spec, int x, int a, const QuadConfig& cfg = {}) {
    detail::check_levels(x, a);
    if (!is_explosive(spec))
        throw UnsupportedRegime("explosivity fails");
    const auto f = phi_0_function(spec, cfg);
    return x == a ? 0.0 : 1.0 - f(x) / f(a);
}

inline double mean_first_passage(const ModelSpec& spec, int x, int a, const QuadConfig& cfg = {}) {
    detail::check_levels(x, a);
    if (x == a)
        throw PreconditionError("mean_first_passage needs a < x");
    if (!certain_extinction(spec, cfg))
        throw UnsupportedRegime("certain extinction fails");
    if (!(root_phi(spec) < 1.0 - tie_tol))
        throw UnsupportedRegime("phi < 1 fails");
    quad::SegmentModel m(spec, 0.0, quad::Segment(0.0, 1.0), false, true);
    m.trim();
    const bool imm = has_immigration(spec);
    quad::CumulativeIntegral L(
        m.segment(), [m, imm](const quad::Point& p) { return imm ? m.spec().mu * m.deficit(p) / std::abs(m.drift(p)) : 0.0; },
        quad::Reference{quad::RefKind::upper_end, 0.0}, -1.0);
    const auto& seg = m.segment();
    const double da = a, dx = x;
    auto weight = [&](const quad::GridNode& n) {
        const double lv = seg.log_v(n.pt);
        const double diff = -std::exp(da * lv) * std::expm1((dx - da) * lv);
        return diff * std::exp(n.L) / std::abs(m.drift(n.pt));
    };
    const auto nodes = quad::build_nodes(L, weight, {0.0}, cfg, -std::numeric_limits<double>::infinity());
    double acc = 0.0;
    for (double w : nodes.weights)
        acc += w;
    return acc;
}

inline double mean_explosion(const ModelSpec& spec, int x, const QuadConfig& cfg = {}) {
    require_valid(spec);
    if (has_immigration(spec))
        throw PreconditionError("mean_explosion needs mu = 0");
    if (!is_explosive(spec))
        throw UnsupportedRegime("explosivity fails");
    if (x < 1)
        throw PreconditionError("mean_explosion needs x >= 1");
    const double varphi = root_varphi(spec);
    quad::SegmentModel m(spec, 0.0, quad::Segment(varphi, 1.0), true, true);
    m.trim();
    quad::CumulativeIntegral I(
        m.segment(), [m](const quad::Point& p) { return 1.0 / std::abs(m.drift(p)); },
        quad::Reference{quad::RefKind::upper_end, 0.0}, -1.0);
    auto weight = [](const quad::GridNode& n) { return n.L; };
    const auto nodes = quad::build_nodes(I, weight, {double(x - 1)}, cfg, -std::numeric_limits<double>::infinity());
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes.weights.size(); ++j)
        acc += nodes.weights[j] * std::exp((x - 1) * nodes.log_v[j]);
    return x * acc;
}

inline double lt_joint_avalanche(const ModelSpec& spec, double q, double qbar, int x, int a,
                                 const QuadConfig& cfg = {}) {
    detail::check_levels(x, a);
    const auto f = phi_q_qbar_function(spec, q, qbar, cfg);
    return x == a ? 1.0 : f(x) / f(a);
}

inline AtMinLaw atmin_law(const ModelSpec& spec, double q, int x, const QuadConfig& cfg = {}) {
    if (x < 0)
        throw PreconditionError("x >= 0");
    if (!(q >= 0))
        throw PreconditionError("q >= 0");
    const auto f = scale_function(spec, q, cfg);
    AtMinLaw law;
    const double fx = f(x);
    std::vector<double> ratio(std::size_t(x) + 1);
    for (int k = 0; k <= x; ++k)
        ratio[k] = k == x ? 1.0 : fx / f(k);
    for (int k = 0; k <= x; ++k)
        law.pmf.push_back(ratio[k] - (k >= 1 ? ratio[k - 1] : 0.0));
    return law;
}

inline double atmin_lt_G(const ModelSpec& spec, double q, double alpha, int x, int k, const QuadConfig& cfg = {}) {
    if (k < 0 || k > x)
        throw PreconditionError("0 <= k <= x");
    if (!(alpha >= 0))
        throw PreconditionError("alpha >= 0");
    const auto law = atmin_law(spec, q, x, cfg);
    if (!(law.pmf[k] > 0))
        throw PreconditionError("P(X_G = k) > 0 fails");
    if (alpha == 0 || k == x)
        return 1.0;
    const auto fq = scale_function(spec, q, cfg);
    const auto fa = scale_function(spec, q + alpha, cfg);
    return fa(x) / fq(x) * fq(k) / fa(k);
}

inline double atmin_lt_residual(const ModelSpec& spec, double q, double alpha, int x, int k,
                                const QuadConfig& cfg = {}) {
    if (!(q > 0))
        throw PreconditionError("atmin_lt_residual needs q > 0");
    if (k < 0 || k > x)
        throw PreconditionError("0 <= k <= x");
    if (!(alpha >= 0))
        throw PreconditionError("alpha >= 0");
    const auto fq = phi_q_function(spec, q, cfg);
    const auto fa = phi_q_function(spec, q + alpha, cfg);
    if (alpha == 0)
        return 1.0;
    const double num = k >= 1 ? 1.0 - fa(k) / fa(k - 1) : 1.0;
    const double den = k >= 1 ? 1.0 - fq(k) / fq(k - 1) : 1.0;
    return q / (q + alpha) * num / den;
}

inline ConditionedGenerator conditioned_generator(const ModelSpec& spec_in, double q, int x_max,
                                                  const QuadConfig& cfg = {}) {
    if (x_max < 1)
        throw PreconditionError("x_max >= 1");
    const auto* tab = std::get_if<TabularOffspring>(&spec_in.offspring);
    if (!tab || std::holds_alternative<SibuyaImmigration>(spec_in.immigration))
        throw PreconditionError("conditioned_generator needs tabular laws");
    const ModelSpec spec = normalize_remove_p1(spec_in);
    const double varphi = root_varphi(spec);
    const double floor_q = has_immigration(spec) ? spec.mu * (immigration_pgf_unchecked(spec.immigration, varphi) - 1.0) : 0.0;
    if (!(q >= std::max(floor_q, 0.0) - 1e-12))
        throw UnsupportedRegime("q >= mu (r~(varphi) - 1) v 0");
    const auto f = scale_function(spec, q, cfg);
    const auto& p = std::get<TabularOffspring>(spec.offspring).pmf;
    std::vector<double> r; // r[k + 1] = r_k
    if (has_immigration(spec))
        r = std::get<TabularImmigration>(spec.immigration).pmf;
    const double cull = r.empty() ? 0.0 : r[0];
    const double l = spec.lambda, mu = has_immigration(spec) ? spec.mu : 0.0;

    ConditionedGenerator g;
    for (int x = 1; x <= x_max; ++x) {
        GeneratorRow row;
        row.state = x;
        row.leave_rate = q + mu + l * x;
        const double fx = f(x);
        if (x >= 2)
            row.jumps.push_back({x - 1, (p[0] * l * x + cull * mu) * f(x - 1) / (row.leave_rate * fx)});
        else
            row.kill_rate = (p[0] * l + cull * mu) * f(0) / fx;
        const std::size_t kmax = std::max(p.size() >= 1 ? p.size() - 1 : 0, r.size() >= 2 ? r.size() - 2 : 0);
        for (std::size_t k = 1; k <= kmax; ++k) {
            const double pk = k + 1 < p.size() ? p[k + 1] : 0.0;
            const double rk = k + 1 < r.size() ? r[k + 1] : 0.0;
            const double rate = pk * l * x + mu * rk;
            if (rate > 0)
                row.jumps.push_back({x + int(k), rate * f(double(x + int(k))) / (row.leave_rate * fx)});
        }
        g.rows.push_back(std::move(row));
    }
    return g;
}

namespace detail {

inline std::vector<double> sibuya_pmf(double alpha, double tilt, double tol) {
    // r_k = alpha prod_{j=2}^k (j - 1 - alpha)/j, k >= 1; index 0 unused
    std::vector<double> out{0.0};
    double pk = alpha, tk = tilt;
    for (int k = 1; k < 100000; ++k) {
        out.push_back(pk * tk);
        if (tk < tol)
            break;
        pk *= (k - alpha) / (k + 1);
        tk *= tilt;
    }
    return out;
}

} // namespace detail

inline ModelSpec tilted_model(const ModelSpec& spec, double qbar, const QuadConfig& cfg = {}) {
    require_valid(spec);
    cfg.check();
    if (!(qbar >= 0))
        throw PreconditionError("qbar >= 0");
    const double vb = root_varphi_qbar(spec, qbar);
    if (!(vb < 1.0 - 1e-12))
        throw UnsupportedRegime("varphi_qbar < 1");
    ModelSpec out;
    out.lambda = spec.lambda + qbar;
    std::vector<double> p;
    if (auto t = std::get_if<TabularOffspring>(&spec.offspring)) {
        p = t->pmf;
        double z = 1.0;
        for (auto& pk : p) {
            pk *= z;
            z *= vb;
        }
    } else {
        const auto& s = std::get<SibuyaMixOffspring>(spec.offspring);
        p = detail::sibuya_pmf(s.alpha, vb, 1e-13);
        for (auto& pk : p)
            pk *= 1.0 - s.p0;
        p[0] = s.p0;
    }
    double total = 0.0;
    for (double pk : p)
        total += pk;
    for (auto& pk : p)
        pk /= total;
    out.offspring = TabularOffspring{p};

    if (has_immigration(spec)) {
        std::vector<double> r;
        if (auto t = std::get_if<TabularImmigration>(&spec.immigration)) {
            r = t->pmf;
            double z = 1.0 / vb;
            for (auto& rk : r) {
                rk *= z;
                z *= vb;
            }
        } else {
            const auto& s = std::get<SibuyaImmigration>(spec.immigration);
            auto tail = detail::sibuya_pmf(s.alpha, vb, 1e-13);
            r.assign(tail.size() + 1, 0.0);
            for (std::size_t k = 1; k < tail.size(); ++k)
                r[k + 1] = tail[k];
        }
        double rsum = 0.0;
        for (double rk : r)
            rsum += rk;
        for (auto& rk : r)
            rk /= rsum;
        out.immigration = TabularImmigration{r};
        out.mu = spec.mu * immigration_pgf_unchecked(spec.immigration, vb);
    }
    if (p.size() > 1 && p[1] > 0)
        out = normalize_remove_p1(out);
    return out;
}

} // namespace bgw
