#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "bgw/error.hpp"

namespace bgw {

// Offspring law with finite support: pmf[k] = P(k offspring).
struct TabularOffspring {
    std::vector<double> pmf;
};

// p~(z) = p0 + (1 - p0) (1 - (1 - z)^alpha)
struct SibuyaMixOffspring {
    double p0 = 0.5;
    double alpha = 0.5;
};

using OffspringLaw = std::variant<TabularOffspring, SibuyaMixOffspring>;

struct NoImmigration {};

// pmf[k + 1] = r_k for k = -1, 0, 1, ...; r_0 must be 0.
struct TabularImmigration {
    std::vector<double> pmf;

    double cull() const { return pmf.empty() ? 0.0 : pmf[0]; }
};

// r~(z) = 1 - (1 - z)^alpha, r_{-1} = 0
struct SibuyaImmigration {
    double alpha = 0.5;
};

using ImmigrationLaw = std::variant<NoImmigration, TabularImmigration, SibuyaImmigration>;

struct ModelSpec {
    OffspringLaw offspring = TabularOffspring{{1.0}};
    double lambda = 1.0;
    ImmigrationLaw immigration = NoImmigration{};
    double mu = 0.0;
    // Rate before the p1 = 0 normalization, when it changed anything.
    std::optional<double> lambda_original;
};

enum class Criticality { subcritical, critical, supercritical };

inline const char* to_string(Criticality c) {
    switch (c) {
    case Criticality::subcritical: return "subcritical";
    case Criticality::critical: return "critical";
    case Criticality::supercritical: return "supercritical";
    }
    return "?";
}

struct RegimeReport {
    double varphi = 1.0;
    double phi = 0.0;
    Criticality criticality = Criticality::subcritical;
    bool explosive = false;
    double mean_offspring = 0.0;
    bool tangent = false; // |p~'(varphi) - 1| < 1e-9
};

inline TabularImmigration make_tabular_immigration(double cull, const std::vector<double>& up) {
    TabularImmigration law;
    law.pmf.assign(up.size() + 2, 0.0);
    law.pmf[0] = cull;
    for (std::size_t k = 0; k < up.size(); ++k)
        law.pmf[k + 2] = up[k];
    return law;
}

inline bool has_immigration(const ModelSpec& s) {
    return s.mu > 0 && !std::holds_alternative<NoImmigration>(s.immigration);
}

// mu * r_{-1}
inline double culling_rate(const ModelSpec& s) {
    if (!has_immigration(s))
        return 0.0;
    if (auto t = std::get_if<TabularImmigration>(&s.immigration))
        return s.mu * t->cull();
    return 0.0;
}

namespace detail {

// ((c + d)^k - c^k) / d for k = 0..n-1, all terms nonnegative when c, c + d >= 0.
inline double power_difference_sum(const std::vector<double>& coef, std::size_t first,
                                   double c, double d) {
    double e = 0.0, ck = 1.0, acc = 0.0;
    const double cd = c + d;
    for (std::size_t k = 1; first + k < coef.size(); ++k) {
        e = cd * e + ck;
        ck *= c;
        acc += coef[first + k] * e;
    }
    return acc;
}

inline double polyval(const std::vector<double>& coef, std::size_t first, double v) {
    double acc = 0.0;
    for (std::size_t k = coef.size(); k-- > first;)
        acc = acc * v + coef[k];
    return acc;
}

inline double polyderiv(const std::vector<double>& coef, std::size_t first, double v) {
    double acc = 0.0;
    for (std::size_t k = coef.size(); k-- > first + 1;)
        acc = acc * v + double(k - first) * coef[k];
    return acc;
}

// (1 - c - d)^a - (1 - c)^a, accurate when d is small relative to 1 - c.
inline double sibuya_power_difference(double alpha, double c, double d) {
    const double s = 1.0 - c;
    if (s <= 0.0)
        return std::pow(-d, alpha);
    return std::pow(s, alpha) * std::expm1(alpha * std::log1p(-d / s));
}

} // namespace detail

// Unchecked evaluations used by the numerics; v in [0, 1].
inline double offspring_pgf(const OffspringLaw& law, double v) {
    if (auto t = std::get_if<TabularOffspring>(&law))
        return detail::polyval(t->pmf, 0, v);
    const auto& s = std::get<SibuyaMixOffspring>(law);
    return 1.0 - (1.0 - s.p0) * std::pow(1.0 - v, s.alpha);
}

// p~(c + d) - p~(c)
inline double offspring_pgf_delta(const OffspringLaw& law, double c, double d) {
    if (auto t = std::get_if<TabularOffspring>(&law))
        return d * detail::power_difference_sum(t->pmf, 0, c, d);
    const auto& s = std::get<SibuyaMixOffspring>(law);
    return -(1.0 - s.p0) * detail::sibuya_power_difference(s.alpha, c, d);
}

inline double offspring_pgf_derivative(const OffspringLaw& law, double v) {
    if (auto t = std::get_if<TabularOffspring>(&law))
        return detail::polyderiv(t->pmf, 0, v);
    const auto& s = std::get<SibuyaMixOffspring>(law);
    if (v >= 1.0)
        return std::numeric_limits<double>::infinity();
    return (1.0 - s.p0) * s.alpha * std::pow(1.0 - v, s.alpha - 1.0);
}

inline double offspring_mean(const OffspringLaw& law) { return offspring_pgf_derivative(law, 1.0); }

inline double immigration_pgf_unchecked(const ImmigrationLaw& law, double v) {
    if (auto t = std::get_if<TabularImmigration>(&law))
        return t->cull() / v + detail::polyval(t->pmf, 1, v);
    if (auto s = std::get_if<SibuyaImmigration>(&law))
        return 1.0 - std::pow(1.0 - v, s->alpha);
    return 1.0;
}

// r~(c + d) - r~(c)
inline double immigration_pgf_delta(const ImmigrationLaw& law, double c, double d) {
    if (auto t = std::get_if<TabularImmigration>(&law))
        return -t->cull() * d / (c * (c + d)) + d * detail::power_difference_sum(t->pmf, 1, c, d);
    if (auto s = std::get_if<SibuyaImmigration>(&law))
        return -detail::sibuya_power_difference(s->alpha, c, d);
    return 0.0;
}

inline double immigration_pgf_derivative(const ImmigrationLaw& law, double v) {
    if (auto t = std::get_if<TabularImmigration>(&law))
        return -t->cull() / (v * v) + detail::polyderiv(t->pmf, 1, v);
    if (auto s = std::get_if<SibuyaImmigration>(&law)) {
        if (v >= 1.0)
            return std::numeric_limits<double>::infinity();
        return s->alpha * std::pow(1.0 - v, s->alpha - 1.0);
    }
    return 0.0;
}

// 1 - r~(v) given t = 1 - v, accurate for small t and for small v.
inline double immigration_deficit(const ImmigrationLaw& law, double t, double v) {
    if (auto s = std::get_if<SibuyaImmigration>(&law))
        return std::pow(t, s->alpha);
    if (auto tab = std::get_if<TabularImmigration>(&law)) {
        const double cull = tab->cull() > 0 ? -tab->cull() * t / v : 0.0;
        return cull + t * detail::power_difference_sum(tab->pmf, 1, 1.0, -t);
    }
    return 0.0;
}

inline double immigration_deficit(const ImmigrationLaw& law, double t) {
    return immigration_deficit(law, t, 1.0 - t);
}

inline void check_unit_interval(double v) {
    if (!(v > 0.0 && v <= 1.0))
        throw DomainError("pgf argument must lie in (0,1], got " + std::to_string(v));
}

inline double pgf_offspring(const OffspringLaw& law, double v) {
    check_unit_interval(v);
    return offspring_pgf(law, v);
}

inline double pgf_immigration(const ImmigrationLaw& law, double v) {
    check_unit_interval(v);
    if (std::holds_alternative<NoImmigration>(law))
        throw PreconditionError("no immigration law");
    return immigration_pgf_unchecked(law, v);
}

inline ModelSpec normalize_remove_p1(const ModelSpec& spec) {
    auto t = std::get_if<TabularOffspring>(&spec.offspring);
    if (!t)
        throw PreconditionError("p1 normalization needs a tabular offspring law");
    if (t->pmf.size() < 2 || t->pmf[1] == 0.0)
        return spec;
    const double p1 = t->pmf[1];
    if (p1 >= 1.0)
        throw PreconditionError("p1 = 1: degenerate offspring law");
    ModelSpec out = spec;
    auto& pmf = std::get<TabularOffspring>(out.offspring).pmf;
    for (auto& p : pmf)
        p /= (1.0 - p1);
    pmf[1] = 0.0;
    while (pmf.size() > 1 && pmf.back() == 0.0)
        pmf.pop_back();
    out.lambda = spec.lambda * (1.0 - p1);
    if (!out.lambda_original)
        out.lambda_original = spec.lambda;
    return out;
}

inline std::vector<std::string> validate(const ModelSpec& spec) {
    std::vector<std::string> v;
    auto bad = [](double x) { return !std::isfinite(x); };
    if (bad(spec.lambda) || spec.lambda <= 0)
        v.push_back("lambda > 0");
    if (bad(spec.mu) || spec.mu < 0)
        v.push_back("mu >= 0");

    double p0 = 0.0, p_up = 0.0;
    if (auto t = std::get_if<TabularOffspring>(&spec.offspring)) {
        double sum = 0.0;
        bool range_ok = !t->pmf.empty();
        for (double p : t->pmf) {
            if (bad(p) || p < 0 || p > 1)
                range_ok = false;
            sum += p;
        }
        if (!range_ok)
            v.push_back("offspring probabilities in [0,1]");
        if (std::abs(sum - 1.0) > 1e-12)
            v.push_back("offspring probabilities sum to 1");
        p0 = t->pmf.empty() ? 0.0 : t->pmf[0];
        for (std::size_t k = 2; k < t->pmf.size(); ++k)
            p_up += t->pmf[k];
        if (t->pmf.size() > 1 && t->pmf[1] >= 1.0)
            v.push_back("p1 < 1");
    } else {
        const auto& s = std::get<SibuyaMixOffspring>(spec.offspring);
        if (!(s.p0 > 0 && s.p0 < 1))
            v.push_back("sibuya_mix p0 in (0,1)");
        if (!(s.alpha > 0 && s.alpha < 1))
            v.push_back("sibuya_mix alpha in (0,1)");
        p0 = s.p0;
        p_up = 1.0 - s.p0;
    }
    if (!(p0 > 0))
        v.push_back("p0>0");

    double r_up = 0.0;
    if (auto t = std::get_if<TabularImmigration>(&spec.immigration)) {
        double sum = 0.0;
        bool range_ok = !t->pmf.empty();
        for (double r : t->pmf) {
            if (bad(r) || r < 0 || r > 1)
                range_ok = false;
            sum += r;
        }
        if (!range_ok)
            v.push_back("immigration probabilities in [0,1]");
        if (std::abs(sum - 1.0) > 1e-12)
            v.push_back("immigration probabilities sum to 1");
        if (t->pmf.size() > 1 && t->pmf[1] != 0.0)
            v.push_back("r0 = 0");
        for (std::size_t k = 2; k < t->pmf.size(); ++k)
            r_up += t->pmf[k];
    } else if (auto s = std::get_if<SibuyaImmigration>(&spec.immigration)) {
        if (!(s->alpha > 0 && s->alpha < 1))
            v.push_back("sibuya alpha in (0,1)");
        r_up = 1.0;
    } else if (spec.mu > 0) {
        v.push_back("mu > 0 requires an immigration law");
    }
    if (!(p_up > 0) && !(spec.mu * r_up > 0))
        v.push_back("a.s. nonincreasing paths");
    return v;
}

inline void require_valid(const ModelSpec& spec) {
    auto v = validate(spec);
    if (!v.empty()) {
        std::string msg = "invalid model:";
        for (auto& s : v)
            msg += " [" + s + "]";
        throw PreconditionError(msg);
    }
}

namespace detail {

constexpr double root_eps = 1e-14;

inline int digits_for(double tol) {
    if (!(tol > 0))
        throw PreconditionError("tol > 0");
    return std::clamp(int(std::ceil(-std::log2(tol))) + 2, 10, std::numeric_limits<double>::digits - 1);
}

// Root of a convex or concave function in (lo, hi) with a sign change, Newton polished.
template <class F>
double bracketed_root(F f, double lo, double hi, double tol) {
    std::uintmax_t iters = 200;
    auto fn = [&](double z) { return f(z); };
    const double guess = 0.5 * (lo + hi);
    return boost::math::tools::newton_raphson_iterate(fn, guess, lo, hi, digits_for(tol), iters);
}

} // namespace detail

inline double root_varphi(const ModelSpec& spec, double tol = 1e-15) {
    detail::digits_for(tol);
    if (auto s = std::get_if<SibuyaMixOffspring>(&spec.offspring))
        return 1.0 - std::pow(1.0 - s->p0, 1.0 / (1.0 - s->alpha));
    const auto& law = spec.offspring;
    if (offspring_mean(law) <= 1.0)
        return 1.0;
    // g(1 - t) = p~(1 - t) - (1 - t) < 0 for small t on the supercritical side.
    double hi = 0.5;
    for (int k = 1; k < 60; ++k) {
        const double t = std::ldexp(1.0, -k);
        if (offspring_pgf_delta(law, 1.0, -t) + t < 0) {
            hi = 1.0 - t;
            break;
        }
    }
    auto g = [&](double z) {
        return std::make_pair(offspring_pgf(law, z) - z, offspring_pgf_derivative(law, z) - 1.0);
    };
    return detail::bracketed_root(g, detail::root_eps, hi, tol);
}

// Smaller root of q = mu (r~(z) - 1); 0 when mu r_{-1} = 0.
inline double root_phi_q(const ModelSpec& spec, double q, double tol = 1e-15) {
    if (!(q >= 0))
        throw PreconditionError("q >= 0");
    if (culling_rate(spec) <= 0)
        return 0.0;
    const auto& law = spec.immigration;
    double hi = 1.0;
    if (q == 0) {
        if (immigration_pgf_derivative(law, 1.0) <= 0)
            return 1.0;
        hi = 0.0;
        for (int k = 1; k < 60; ++k) {
            const double t = std::ldexp(1.0, -k);
            if (immigration_pgf_delta(law, 1.0, -t) < 0) {
                hi = 1.0 - t;
                break;
            }
        }
        if (hi == 0.0)
            return 1.0;
    }
    double lo = 0.5;
    while (spec.mu * (immigration_pgf_unchecked(law, lo) - 1.0) - q <= 0 && lo > 1e-300)
        lo *= 0.5;
    auto h = [&](double z) {
        return std::make_pair(spec.mu * (immigration_pgf_unchecked(law, z) - 1.0) - q,
                              spec.mu * immigration_pgf_derivative(law, z));
    };
    return detail::bracketed_root(h, lo, std::min(hi, 1.0 - detail::root_eps * (q > 0)), tol);
}

inline double root_phi(const ModelSpec& spec, double tol = 1e-15) { return root_phi_q(spec, 0.0, tol); }

// Root of (lambda + qbar)/lambda = p~(z)/z in (0, 1); varphi at qbar = 0.
inline double root_varphi_qbar(const ModelSpec& spec, double qbar, double tol = 1e-15) {
    if (!(qbar >= 0))
        throw PreconditionError("qbar >= 0");
    const double varphi = root_varphi(spec, tol);
    if (qbar == 0)
        return varphi;
    const auto& law = spec.offspring;
    const double l = spec.lambda;
    auto f = [&](double z) {
        return std::make_pair(l * offspring_pgf(law, z) - (l + qbar) * z,
                              l * offspring_pgf_derivative(law, z) - (l + qbar));
    };
    return detail::bracketed_root(f, 0.0, varphi, tol);
}

inline bool is_explosive(const ModelSpec& spec) {
    // z - p~(z) ~ (1 - p0)(1 - z)^alpha near 1 for sibuya_mix, so the integral converges.
    return std::holds_alternative<SibuyaMixOffspring>(spec.offspring);
}

inline RegimeReport classify(const ModelSpec& spec, double tol = 1e-15) {
    RegimeReport r;
    r.mean_offspring = offspring_mean(spec.offspring);
    r.varphi = root_varphi(spec, tol);
    r.phi = root_phi(spec, tol);
    r.explosive = is_explosive(spec);
    if (std::isinf(r.mean_offspring) || r.mean_offspring > 1.0 + 1e-9)
        r.criticality = Criticality::supercritical;
    else if (r.mean_offspring < 1.0 - 1e-9)
        r.criticality = Criticality::subcritical;
    else
        r.criticality = Criticality::critical;
    r.tangent = std::abs(offspring_pgf_derivative(spec.offspring, r.varphi) - 1.0) < 1e-9;
    return r;
}

} // namespace bgw
