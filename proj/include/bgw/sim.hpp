#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <thread>
#include <optional>
#include <vector>

#include "bgw/control.hpp"
#include "bgw/model.hpp"

namespace bgw::sim {

struct SimConfig {
    std::uint64_t seed = 1;
    std::int64_t n_paths = 100000;
    std::int64_t max_jumps = 10'000'000;
    std::int64_t explosion_threshold = 1'000'000;
    double horizon = std::numeric_limits<double>::infinity();
    double q = 0.0;  // rate of the killing clock for clock experiments
    int threads = 0; // 0: hardware concurrency

    void check() const {
        if (n_paths < 1)
            throw PreconditionError("n_paths >= 1");
        if (explosion_threshold < 2)
            throw PreconditionError("explosion_threshold >= 2");
        if (max_jumps < 1)
            throw PreconditionError("max_jumps >= 1");
        if (!(horizon > 0))
            throw PreconditionError("horizon > 0");
    }
};

enum class Outcome { hit_level, exceeded_threshold, censored, clock_rang, horizon };

inline const char* to_string(Outcome k) {
    switch (k) {
    case Outcome::hit_level: return "hit_level";
    case Outcome::exceeded_threshold: return "exceeded_threshold";
    case Outcome::censored: return "censored";
    case Outcome::clock_rang: return "clock_rang";
    case Outcome::horizon: return "horizon";
    }
    return "?";
}

struct PathOutcome {
    Outcome kind = Outcome::censored;
    double time = 0.0;
    std::int64_t minimum = 0;
    double min_time = 0.0; // time of the last strict new minimum
    double area = 0.0;     // integral of X dt up to `time`
    std::int64_t jumps = 0;
    double proxy_time = std::numeric_limits<double>::quiet_NaN(); // first time X >= threshold/10
    double clock = std::numeric_limits<double>::infinity();       // ring time of the killing clock
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n_effective = 0;
    double censored_fraction = 0.0;
    double bias_bound = 0.0;
    double proxy_difference = 0.0; // estimate at threshold/10 minus estimate at threshold
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline Rng path_rng(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double exponential(Rng& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

constexpr std::int64_t count_cap = std::int64_t(1) << 62;

// P(S > k) = prod_{j=1}^k (1 - alpha/j) for the Sibuya law.
inline double sibuya_survival(double alpha, double k) {
    if (k < 1)
        return 1.0;
    return std::exp(std::lgamma(k + 1.0 - alpha) - std::lgamma(1.0 - alpha) - std::lgamma(k + 1.0));
}

// Inverse-CDF Sibuya sampler: tabulated survival up to k = 4096, asymptotic tail beyond.
class SibuyaSampler {
public:
    static constexpr int table_size = 4096;

    explicit SibuyaSampler(double alpha) : alpha_(alpha), surv_(table_size + 1) {
        surv_[0] = 1.0;
        for (int k = 1; k <= table_size; ++k)
            surv_[std::size_t(k)] = surv_[std::size_t(k - 1)] * (1.0 - alpha / k);
    }

    std::int64_t operator()(Rng& rng) const {
        const double u = uniform01(rng);
        if (u == 0.0)
            return 1;
        if (u > surv_.back()) {
            // first k with S(k) < u; S is decreasing and most mass sits at small k
            for (std::size_t k = 1; k <= 16; ++k)
                if (surv_[k] < u)
                    return std::int64_t(k);
            auto it = std::partition_point(surv_.begin() + 17, surv_.end(), [u](double v) { return v >= u; });
            return std::int64_t(it - surv_.begin());
        }
        // S(k) ~ k^-alpha / Gamma(1 - alpha); the relative error is O(1/k)
        const double guess = std::ceil(std::pow(std::tgamma(1.0 - alpha_) * u, -1.0 / alpha_));
        if (!(guess < 1e6))
            return guess >= double(count_cap) || !std::isfinite(guess) ? count_cap : std::int64_t(guess);
        const std::int64_t floor_k = table_size + 1;
        auto k = std::max(std::int64_t(guess), floor_k);
        double s = sibuya_survival(alpha_, double(k));
        while (s >= u) {
            ++k;
            s *= 1.0 - alpha_ / double(k);
        }
        while (k > floor_k) {
            const double prev = s / (1.0 - alpha_ / double(k));
            if (prev >= u)
                break;
            s = prev;
            --k;
        }
        return k;
    }

private:
    double alpha_;
    std::vector<double> surv_;
};

inline std::int64_t sample_sibuya(double alpha, Rng& rng) { return SibuyaSampler(alpha)(rng); }

// Draws offspring counts and immigration jumps for one model.
class Sampler {
public:
    explicit Sampler(const ModelSpec& spec) : spec_(spec) {
        if (auto t = std::get_if<TabularOffspring>(&spec.offspring))
            off_cdf_ = cdf(t->pmf);
        if (auto t = std::get_if<TabularImmigration>(&spec.immigration))
            imm_cdf_ = cdf(t->pmf);
        if (auto t = std::get_if<SibuyaMixOffspring>(&spec.offspring))
            off_sibuya_.emplace(t->alpha);
        if (auto t = std::get_if<SibuyaImmigration>(&spec.immigration))
            imm_sibuya_.emplace(t->alpha);
    }

    std::int64_t offspring(Rng& rng) const {
        if (auto s = std::get_if<SibuyaMixOffspring>(&spec_.offspring)) {
            if (uniform01(rng) < s->p0)
                return 0;
            return (*off_sibuya_)(rng);
        }
        return std::int64_t(pick(off_cdf_, uniform01(rng)));
    }

    // Signed population change of an immigration/culling event.
    std::int64_t immigration(Rng& rng) const {
        if (imm_sibuya_)
            return (*imm_sibuya_)(rng);
        return std::int64_t(pick(imm_cdf_, uniform01(rng))) - 1;
    }

private:
    static std::vector<double> cdf(const std::vector<double>& pmf) {
        std::vector<double> c(pmf.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < pmf.size(); ++i)
            c[i] = (acc += pmf[i]);
        return c;
    }

    static std::size_t pick(const std::vector<double>& c, double u) {
        std::size_t last = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i] > (i ? c[i - 1] : 0.0))
                last = i;
            if (u < c[i])
                return i;
        }
        return last; // u beyond rounding of the total
    }

    ModelSpec spec_;
    std::vector<double> off_cdf_, imm_cdf_;
    std::optional<SibuyaSampler> off_sibuya_, imm_sibuya_;
};

inline std::int64_t sample_offspring(const OffspringLaw& law, Rng& rng) {
    ModelSpec s;
    s.offspring = law;
    return Sampler(s).offspring(rng);
}

namespace detail {

inline std::int64_t add_capped(std::int64_t x, std::int64_t d) {
    if (d > 0 && x > count_cap - d)
        return count_cap;
    return x + d;
}

} // namespace detail

inline PathOutcome simulate_path(const ModelSpec& spec, const Sampler& sampler, std::int64_t x0, std::int64_t a,
                                 double qclock, const SimConfig& cfg, Rng& rng) {
    PathOutcome o;
    o.minimum = x0;
    if (qclock > 0)
        o.clock = exponential(rng, qclock);
    if (x0 <= a) {
        o.kind = Outcome::hit_level;
        return o;
    }
    const double lambda = spec.lambda;
    const double mu = has_immigration(spec) ? spec.mu : 0.0;
    const std::int64_t thr = cfg.explosion_threshold;
    const std::int64_t proxy_thr = std::max<std::int64_t>(thr / 10, 1);
    const double limit = std::min(cfg.horizon, o.clock);
    std::int64_t x = x0;
    double t = 0.0;
    if (x >= proxy_thr)
        o.proxy_time = 0.0;
    if (x >= thr) {
        o.kind = Outcome::exceeded_threshold;
        return o;
    }
    while (true) {
        if (o.jumps >= cfg.max_jumps) {
            o.kind = Outcome::censored;
            break;
        }
        const double branch_rate = lambda * double(x);
        const double total = branch_rate + mu;
        const double dt = exponential(rng, total);
        if (t + dt >= limit) {
            o.area += double(x) * (limit - t);
            t = limit;
            o.kind = limit == o.clock ? Outcome::clock_rang : Outcome::horizon;
            break;
        }
        o.area += double(x) * dt;
        t += dt;
        ++o.jumps;
        if (uniform01(rng) * total < branch_rate)
            x = detail::add_capped(x, sampler.offspring(rng) - 1);
        else
            x = detail::add_capped(x, sampler.immigration(rng));
        if (x < o.minimum) {
            o.minimum = x;
            o.min_time = t;
        }
        if (x <= a) {
            o.kind = Outcome::hit_level;
            break;
        }
        if (std::isnan(o.proxy_time) && x >= proxy_thr)
            o.proxy_time = t;
        if (x >= thr) {
            o.kind = Outcome::exceeded_threshold;
            break;
        }
    }
    o.time = t;
    return o;
}

// Runs fn(index, rng) for every path, in parallel, results in path order.
template <class T, class F>
std::vector<T> run_paths(const SimConfig& cfg, F fn) {
    cfg.check();
    const std::int64_t n = cfg.n_paths;
    std::vector<T> out(static_cast<std::size_t>(n), T{});
    int nt = cfg.threads > 0 ? cfg.threads : int(std::max(1u, std::thread::hardware_concurrency()));
    nt = int(std::min<std::int64_t>(nt, n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nt));
    auto work = [&](int w) {
        try {
            for (std::int64_t i = w; i < n; i += nt) {
                Rng rng = path_rng(cfg.seed, std::uint64_t(i));
                out[std::size_t(i)] = fn(i, rng);
            }
        } catch (...) {
            errors[std::size_t(w)] = std::current_exception();
        }
    };
    if (nt == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nt; ++w)
            pool.emplace_back(work, w);
        for (auto& th : pool)
            th.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

namespace detail {

// The simulator needs a well-formed model but not the standing assumption
// that paths can increase; a pure death chain is a useful test case.
inline void require_simulable(const ModelSpec& spec) {
    std::string msg;
    for (const auto& v : validate(spec))
        if (v != "a.s. nonincreasing paths")
            msg += " [" + v + "]";
    if (!msg.empty())
        throw PreconditionError("invalid model:" + msg);
}

} // namespace detail

inline std::vector<PathOutcome> simulate_paths(const ModelSpec& spec, std::int64_t x0, std::int64_t a, double qclock,
                                               const SimConfig& cfg) {
    detail::require_simulable(spec);
    const Sampler sampler(spec);
    return run_paths<PathOutcome>(cfg, [&](std::int64_t, Rng& rng) {
        return simulate_path(spec, sampler, x0, a, qclock, cfg, rng);
    });
}

namespace detail {

// Pairwise summation in index order; deterministic for a given input.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

} // namespace detail

// Mean and standard error of the included samples; `censored` counts excluded ones.
inline Estimate summarize(const std::vector<double>& values, std::int64_t censored, std::int64_t total) {
    Estimate e;
    e.n_effective = std::int64_t(values.size());
    e.censored_fraction = total > 0 ? double(censored) / double(total) : 0.0;
    if (values.empty())
        return e;
    e.mean = detail::pairwise_sum(values.data(), values.size()) / double(values.size());
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        sq[i] = (values[i] - e.mean) * (values[i] - e.mean);
    const double n = double(values.size());
    const double var = values.size() > 1 ? detail::pairwise_sum(sq.data(), sq.size()) / (n - 1.0) : 0.0;
    e.std_error = std::sqrt(var / n);
    return e;
}

namespace detail {

inline double discount_horizon(double rate, double horizon) {
    return rate > 0 ? std::min(horizon, 40.0 / rate) : horizon;
}

// Weighted estimate over paths; weight(o) is NaN for excluded (censored) paths.
template <class W>
Estimate weighted(const std::vector<PathOutcome>& paths, W weight, double discount) {
    std::vector<double> vals;
    vals.reserve(paths.size());
    std::int64_t censored = 0;
    double bound = 0.0;
    for (const auto& o : paths) {
        if (o.kind == Outcome::censored) {
            ++censored;
            if (discount > 0)
                bound += std::exp(-discount * o.time);
            continue;
        }
        if (o.kind == Outcome::horizon && discount > 0)
            bound += std::exp(-discount * o.time);
        vals.push_back(weight(o));
    }
    Estimate e = summarize(vals, censored, std::int64_t(paths.size()));
    e.bias_bound = bound / double(paths.size());
    return e;
}

} // namespace detail

// E_x[exp(-q T_a - qbar int_0^T X dt); T_a < inf]
inline Estimate estimate_joint_avalanche(const ModelSpec& spec, double q, double qbar, std::int64_t x, std::int64_t a,
                                         SimConfig cfg) {
    cfg.horizon = detail::discount_horizon(q + qbar, cfg.horizon);
    const auto paths = simulate_paths(spec, x, a, 0.0, cfg);
    return detail::weighted(
        paths,
        [&](const PathOutcome& o) { return o.kind == Outcome::hit_level ? std::exp(-q * o.time - qbar * o.area) : 0.0; },
        q + qbar);
}

inline Estimate estimate_lt_passage(const ModelSpec& spec, double q, std::int64_t x, std::int64_t a,
                                    const SimConfig& cfg) {
    return estimate_joint_avalanche(spec, q, 0.0, x, a, cfg);
}

// Mean of T_a over paths that reach a.
inline Estimate estimate_mean_passage(const ModelSpec& spec, std::int64_t x, std::int64_t a, const SimConfig& cfg) {
    const auto paths = simulate_paths(spec, x, a, 0.0, cfg);
    std::vector<double> vals;
    std::int64_t censored = 0;
    for (const auto& o : paths) {
        if (o.kind == Outcome::hit_level)
            vals.push_back(o.time);
        else
            ++censored;
    }
    return summarize(vals, censored, std::int64_t(paths.size()));
}

// E_x[exp(-q zeta); zeta < T_a] with the threshold crossing standing in for zeta.
inline Estimate estimate_explosion(const ModelSpec& spec, double q, std::int64_t x, std::int64_t a, SimConfig cfg) {
    cfg.horizon = detail::discount_horizon(q, cfg.horizon);
    const auto paths = simulate_paths(spec, x, a, 0.0, cfg);
    auto main = [&](const PathOutcome& o) { return o.kind == Outcome::exceeded_threshold ? std::exp(-q * o.time) : 0.0; };
    auto proxy = [&](const PathOutcome& o) { return std::isnan(o.proxy_time) ? 0.0 : std::exp(-q * o.proxy_time); };
    Estimate e = detail::weighted(paths, main, q);
    e.proxy_difference = detail::weighted(paths, proxy, q).mean - e.mean;
    return e;
}

// E_x[zeta; zeta < T_a] with the same threshold proxy.
inline Estimate estimate_mean_explosion(const ModelSpec& spec, std::int64_t x, std::int64_t a, const SimConfig& cfg) {
    const auto paths = simulate_paths(spec, x, a, 0.0, cfg);
    auto main = [](const PathOutcome& o) { return o.kind == Outcome::exceeded_threshold ? o.time : 0.0; };
    auto proxy = [](const PathOutcome& o) {
        return o.kind == Outcome::exceeded_threshold && !std::isnan(o.proxy_time) ? o.proxy_time : 0.0;
    };
    Estimate e = detail::weighted(paths, main, 0.0);
    e.proxy_difference = detail::weighted(paths, proxy, 0.0).mean - e.mean;
    return e;
}

// Running minimum at an independent exponential time, with G and e_q - G.
struct AtMinSample {
    std::int64_t level = 0;
    double g = 0.0;
    double clock = 0.0;
    bool valid = false;
};

inline std::vector<AtMinSample> sample_atmin(const ModelSpec& spec, double q, std::int64_t x, const SimConfig& cfg) {
    if (!(q > 0))
        throw PreconditionError("sample_atmin needs q > 0");
    const auto paths = simulate_paths(spec, x, 0, q, cfg);
    std::vector<AtMinSample> out;
    out.reserve(paths.size());
    for (const auto& o : paths) {
        AtMinSample s;
        s.clock = o.clock;
        if (o.kind == Outcome::hit_level) {
            s.valid = o.time < o.clock;
            s.level = 0;
            s.g = o.time;
        } else if (o.kind == Outcome::clock_rang || o.kind == Outcome::exceeded_threshold) {
            // past the threshold the running minimum is final up to the proxy bias
            s.valid = true;
            s.level = o.minimum;
            s.g = o.min_time;
        }
        out.push_back(s);
    }
    return out;
}

inline std::vector<Estimate> estimate_atmin_law(const ModelSpec& spec, double q, std::int64_t x, const SimConfig& cfg) {
    const auto s = sample_atmin(spec, q, x, cfg);
    std::vector<Estimate> out;
    std::int64_t invalid = 0;
    for (const auto& e : s)
        invalid += !e.valid;
    for (std::int64_t k = 0; k <= x; ++k) {
        std::vector<double> ind;
        ind.reserve(s.size());
        for (const auto& e : s)
            if (e.valid)
                ind.push_back(e.level == k ? 1.0 : 0.0);
        out.push_back(summarize(ind, invalid, std::int64_t(s.size())));
    }
    return out;
}

// E[exp(-alpha G) | X_G = k] (residual = false) or E[exp(-alpha (e_q - G)) | X_G = k].
inline Estimate estimate_atmin_lt(const ModelSpec& spec, double q, double alpha, std::int64_t x, std::int64_t k,
                                  bool residual, const SimConfig& cfg) {
    const auto s = sample_atmin(spec, q, x, cfg);
    std::vector<double> vals;
    std::int64_t other = 0;
    for (const auto& e : s) {
        if (!e.valid || e.level != k) {
            ++other;
            continue;
        }
        vals.push_back(std::exp(-alpha * (residual ? e.clock - e.g : e.g)));
    }
    return summarize(vals, other, std::int64_t(s.size()));
}

// Immigration policies for the control problem.
struct Policy {
    enum class Kind { barrier, topup, custom } kind = Kind::barrier;
    std::int64_t level = 0; // barrier a, or top-up margin m
    std::function<std::int64_t(std::int64_t)> rule; // custom: population -> immigrants

    static Policy barrier(std::int64_t a) { return {Kind::barrier, a, {}}; }
    static Policy topup(std::int64_t m) { return {Kind::topup, m, {}}; }
    static Policy custom(std::function<std::int64_t(std::int64_t)> f) { return {Kind::custom, 0, std::move(f)}; }

    std::int64_t immigrants(std::int64_t x, std::int64_t floor) const {
        switch (kind) {
        case Kind::barrier: return std::max<std::int64_t>(level + 1 - x, 0);
        case Kind::topup: return std::max<std::int64_t>(floor + level - x, 0);
        case Kind::custom: return rule(x);
        }
        return 0;
    }
};

// Mean discounted immigration cost of a policy started from x0. The policy acts
// at time 0 and after every death event.
inline Estimate simulate_controlled(const ControlProblem& pb, const Policy& policy, std::int64_t x0, SimConfig cfg) {
    require_valid(pb.spec);
    if (has_immigration(pb.spec))
        throw PreconditionError("control problem needs mu = 0");
    if (policy.kind == Policy::Kind::barrier && policy.level < pb.floor)
        throw PreconditionError("barrier a >= floor");
    cfg.horizon = detail::discount_horizon(pb.q, cfg.horizon);
    const Sampler sampler(pb.spec);
    const double q = pb.q, lambda = pb.spec.lambda;
    const std::int64_t floor = pb.floor, thr = cfg.explosion_threshold;
    auto costs = run_paths<double>(cfg, [&](std::int64_t, Rng& rng) {
        std::int64_t x = x0;
        double t = 0.0, cost = 0.0;
        auto act = [&] {
            const std::int64_t c = policy.immigrants(x, floor);
            if (c < 0)
                throw PreconditionError("policy returned a negative immigration");
            if (c > 0) {
                cost += std::exp(-q * t) * double(c);
                x += c;
            }
            if (x <= floor)
                throw PreconditionError("admissibility violated: population reached the floor");
        };
        act();
        std::int64_t jumps = 0;
        while (x < thr && jumps < cfg.max_jumps) {
            const double dt = exponential(rng, lambda * double(x));
            if (t + dt >= cfg.horizon)
                break;
            t += dt;
            ++jumps;
            const std::int64_t k = sampler.offspring(rng);
            x = detail::add_capped(x, k - 1);
            if (k == 0)
                act();
        }
        return cost;
    });
    return summarize(costs, 0, cfg.n_paths);
}

} // namespace bgw::sim
