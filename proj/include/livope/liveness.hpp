#ifndef LIVOPE_LIVENESS_HPP
#define LIVOPE_LIVENESS_HPP

// Discounted liveness Bellman operator
//
//     V(s) = (1 - gamma) + gamma * min{ l(s), V(s') }
//
// with the sparse target l = -1 on goal frames and +1 elsewhere. Along a
// goal-terminated chain the fixed point is V = 1 - 2 gamma^k, k being the
// number of steps to the goal, which gives the steps <-> value conversion.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "livope/dataset.hpp"
#include "livope/error.hpp"

namespace livope {

class Discount {
public:
    explicit Discount(double gamma = 0.993) : gamma_(gamma) {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw ConfigError("discount factor must lie strictly inside (0, 1), got " + std::to_string(gamma));
    }

    double gamma() const noexcept { return gamma_; }

private:
    double gamma_;
};

/// Value trace of one episode, one entry per frame.
using ValueTrace = std::vector<double>;

inline double sparse_target(const Frame& f) noexcept { return f.goal ? -1.0 : 1.0; }

struct SparseTarget {
    double operator()(const Frame& f) const noexcept { return sparse_target(f); }
};

/// One application of the operator at a single state. Templated on the scalar
/// so exact rational types can be used to check contraction without rounding.
template <class Real>
Real apply_operator_pointwise(const Real& target, const Real& next_value, const Real& gamma) {
    const Real lo(-1), hi(1);
    if (target < lo || target > hi || next_value < lo || next_value > hi)
        throw DomainError("operator inputs must lie in [-1, 1]");
    const Real& m = target < next_value ? target : next_value;
    return (Real(1) - gamma) + gamma * m;
}

inline double apply_operator_pointwise(double target, double next_value, const Discount& cfg) {
    return apply_operator_pointwise<double>(target, next_value, cfg.gamma());
}

/// Backward pass over one episode. Goal frames are pinned to -1, the final
/// frame takes its own target, and every other frame applies the operator to
/// its successor's value.
template <class Target>
ValueTrace backward_episode_values(const Episode& e, const Discount& cfg, Target&& target) {
    if (e.frames.empty()) throw DomainError("cannot evaluate an empty episode");
    const std::size_t n = e.frames.size();
    ValueTrace v(n);
    const auto& last = e.frames.back();
    v[n - 1] = last.goal ? -1.0 : static_cast<double>(target(last));
    for (std::size_t i = n - 1; i-- > 0;) {
        const auto& f = e.frames[i];
        v[i] = f.goal ? -1.0 : apply_operator_pointwise(static_cast<double>(target(f)), v[i + 1], cfg);
    }
    return v;
}

inline ValueTrace backward_episode_values(const Episode& e, const Discount& cfg) {
    return backward_episode_values(e, cfg, SparseTarget{});
}

/// Closed form of the goal-terminated recurrence: 1 - 2 gamma^k.
inline double value_from_steps(double k, const Discount& cfg) {
    if (!(k >= 0.0)) throw DomainError("steps must be nonnegative");
    return 1.0 - 2.0 * std::pow(cfg.gamma(), k);
}

struct LivenessSteps {};

/// Values are normalized discounted returns of -1 per step; `norm` undoes the
/// reward normalization before inverting the geometric series.
struct CumulativeSteps {
    double norm = 1.0;
};

using StepsModel = std::variant<LivenessSteps, CumulativeSteps>;

inline double steps_from_value(double v, const Discount& cfg, const StepsModel& model = LivenessSteps{}) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double log_gamma = std::log(cfg.gamma());
    if (std::holds_alternative<LivenessSteps>(model)) {
        if (std::isnan(v)) throw DomainError("value is NaN");
        if (v < -1.0) throw DomainError("liveness value below -1");
        if (v >= 1.0) return inf;
        if (v == -1.0) return 0.0;
        return std::max(0.0, std::log((1.0 - v) / 2.0) / log_gamma);
    }
    const double norm = std::get<CumulativeSteps>(model).norm;
    if (!(norm > 0.0)) throw ConfigError("cumulative normalization must be positive");
    if (std::isnan(v)) throw DomainError("value is NaN");
    const double drop = (1.0 - cfg.gamma()) * v * norm;
    const double arg = 1.0 + drop;
    // Within rounding of the asymptote the argument carries no information.
    if (arg <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(drop))) return inf;
    if (arg >= 1.0) return 0.0;
    return std::log(arg) / log_gamma;
}

struct NamedTrace {
    std::string episode_id;
    ValueTrace values;
};

/// CSV export with header episode_id,t,value,steps_estimate.
inline void write_value_traces_csv(std::ostream& out, const std::vector<NamedTrace>& traces, const Discount& cfg,
                                   const StepsModel& model = LivenessSteps{}) {
    out << "episode_id,t,value,steps_estimate\n";
    for (const auto& tr : traces)
        for (std::size_t t = 0; t < tr.values.size(); ++t) {
            double v = tr.values[t];
            if (std::holds_alternative<LivenessSteps>(model)) v = std::clamp(v, -1.0, 1.0);
            out << tr.episode_id << ',' << t << ',' << detail::format_double(tr.values[t]) << ','
                << detail::format_double(steps_from_value(v, cfg, model)) << '\n';
        }
}

} // namespace livope

#endif
