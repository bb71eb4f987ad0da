#ifndef LIVOPE_VALUE_LEARNING_HPP
#define LIVOPE_VALUE_LEARNING_HPP

// Two-stage evaluation with a value network.
//
// Stage 1 regresses an anchor network onto sparse backward values of success
// frames up to the last goal, and onto 1 everywhere else. Stage 2 runs fitted
// value iteration with the liveness operator, using min(anchor, sparse) as the
// per-frame target when bootstrapping is enabled.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "livope/dataset.hpp"
#include "livope/liveness.hpp"
#include "livope/nn/mlp.hpp"
#include "livope/replay.hpp"
#include "livope/training.hpp"

namespace livope {

/// Stage-1 regression targets, one per frame row of the table.
inline std::vector<double> anchor_regression_targets(const Dataset& d, const Discount& gamma) {
    std::vector<double> y;
    y.reserve(d.num_frames());
    for (const auto& e : d.episodes) {
        if (e.succeeded()) {
            const auto v = backward_episode_values(e, gamma);
            const std::size_t last = *e.last_goal();
            for (std::size_t t = 0; t < e.frames.size(); ++t) y.push_back(t <= last ? v[t] : 1.0);
        } else {
            y.insert(y.end(), e.frames.size(), 1.0);
        }
    }
    return y;
}

/// Per-frame targets l(s): sparse, or min(anchor(s), sparse) when an anchor
/// network is supplied.
inline std::vector<double> frame_targets(const FrameTable& t, const nn::Mlp* anchor) {
    std::vector<double> l(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) l[i] = t.goal[i] ? -1.0 : 1.0;
    if (anchor) {
        const auto a = predict_all(*anchor, t.features);
        for (std::size_t i = 0; i < t.size(); ++i) l[i] = std::min(l[i], a[i]);
    }
    return l;
}

/// Fitted-value-iteration target for one frame. `next_value` is empty at the
/// final frame of an episode.
inline double fvi_target(bool goal, double l, std::optional<double> next_value, const Discount& gamma) {
    if (goal) return -1.0;
    const double g = gamma.gamma();
    if (!next_value) return (1.0 - g) + g * l;
    return (1.0 - g) + g * std::min(l, std::clamp(*next_value, -1.0, 1.0));
}

/// Targets for every frame given successor values from a target network.
inline std::vector<double> fvi_targets(const FrameTable& t, const std::vector<double>& l,
                                       const std::vector<double>& successor_values, const Discount& gamma) {
    std::vector<double> y(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::optional<double> nv;
        if (t.next[i] >= 0) nv = successor_values[static_cast<std::size_t>(t.next[i])];
        y[i] = fvi_target(t.goal[i] != 0, l[i], nv, gamma);
    }
    return y;
}

struct LivenessFit {
    nn::Mlp value;
    std::optional<nn::Mlp> anchor;
    std::vector<CurvePoint> curve;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = i;
    return r;
}

} // namespace detail

inline LivenessFit fit_liveness_value(const Dataset& d, nn::NetworkSpec spec, const ReplayConfig& rc,
                                      const TrainConfig& tc, bool use_bootstrap) {
    validate(d);
    rc.validate();
    tc.validate();
    spec.input_dim = d.feature_dim;
    spec.output_dim = 1;
    spec.head = nn::Head::tanh_value;
    const FrameTable table = build_frame_table(d);
    const auto rows = detail::all_rows(table.size());

    LivenessFit fit{nn::Mlp(spec), std::nullopt, {}};
    if (use_bootstrap && d.count(Outcome::success) > 0) {
        nn::Mlp anchor(spec);
        anchor.init(detail::mix_seed(tc.seed, 1));
        const auto y = anchor_regression_targets(d, tc.gamma);
        auto curve = train_regression(
            anchor, table.features, rows,
            [&](const std::vector<std::size_t>& items, std::size_t) {
                std::vector<double> out(items.size());
                for (std::size_t i = 0; i < items.size(); ++i) out[i] = y[items[i]];
                return out;
            },
            rc, tc, "anchor", detail::mix_seed(tc.seed, 2));
        fit.curve.insert(fit.curve.end(), curve.begin(), curve.end());
        fit.anchor = std::move(anchor);
    }
    const auto l = frame_targets(table, fit.anchor ? &*fit.anchor : nullptr);

    nn::Mlp& net = fit.value;
    net.init(detail::mix_seed(tc.seed, 3));
    nn::Mlp target = net;
    std::size_t last_sync = 0;
    auto curve = train_regression(
        net, table.features, rows,
        [&](const std::vector<std::size_t>& items, std::size_t grad_step) {
            if (grad_step >= last_sync + tc.target_sync_interval) {
                target = net;
                last_sync = grad_step;
            }
            std::vector<std::size_t> next_rows;
            for (auto i : items)
                if (table.next[i] >= 0 && !table.goal[i]) next_rows.push_back(static_cast<std::size_t>(table.next[i]));
            std::vector<double> next_vals;
            if (!next_rows.empty()) {
                const nn::Matrix v = target.forward(gather_columns(table.features, next_rows));
                next_vals.assign(v.data(), v.data() + v.cols());
            }
            std::vector<double> out(items.size());
            std::size_t k = 0;
            for (std::size_t j = 0; j < items.size(); ++j) {
                const std::size_t i = items[j];
                std::optional<double> nv;
                if (table.next[i] >= 0 && !table.goal[i]) nv = next_vals[k++];
                out[j] = fvi_target(table.goal[i] != 0, l[i], nv, tc.gamma);
            }
            return out;
        },
        rc, tc, "value", detail::mix_seed(tc.seed, 4));
    fit.curve.insert(fit.curve.end(), curve.begin(), curve.end());
    return fit;
}

inline void write_training_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
    out << "stage,epoch,loss\n";
    for (const auto& p : curve) out << p.stage << ',' << p.epoch << ',' << detail::format_double(p.loss) << '\n';
}

} // namespace livope

#endif
