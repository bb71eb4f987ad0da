#ifndef LIVOPE_BASELINES_HPP
#define LIVOPE_BASELINES_HPP

// Comparison methods under the cumulative reward scheme: -1 per step, 0 on the
// final transition of a success, -c_fail on the final transition of a
// time-out, all divided by the normalization constant.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "livope/dataset.hpp"
#include "livope/error.hpp"
#include "livope/liveness.hpp"
#include "livope/nn/mlp.hpp"
#include "livope/replay.hpp"
#include "livope/training.hpp"
#include "livope/value_learning.hpp"

namespace livope {

struct CumulativeRewardScheme {
    double c_fail = 400.0;
    double normalization = 500.0;
    Discount gamma{0.993};

    void validate() const {
        if (!(c_fail > 0.0)) throw ConfigError("c_fail must be positive");
        if (!(normalization > 0.0)) throw ConfigError("reward normalization must be positive");
    }

    StepsModel steps_model() const { return CumulativeSteps{normalization}; }
};

/// One reward per transition; a single-frame episode gets one terminal slot.
inline std::vector<double> episode_rewards(const Episode& e, const CumulativeRewardScheme& s) {
    s.validate();
    const std::size_t slots = std::max<std::size_t>(e.frames.size(), 2) - 1;
    std::vector<double> r(slots, -1.0 / s.normalization);
    r.back() = e.succeeded() ? 0.0 : -s.c_fail / s.normalization;
    return r;
}

/// G_t = sum_k gamma^k r_{t+k}, one per reward slot.
inline std::vector<double> discounted_returns(const std::vector<double>& rewards, const Discount& gamma) {
    std::vector<double> g(rewards.size());
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        acc = rewards[i] + gamma.gamma() * acc;
        g[i] = acc;
    }
    return g;
}

inline double baseline_steps(double v, const CumulativeRewardScheme& s) {
    return steps_from_value(v, s.gamma, s.steps_model());
}

/// Frames that carry a reward slot, with their return targets.
struct ReturnTable {
    std::vector<std::size_t> rows;     // frame rows in the FrameTable
    std::vector<double> returns;       // G_t per row
    std::vector<double> rewards;       // r_t per row
    std::vector<char> terminal;        // successor is terminal
};

inline ReturnTable build_return_table(const Dataset& d, const CumulativeRewardScheme& s) {
    ReturnTable out;
    std::size_t row = 0;
    for (const auto& e : d.episodes) {
        const auto r = episode_rewards(e, s);
        const auto g = discounted_returns(r, s.gamma);
        for (std::size_t t = 0; t < r.size(); ++t) {
            out.rows.push_back(row + t);
            out.returns.push_back(g[t]);
            out.rewards.push_back(r[t]);
            out.terminal.push_back(t + 1 == r.size() ? 1 : 0);
        }
        row += e.frames.size();
    }
    return out;
}

struct ReturnDistributionSpec {
    std::size_t num_bins = 201;
    double lo = -1.0;
    double hi = 0.0;

    double width() const { return (hi - lo) / static_cast<double>(num_bins); }
    double center(std::size_t b) const { return lo + (static_cast<double>(b) + 0.5) * width(); }

    std::vector<double> centers() const {
        std::vector<double> c(num_bins);
        for (std::size_t b = 0; b < num_bins; ++b) c[b] = center(b);
        return c;
    }

    void validate() const {
        if (num_bins < 3) throw ConfigError("need at least 3 return bins");
        if (!(lo < hi)) throw ConfigError("return support must have lo < hi");
    }

    /// Bin (i-1) covers (lo + (i-1)w, lo + iw]; an edge goes to the lower bin.
    std::size_t bin_of(double x) const {
        const double k = std::ceil((std::clamp(x, lo, hi) - lo) / width()) - 1.0;
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(num_bins - 1)));
    }

    double expectation(const std::vector<double>& probs) const {
        double v = 0.0;
        for (std::size_t b = 0; b < num_bins; ++b) v += probs[b] * center(b);
        return v;
    }
};

/// Observed return range padded by one bin width on each side.
inline ReturnDistributionSpec support_from_returns(const std::vector<double>& returns, std::size_t num_bins = 201) {
    if (returns.empty()) throw DatasetError("no returns to size the distribution support");
    if (num_bins < 3) throw ConfigError("need at least 3 return bins");
    const auto [mn, mx] = std::minmax_element(returns.begin(), returns.end());
    double range = *mx - *mn;
    if (range <= 0.0) range = std::max(1.0, std::abs(*mn)) * 1e-3;
    const double w = range / static_cast<double>(num_bins - 2);
    return {num_bins, *mn - w, *mn + range + w};
}

struct BaselineFit {
    nn::Mlp network;
    std::optional<ReturnDistributionSpec> distribution;
    std::vector<CurvePoint> curve;
};

/// Scalar value of every column for either head type.
inline std::vector<double> baseline_values(const BaselineFit& fit, const nn::Matrix& inputs) {
    if (!fit.distribution) return predict_all(fit.network, inputs);
    const nn::Matrix p = nn::Mlp::softmax(fit.network.forward(inputs));
    std::vector<double> out(static_cast<std::size_t>(inputs.cols()));
    const auto centers = fit.distribution->centers();
    for (Eigen::Index i = 0; i < p.cols(); ++i) {
        double v = 0.0;
        for (std::size_t b = 0; b < centers.size(); ++b) v += p(static_cast<Eigen::Index>(b), i) * centers[b];
        out[static_cast<std::size_t>(i)] = v;
    }
    return out;
}

namespace detail {

inline nn::NetworkSpec scalar_spec(nn::NetworkSpec spec, std::size_t input_dim) {
    spec.input_dim = input_dim;
    spec.output_dim = 1;
    spec.head = nn::Head::tanh_value;
    return spec;
}

} // namespace detail

inline BaselineFit fit_mc(const Dataset& d, nn::NetworkSpec spec, const ReplayConfig& rc, const TrainConfig& tc,
                          const CumulativeRewardScheme& s) {
    validate(d);
    const FrameTable table = build_frame_table(d);
    const ReturnTable rt = build_return_table(d, s);
    for (double g : rt.returns)
        if (!std::isfinite(g)) throw DomainError("non-finite return target");
    BaselineFit fit{nn::Mlp(detail::scalar_spec(spec, d.feature_dim)), std::nullopt, {}};
    fit.network.init(detail::mix_seed(tc.seed, 3));
    fit.curve = train_regression(
        fit.network, table.features, rt.rows,
        [&](const std::vector<std::size_t>& items, std::size_t) {
            std::vector<double> y(items.size());
            for (std::size_t i = 0; i < items.size(); ++i) y[i] = rt.returns[items[i]];
            return y;
        },
        rc, tc, "mc", detail::mix_seed(tc.seed, 4));
    return fit;
}

/// Semi-gradient TD(0) with a periodically synced target network.
inline BaselineFit fit_td0(const Dataset& d, nn::NetworkSpec spec, const ReplayConfig& rc, const TrainConfig& tc,
                           const CumulativeRewardScheme& s) {
    validate(d);
    const FrameTable table = build_frame_table(d);
    const ReturnTable rt = build_return_table(d, s);
    BaselineFit fit{nn::Mlp(detail::scalar_spec(spec, d.feature_dim)), std::nullopt, {}};
    fit.network.init(detail::mix_seed(tc.seed, 3));
    nn::Mlp target = fit.network;
    std::size_t last_sync = 0;
    const double g = s.gamma.gamma();
    fit.curve = train_regression(
        fit.network, table.features, rt.rows,
        [&](const std::vector<std::size_t>& items, std::size_t grad_step) {
            if (grad_step >= last_sync + tc.target_sync_interval) {
                target = fit.network;
                last_sync = grad_step;
            }
            std::vector<std::size_t> next_rows;
            for (auto i : items)
                if (!rt.terminal[i]) next_rows.push_back(rt.rows[i] + 1);
            std::vector<double> nv;
            if (!next_rows.empty()) {
                const nn::Matrix v = target.forward(gather_columns(table.features, next_rows));
                nv.assign(v.data(), v.data() + v.cols());
            }
            std::vector<double> y(items.size());
            std::size_t k = 0;
            for (std::size_t j = 0; j < items.size(); ++j) {
                const std::size_t i = items[j];
                y[j] = rt.rewards[i] + (rt.terminal[i] ? 0.0 : g * nv[k++]);
            }
            return y;
        },
        rc, tc, "td0", detail::mix_seed(tc.seed, 4));
    return fit;
}

/// Distributional MC: cross-entropy onto the bin of each frame's return.
inline BaselineFit fit_mcd(const Dataset& d, nn::NetworkSpec spec, const ReplayConfig& rc, const TrainConfig& tc,
                           const CumulativeRewardScheme& s, std::size_t num_bins = 201) {
    validate(d);
    const FrameTable table = build_frame_table(d);
    const ReturnTable rt = build_return_table(d, s);
    const ReturnDistributionSpec dist = support_from_returns(rt.returns, num_bins);
    spec.input_dim = d.feature_dim;
    spec.output_dim = dist.num_bins;
    spec.head = nn::Head::logits;
    BaselineFit fit{nn::Mlp(spec), dist, {}};
    fit.network.init(detail::mix_seed(tc.seed, 3));
    std::vector<std::size_t> classes(rt.returns.size());
    for (std::size_t i = 0; i < classes.size(); ++i) classes[i] = dist.bin_of(rt.returns[i]);
    fit.curve = train_categorical(fit.network, table.features, rt.rows, classes, rt.returns, dist.centers(), rc, tc,
                                  "mcd", detail::mix_seed(tc.seed, 4));
    return fit;
}

// Tabular references keyed by state_key.

using TabularValues = std::map<std::string, double>;

/// Single TD(0) update V(s) += step * (r + gamma V(s') - V(s)); absent s' is terminal.
inline void td0_update(TabularValues& v, const std::string& s, double reward, const std::string* next, double step,
                       const Discount& gamma) {
    const double succ = next ? v[*next] : 0.0;
    double& vs = v[s];
    vs += step * (reward + gamma.gamma() * succ - vs);
}

/// Every-visit MC: mean return per key.
inline TabularValues tabular_mc(const Dataset& d, const CumulativeRewardScheme& s) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& e : d.episodes) {
        const auto g = discounted_returns(episode_rewards(e, s), s.gamma);
        for (std::size_t t = 0; t < g.size(); ++t) {
            const auto& f = e.frames[t];
            if (!f.state_key) throw DatasetError("tabular baseline needs state_key on every frame");
            auto& a = acc[*f.state_key];
            a.first += g[t];
            ++a.second;
        }
    }
    TabularValues v;
    for (const auto& [k, a] : acc) v[k] = a.first / static_cast<double>(a.second);
    return v;
}

/// Repeated sweeps of TD(0) over all transitions in dataset order.
inline TabularValues tabular_td0(const Dataset& d, const CumulativeRewardScheme& s, double step, std::size_t sweeps) {
    TabularValues v;
    for (std::size_t it = 0; it < sweeps; ++it)
        for (const auto& e : d.episodes) {
            const auto r = episode_rewards(e, s);
            for (std::size_t t = 0; t < r.size(); ++t) {
                const auto& f = e.frames[t];
                if (!f.state_key) throw DatasetError("tabular baseline needs state_key on every frame");
                const bool terminal = t + 1 == r.size();
                const std::string* next = terminal ? nullptr : &*e.frames[t + 1].state_key;
                td0_update(v, *f.state_key, r[t], next, step, s.gamma);
            }
        }
    return v;
}

/// Tabular MC-D: empirical bin histogram per key, reduced to its expectation.
inline TabularValues tabular_mcd(const Dataset& d, const CumulativeRewardScheme& s, const ReturnDistributionSpec& dist) {
    std::map<std::string, std::vector<double>> hist;
    for (const auto& e : d.episodes) {
        const auto g = discounted_returns(episode_rewards(e, s), s.gamma);
        for (std::size_t t = 0; t < g.size(); ++t) {
            const auto& key = e.frames[t].state_key;
            if (!key) throw DatasetError("tabular baseline needs state_key on every frame");
            auto& h = hist[*key];
            h.resize(dist.num_bins, 0.0);
            h[dist.bin_of(g[t])] += 1.0;
        }
    }
    TabularValues v;
    for (auto& [k, h] : hist) {
        double n = 0.0;
        for (double c : h) n += c;
        for (double& c : h) c /= n;
        v[k] = dist.expectation(h);
    }
    return v;
}

} // namespace livope

#endif
