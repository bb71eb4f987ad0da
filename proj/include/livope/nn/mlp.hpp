#ifndef LIVOPE_NN_MLP_HPP
#define LIVOPE_NN_MLP_HPP

// Small feed-forward network with hand-written backpropagation.
//
//   x -> [Linear -> LayerNorm -> GELU] x hidden_layers -> Linear -> head
//
// The head is tanh for scalar value networks (output in (-1, 1)) or raw
// logits for categorical networks. All parameters live in one flat vector so
// optimizers, checkpoints and finite-difference checks can treat them
// uniformly.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "livope/error.hpp"

namespace livope::nn {

using Matrix = Eigen::MatrixXd; // column-major, one column per sample
using Vector = Eigen::VectorXd;

enum class Head { tanh_value, logits };

inline const char* to_string(Head h) { return h == Head::tanh_value ? "tanh" : "logits"; }

struct NetworkSpec {
    std::size_t input_dim = 0;
    std::size_t hidden_layers = 5;
    std::size_t hidden_units = 64;
    std::size_t output_dim = 1;
    Head head = Head::tanh_value;

    void validate() const {
        if (input_dim == 0 || hidden_units == 0 || output_dim == 0)
            throw ConfigError("network dimensions must be positive");
        if (head == Head::tanh_value && output_dim != 1) throw ConfigError("tanh value head is scalar");
    }

    bool operator==(const NetworkSpec&) const = default;
};

inline constexpr double layer_norm_eps = 1e-5;

// Scales tanh so a saturated head stays strictly inside (-1, 1) in double precision.
inline constexpr double squash_scale = 1.0 - 0x1p-53;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
}

class Mlp {
public:
    Mlp() = default;

    explicit Mlp(NetworkSpec spec) : spec_(spec) {
        spec_.validate();
        std::size_t off = 0, in = spec_.input_dim;
        for (std::size_t l = 0; l < spec_.hidden_layers; ++l) {
            Block b;
            b.in = in;
            b.out = spec_.hidden_units;
            b.w = off;
            off += b.out * b.in;
            b.b = off;
            off += b.out;
            b.gain = off;
            off += b.out;
            b.shift = off;
            off += b.out;
            blocks_.push_back(b);
            in = spec_.hidden_units;
        }
        out_in_ = in;
        out_w_ = off;
        off += spec_.output_dim * in;
        out_b_ = off;
        off += spec_.output_dim;
        params_ = Vector::Zero(static_cast<Eigen::Index>(off));
    }

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::size_t num_params() const noexcept { return static_cast<std::size_t>(params_.size()); }
    Vector& params() noexcept { return params_; }
    const Vector& params() const noexcept { return params_; }

    /// Gaussian weights with variance 1/fan_in, zero biases, unit LayerNorm gains.
    void init(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        params_.setZero();
        for (const auto& b : blocks_) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(b.in));
            for (std::size_t i = 0; i < b.out * b.in; ++i) params_[idx(b.w + i)] = scale * normal(rng);
            for (std::size_t i = 0; i < b.out; ++i) params_[idx(b.gain + i)] = 1.0;
        }
        const double scale = 1.0 / std::sqrt(static_cast<double>(out_in_));
        for (std::size_t i = 0; i < spec_.output_dim * out_in_; ++i) params_[idx(out_w_ + i)] = scale * normal(rng);
    }

    /// Forward pass over a batch (input_dim x B); returns output_dim x B.
    Matrix forward(const Matrix& x) const {
        Cache c;
        return forward(x, c);
    }

    double forward_one(std::span<const double> x) const {
        if (x.size() != spec_.input_dim) throw DomainError("input dimension mismatch");
        Matrix m = Eigen::Map<const Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1);
        return forward(m)(0, 0);
    }

    /// Gradient of (1/B) sum_i w_i (f(x_i) - y_i)^2 for the scalar head.
    /// `outputs`, when given, receives f(x_i).
    Vector regression_gradient(const Matrix& x, std::span<const double> targets, std::span<const double> weights,
                               double* loss = nullptr, std::vector<double>* outputs = nullptr) const {
        check_batch(x, targets.size(), weights);
        Cache c;
        const Matrix f = forward(x, c);
        const auto n = static_cast<double>(x.cols());
        Matrix grad_out(1, x.cols());
        double total = 0.0;
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            const double r = f(0, i) - targets[static_cast<std::size_t>(i)];
            const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
            total += w * r * r;
            grad_out(0, i) = 2.0 * w * r / n;
        }
        if (loss) *loss = total / n;
        if (outputs) outputs->assign(f.data(), f.data() + f.cols());
        if (!std::isfinite(total)) throw DomainError("non-finite regression loss");
        return backward(c, grad_out);
    }

    /// Gradient of (1/B) sum_i w_i * cross_entropy(softmax(z_i), class_i) for the logits head.
    Vector categorical_gradient(const Matrix& x, std::span<const std::size_t> classes, std::span<const double> weights,
                                double* loss = nullptr, Matrix* probabilities = nullptr) const {
        if (spec_.head != Head::logits) throw ConfigError("categorical loss needs a logits head");
        check_batch(x, classes.size(), weights);
        Cache c;
        const Matrix z = forward(x, c);
        const Matrix p = softmax(z);
        if (!p.allFinite()) throw DomainError("non-finite logits");
        const auto n = static_cast<double>(x.cols());
        Matrix grad_out = p;
        double total = 0.0;
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            const auto k = static_cast<Eigen::Index>(classes[static_cast<std::size_t>(i)]);
            if (k >= z.rows()) throw DomainError("class index out of range");
            const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
            total -= w * std::log(std::max(p(k, i), 1e-300));
            grad_out(k, i) -= 1.0;
            grad_out.col(i) *= w / n;
        }
        if (loss) *loss = total / n;
        if (probabilities) *probabilities = p;
        return backward(c, grad_out);
    }

    static Matrix softmax(const Matrix& z) {
        Matrix p(z.rows(), z.cols());
        for (Eigen::Index i = 0; i < z.cols(); ++i) {
            const double m = z.col(i).maxCoeff();
            p.col(i) = (z.col(i).array() - m).exp().matrix();
            p.col(i) /= p.col(i).sum();
        }
        return p;
    }

    nlohmann::json to_json() const {
        return {{"input_dim", spec_.input_dim},   {"hidden_layers", spec_.hidden_layers},
                {"hidden_units", spec_.hidden_units}, {"output_dim", spec_.output_dim},
                {"head", to_string(spec_.head)},  {"params", std::vector<double>(params_.data(), params_.data() + params_.size())}};
    }

    static Mlp from_json(const nlohmann::json& j) {
        NetworkSpec s;
        try {
            s.input_dim = j.at("input_dim").get<std::size_t>();
            s.hidden_layers = j.at("hidden_layers").get<std::size_t>();
            s.hidden_units = j.at("hidden_units").get<std::size_t>();
            s.output_dim = j.at("output_dim").get<std::size_t>();
            const auto head = j.at("head").get<std::string>();
            if (head == "tanh")
                s.head = Head::tanh_value;
            else if (head == "logits")
                s.head = Head::logits;
            else
                throw ConfigError("unknown network head '" + head + "'");
            Mlp net(s);
            const auto p = j.at("params").get<std::vector<double>>();
            if (p.size() != net.num_params()) throw ConfigError("checkpoint parameter count mismatch");
            net.params_ = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
            return net;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed network checkpoint: ") + e.what());
        }
    }

private:
    struct Block {
        std::size_t in = 0, out = 0, w = 0, b = 0, gain = 0, shift = 0;
    };

    struct LayerCache {
        Matrix input;   // block input
        Matrix xhat;    // normalized pre-activation
        Vector inv_std; // per sample
        Matrix normed;  // gain * xhat + shift (GELU input)
    };

    struct Cache {
        std::vector<LayerCache> layers;
        Matrix last_hidden;
        Matrix output;
    };

    static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

    Eigen::Map<const Matrix> weight(std::size_t off, std::size_t rows, std::size_t cols) const {
        return {params_.data() + off, idx(rows), idx(cols)};
    }
    Eigen::Map<const Vector> slice(std::size_t off, std::size_t n) const { return {params_.data() + off, idx(n)}; }

    void check_batch(const Matrix& x, std::size_t n, std::span<const double> weights) const {
        if (x.cols() == 0) throw DomainError("empty batch");
        if (static_cast<std::size_t>(x.rows()) != spec_.input_dim) throw DomainError("input dimension mismatch");
        if (static_cast<std::size_t>(x.cols()) != n) throw DomainError("target count does not match batch");
        if (!weights.empty() && weights.size() != n) throw DomainError("weight count does not match batch");
        for (double w : weights)
            if (!(w >= 0.0)) throw DomainError("importance weights must be nonnegative");
        if (!x.allFinite()) throw DomainError("non-finite input in batch");
    }

    Matrix forward(const Matrix& x, Cache& c) const {
        if (static_cast<std::size_t>(x.rows()) != spec_.input_dim) throw DomainError("input dimension mismatch");
        c.layers.resize(blocks_.size());
        Matrix h = x;
        for (std::size_t l = 0; l < blocks_.size(); ++l) {
            const auto& b = blocks_[l];
            auto& lc = c.layers[l];
            lc.input = h;
            Matrix z = weight(b.w, b.out, b.in) * h;
            z.colwise() += slice(b.b, b.out);
            const auto n = static_cast<double>(b.out);
            lc.inv_std.resize(z.cols());
            for (Eigen::Index i = 0; i < z.cols(); ++i) {
                const double mu = z.col(i).mean();
                z.col(i).array() -= mu;
                const double var = z.col(i).squaredNorm() / n;
                lc.inv_std[i] = 1.0 / std::sqrt(var + layer_norm_eps);
                z.col(i) *= lc.inv_std[i];
            }
            lc.xhat = z;
            lc.normed = (z.array().colwise() * slice(b.gain, b.out).array()).matrix();
            lc.normed.colwise() += slice(b.shift, b.out);
            h = lc.normed.unaryExpr([](double v) { return gelu(v); });
        }
        c.last_hidden = h;
        Matrix out = weight(out_w_, spec_.output_dim, out_in_) * h;
        out.colwise() += slice(out_b_, spec_.output_dim);
        if (spec_.head == Head::tanh_value) out = (squash_scale * out.array().tanh()).matrix();
        c.output = out;
        return out;
    }

    Vector backward(const Cache& c, Matrix grad) const {
        Vector g = Vector::Zero(params_.size());
        if (spec_.head == Head::tanh_value)
            grad = (grad.array() * (squash_scale * squash_scale - c.output.array().square()) / squash_scale).matrix();
        Eigen::Map<Matrix>(g.data() + out_w_, idx(spec_.output_dim), idx(out_in_)) = grad * c.last_hidden.transpose();
        Eigen::Map<Vector>(g.data() + out_b_, idx(spec_.output_dim)) = grad.rowwise().sum();
        Matrix dh = weight(out_w_, spec_.output_dim, out_in_).transpose() * grad;
        for (std::size_t l = blocks_.size(); l-- > 0;) {
            const auto& b = blocks_[l];
            const auto& lc = c.layers[l];
            const Matrix dnormed = (dh.array() * lc.normed.unaryExpr([](double v) { return gelu_grad(v); }).array()).matrix();
            Eigen::Map<Vector>(g.data() + b.gain, idx(b.out)) = (dnormed.array() * lc.xhat.array()).rowwise().sum();
            Eigen::Map<Vector>(g.data() + b.shift, idx(b.out)) = dnormed.rowwise().sum();
            Matrix dxhat = (dnormed.array().colwise() * slice(b.gain, b.out).array()).matrix();
            const auto n = static_cast<double>(b.out);
            Matrix dz(dxhat.rows(), dxhat.cols());
            for (Eigen::Index i = 0; i < dxhat.cols(); ++i) {
                const double mean_d = dxhat.col(i).sum() / n;
                const double mean_dx = dxhat.col(i).dot(lc.xhat.col(i)) / n;
                dz.col(i) = lc.inv_std[i] * (dxhat.col(i).array() - mean_d - lc.xhat.col(i).array() * mean_dx).matrix();
            }
            Eigen::Map<Matrix>(g.data() + b.w, idx(b.out), idx(b.in)) = dz * lc.input.transpose();
            Eigen::Map<Vector>(g.data() + b.b, idx(b.out)) = dz.rowwise().sum();
            if (l > 0) dh = weight(b.w, b.out, b.in).transpose() * dz;
        }
        return g;
    }

    NetworkSpec spec_;
    std::vector<Block> blocks_;
    std::size_t out_in_ = 0, out_w_ = 0, out_b_ = 0;
    Vector params_;
};

enum class OptimizerKind { sgd, adam };

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double learning_rate, std::size_t num_params)
        : kind_(kind), lr_(learning_rate), m_(Vector::Zero(idx(num_params))), v_(Vector::Zero(idx(num_params))) {}

    void step(Vector& params, const Vector& grad) {
        if (kind_ == OptimizerKind::sgd) {
            params -= lr_ * grad;
            return;
        }
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t_;
        m_ = b1 * m_ + (1.0 - b1) * grad;
        v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
    }

private:
    static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

    OptimizerKind kind_;
    double lr_;
    Vector m_, v_;
    std::size_t t_ = 0;
};

} // namespace livope::nn

#endif
