#pragma once

// Dense multilayer perceptrons with exact first- and second-order reverse
// mode differentiation, enough for a gradient-penalized critic.

#include "hullgan/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hullgan::nn {

using Eigen::Index;

/// Row-major batch: one sample per row.
template <class Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Activation { Identity, LeakyReLU, Tanh, Sigmoid };

struct MlpSpec {
    std::vector<Index> widths;
    Activation hidden = Activation::LeakyReLU;
    Activation output = Activation::Identity;
    double leaky_slope = 0.2;

    Index input_width() const { return widths.front(); }
    Index output_width() const { return widths.back(); }
    std::size_t layer_count() const { return widths.size() - 1; }

    Activation activation(std::size_t layer) const
    {
        return layer + 1 == layer_count() ? output : hidden;
    }

    void validate() const
    {
        if (widths.size() < 2)
            throw ShapeError("an MLP needs at least two widths");
        for (Index w : widths)
            if (w <= 0)
                throw ShapeError("MLP widths must be positive");
        if (hidden != Activation::LeakyReLU && hidden != Activation::Tanh)
            throw Error("hidden activation must be LeakyReLU or Tanh");
        if (output != Activation::Identity && output != Activation::Sigmoid)
            throw Error("output activation must be Identity or Sigmoid");
        if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
            throw Error("LeakyReLU slope must lie in (0, 1)");
    }

    bool operator==(const MlpSpec&) const = default;
};

template <class Scalar>
struct Layer {
    Tensor<Scalar> weight;  // fan_in x fan_out
    RowVector<Scalar> bias; // 1 x fan_out
};

/// Weights and biases; the same container holds parameter gradients.
template <class Scalar>
struct MlpParams {
    std::vector<Layer<Scalar>> layers;

    static MlpParams zeros(const MlpSpec& spec)
    {
        MlpParams p;
        for (std::size_t l = 0; l < spec.layer_count(); ++l)
            p.layers.push_back({Tensor<Scalar>::Zero(spec.widths[l], spec.widths[l + 1]),
                                RowVector<Scalar>::Zero(spec.widths[l + 1])});
        return p;
    }

    static MlpParams zeros_like(const MlpParams& other)
    {
        MlpParams p;
        for (const auto& layer : other.layers)
            p.layers.push_back({Tensor<Scalar>::Zero(layer.weight.rows(), layer.weight.cols()),
                                RowVector<Scalar>::Zero(layer.bias.size())});
        return p;
    }

    Index size() const
    {
        Index n = 0;
        for (const auto& layer : layers)
            n += layer.weight.size() + layer.bias.size();
        return n;
    }

    bool all_finite() const
    {
        return std::all_of(layers.begin(), layers.end(), [](const Layer<Scalar>& l) {
            return l.weight.allFinite() && l.bias.allFinite();
        });
    }

    /// Visits every scalar in serialization order: per layer, weight rows then bias.
    template <class F>
    void for_each(F&& f)
    {
        for (auto& layer : layers) {
            for (Index k = 0; k < layer.weight.size(); ++k)
                f(layer.weight.data()[k]);
            for (Index k = 0; k < layer.bias.size(); ++k)
                f(layer.bias.data()[k]);
        }
    }

    template <class F>
    void for_each(F&& f) const
    {
        const_cast<MlpParams&>(*this).for_each([&](Scalar& v) { f(static_cast<const Scalar&>(v)); });
    }

    MlpParams& operator+=(const MlpParams& other)
    {
        check_same_shape(other);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].weight += other.layers[l].weight;
            layers[l].bias += other.layers[l].bias;
        }
        return *this;
    }

    MlpParams& operator*=(Scalar s)
    {
        for (auto& layer : layers) {
            layer.weight *= s;
            layer.bias *= s;
        }
        return *this;
    }

    void check_same_shape(const MlpParams& other) const
    {
        bool same = layers.size() == other.layers.size();
        for (std::size_t l = 0; same && l < layers.size(); ++l)
            same = layers[l].weight.rows() == other.layers[l].weight.rows()
                && layers[l].weight.cols() == other.layers[l].weight.cols()
                && layers[l].bias.size() == other.layers[l].bias.size();
        if (!same)
            throw ShapeError("parameter containers have different shapes");
    }

    bool operator==(const MlpParams& other) const
    {
        if (layers.size() != other.layers.size())
            return false;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& a = layers[l];
            const auto& b = other.layers[l];
            if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols()
                || a.bias.size() != b.bias.size() || a.weight != b.weight || a.bias != b.bias)
                return false;
        }
        return true;
    }
};

template <class Scalar>
std::vector<Scalar> flatten(const MlpParams<Scalar>& p)
{
    std::vector<Scalar> out;
    out.reserve(static_cast<std::size_t>(p.size()));
    p.for_each([&](const Scalar& v) { out.push_back(v); });
    return out;
}

template <class Scalar>
void assign_flat(MlpParams<Scalar>& p, std::span<const Scalar> values)
{
    if (static_cast<Index>(values.size()) != p.size())
        throw ShapeError("flat parameter vector has " + std::to_string(values.size()) + " entries, expected "
                         + std::to_string(p.size()));
    std::size_t k = 0;
    p.for_each([&](Scalar& v) { v = values[k++]; });
}

template <class Scalar>
void check_conforms(const MlpSpec& spec, const MlpParams<Scalar>& params)
{
    if (params.layers.size() != spec.layer_count())
        throw ShapeError("parameter layer count does not match the spec");
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const auto& layer = params.layers[l];
        if (layer.weight.rows() != spec.widths[l] || layer.weight.cols() != spec.widths[l + 1]
            || layer.bias.size() != spec.widths[l + 1])
            throw ShapeError("layer " + std::to_string(l) + " does not match the spec widths");
    }
}

namespace detail {

template <class Scalar>
Tensor<Scalar> activate(Activation act, double slope, const Tensor<Scalar>& a)
{
    switch (act) {
    case Activation::Identity:
        return a;
    case Activation::LeakyReLU:
        return a.unaryExpr([s = Scalar(slope)](Scalar v) { return v > Scalar(0) ? v : s * v; });
    case Activation::Tanh:
        return a.array().tanh().matrix();
    case Activation::Sigmoid:
        return a.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
    }
    return a;
}

// First derivative in terms of the pre-activation a and output h. LeakyReLU
// takes the negative-side slope at exactly zero.
template <class Scalar>
Tensor<Scalar> derivative(Activation act, double slope, const Tensor<Scalar>& a, const Tensor<Scalar>& h)
{
    switch (act) {
    case Activation::Identity:
        return Tensor<Scalar>::Ones(a.rows(), a.cols());
    case Activation::LeakyReLU:
        return a.unaryExpr([s = Scalar(slope)](Scalar v) { return v > Scalar(0) ? Scalar(1) : s; });
    case Activation::Tanh:
        return (Scalar(1) - h.array().square()).matrix();
    case Activation::Sigmoid:
        return (h.array() * (Scalar(1) - h.array())).matrix();
    }
    return a;
}

template <class Scalar>
Tensor<Scalar> second_derivative(Activation act, const Tensor<Scalar>& a, const Tensor<Scalar>& h)
{
    switch (act) {
    case Activation::Identity:
    case Activation::LeakyReLU:
        return Tensor<Scalar>::Zero(a.rows(), a.cols());
    case Activation::Tanh:
        return (Scalar(-2) * h.array() * (Scalar(1) - h.array().square())).matrix();
    case Activation::Sigmoid:
        return (h.array() * (Scalar(1) - h.array()) * (Scalar(1) - Scalar(2) * h.array())).matrix();
    }
    return a;
}

inline bool is_piecewise_linear(Activation act)
{
    return act == Activation::Identity || act == Activation::LeakyReLU;
}

} // namespace detail

/// Intermediate values of one forward pass. post[0] is the input; pre[l] and
/// post[l + 1] are layer l's pre-activation and output.
template <class Scalar>
struct ForwardTrace {
    std::vector<Tensor<Scalar>> pre;
    std::vector<Tensor<Scalar>> post;

    const Tensor<Scalar>& output() const { return post.back(); }
};

template <class Scalar>
ForwardTrace<Scalar> forward_trace(const MlpSpec& spec, const MlpParams<Scalar>& params,
                                   const Tensor<Scalar>& x)
{
    check_conforms(spec, params);
    if (x.cols() != spec.input_width())
        throw ShapeError("input has " + std::to_string(x.cols()) + " columns, network expects "
                         + std::to_string(spec.input_width()));
    ForwardTrace<Scalar> t;
    t.post.push_back(x);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const auto& layer = params.layers[l];
        Tensor<Scalar> a = t.post.back() * layer.weight;
        a.rowwise() += layer.bias;
        t.post.push_back(detail::activate(spec.activation(l), spec.leaky_slope, a));
        t.pre.push_back(std::move(a));
    }
    return t;
}

template <class Scalar>
Tensor<Scalar> forward(const MlpSpec& spec, const MlpParams<Scalar>& params, const Tensor<Scalar>& x)
{
    return std::move(forward_trace(spec, params, x).post.back());
}

template <class Scalar>
struct Gradients {
    MlpParams<Scalar> params;
    Tensor<Scalar> input;
};

/// Reverse-mode gradients of <upstream, forward(x)> with respect to the
/// parameters (unless skipped) and to the input.
template <class Scalar>
Gradients<Scalar> backward(const MlpSpec& spec, const MlpParams<Scalar>& params, const ForwardTrace<Scalar>& trace,
                           const Tensor<Scalar>& upstream, bool param_grads = true)
{
    const auto& out = trace.output();
    if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
        throw ShapeError("upstream gradient shape does not match the network output");

    Gradients<Scalar> g;
    if (param_grads)
        g.params = MlpParams<Scalar>::zeros_like(params);
    Tensor<Scalar> grad = upstream;
    for (std::size_t l = spec.layer_count(); l-- > 0;) {
        const Tensor<Scalar> delta = grad.cwiseProduct(
            detail::derivative(spec.activation(l), spec.leaky_slope, trace.pre[l], trace.post[l + 1]));
        if (param_grads) {
            g.params.layers[l].weight.noalias() = trace.post[l].transpose() * delta;
            g.params.layers[l].bias = delta.colwise().sum();
        }
        grad.noalias() = delta * params.layers[l].weight.transpose();
    }
    g.input = std::move(grad);
    return g;
}

template <class Scalar>
Gradients<Scalar> backward(const MlpSpec& spec, const MlpParams<Scalar>& params, const Tensor<Scalar>& x,
                           const Tensor<Scalar>& upstream, bool param_grads = true)
{
    return backward(spec, params, forward_trace(spec, params, x), upstream, param_grads);
}

template <class Scalar>
struct GradientPenalty {
    Scalar value = Scalar(0);
    MlpParams<Scalar> grads;
    Vector<Scalar> norms;
};

inline constexpr double kNormGuard = 1e-12;

/// Mean over rows of (|dD/dx|_2 - 1)^2, where the norm covers the first
/// `penalized_cols` input columns (all columns when negative), plus its exact
/// parameter gradient obtained by differentiating the input-gradient pass.
template <class Scalar>
GradientPenalty<Scalar> gradient_penalty(const MlpSpec& spec, const MlpParams<Scalar>& params,
                                         const Tensor<Scalar>& x_hat, Index penalized_cols = -1)
{
    if (spec.output_width() != 1)
        throw ShapeError("gradient penalty needs a scalar-output network");
    if (penalized_cols < 0)
        penalized_cols = spec.input_width();
    if (penalized_cols > spec.input_width())
        throw ShapeError("more penalized columns than network inputs");

    const std::size_t L = spec.layer_count();
    const ForwardTrace<Scalar> t = forward_trace(spec, params, x_hat);
    const Index batch = x_hat.rows();

    // Input-gradient pass. g[l] is dD/d(post[l]); delta[l] is dD/d(pre[l]).
    std::vector<Tensor<Scalar>> g(L + 1), delta(L), act_d(L);
    g[L] = Tensor<Scalar>::Ones(batch, 1);
    for (std::size_t l = L; l-- > 0;) {
        act_d[l] = detail::derivative(spec.activation(l), spec.leaky_slope, t.pre[l], t.post[l + 1]);
        delta[l] = g[l + 1].cwiseProduct(act_d[l]);
        g[l].noalias() = delta[l] * params.layers[l].weight.transpose();
    }

    GradientPenalty<Scalar> out;
    out.grads = MlpParams<Scalar>::zeros_like(params);
    out.norms.resize(batch);
    Tensor<Scalar> g_bar = Tensor<Scalar>::Zero(batch, spec.input_width());
    Scalar total = Scalar(0);
    for (Index i = 0; i < batch; ++i) {
        const auto s = g[0].row(i).head(penalized_cols);
        const Scalar norm = s.norm();
        out.norms[i] = norm;
        total += (norm - Scalar(1)) * (norm - Scalar(1));
        const Scalar scale = Scalar(2) * (norm - Scalar(1)) / (std::max(norm, Scalar(kNormGuard)) * Scalar(batch));
        g_bar.row(i).head(penalized_cols) = scale * s;
    }
    out.value = total / Scalar(batch);

    // Adjoint of the input-gradient pass, swept from the input side outward.
    std::vector<Tensor<Scalar>> a_bar(L);
    bool curved = false;
    for (std::size_t l = 0; l < L; ++l) {
        const auto& W = params.layers[l].weight;
        out.grads.layers[l].weight.noalias() += g_bar.transpose() * delta[l];
        const Tensor<Scalar> delta_bar = g_bar * W;
        if (!detail::is_piecewise_linear(spec.activation(l))) {
            curved = true;
            a_bar[l] = delta_bar.cwiseProduct(g[l + 1]).cwiseProduct(
                detail::second_derivative(spec.activation(l), t.pre[l], t.post[l + 1]));
        }
        if (l + 1 < L)
            g_bar = delta_bar.cwiseProduct(act_d[l]);
    }
    if (!curved)
        return out;

    // Second-order terms flow back through the forward pass.
    Tensor<Scalar> h_bar;
    for (std::size_t l = L; l-- > 0;) {
        Tensor<Scalar> total_bar = a_bar[l].size() ? a_bar[l] : Tensor<Scalar>::Zero(batch, spec.widths[l + 1]);
        if (h_bar.size())
            total_bar += h_bar.cwiseProduct(act_d[l]);
        out.grads.layers[l].weight.noalias() += t.post[l].transpose() * total_bar;
        out.grads.layers[l].bias += total_bar.colwise().sum();
        if (l > 0)
            h_bar.noalias() = total_bar * params.layers[l].weight.transpose();
    }
    return out;
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.0;
    double beta2 = 0.9;
    double eps = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

template <class Scalar>
struct AdamState {
    AdamConfig config;
    MlpParams<Scalar> m;
    MlpParams<Scalar> v;
    std::int64_t step = 0;

    static AdamState start(const MlpParams<Scalar>& params, const AdamConfig& config)
    {
        return {config, MlpParams<Scalar>::zeros_like(params), MlpParams<Scalar>::zeros_like(params), 0};
    }
};

/// One bias-corrected Adam update of `params` in place.
template <class Scalar>
void adam_step(AdamState<Scalar>& state, MlpParams<Scalar>& params, const MlpParams<Scalar>& grads)
{
    params.check_same_shape(grads);
    params.check_same_shape(state.m);
    ++state.step;
    const auto& c = state.config;
    const Scalar b1 = Scalar(c.beta1), b2 = Scalar(c.beta2);
    const Scalar corr1 = Scalar(1) - std::pow(b1, Scalar(state.step));
    const Scalar corr2 = Scalar(1) - std::pow(b2, Scalar(state.step));
    const Scalar lr = Scalar(c.lr), eps = Scalar(c.eps);

    const auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
        p.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weight, grads.layers[l].weight, state.m.layers[l].weight, state.v.layers[l].weight);
        update(params.layers[l].bias, grads.layers[l].bias, state.m.layers[l].bias, state.v.layers[l].bias);
    }
}

/// Zero biases; weights drawn N(0, 2 / fan_in) for LeakyReLU networks and
/// N(0, 2 / (fan_in + fan_out)) for Tanh networks.
template <class Scalar, class Rng>
MlpParams<Scalar> init_params(const MlpSpec& spec, Rng& rng)
{
    spec.validate();
    MlpParams<Scalar> p = MlpParams<Scalar>::zeros(spec);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const double fan_in = double(spec.widths[l]);
        const double fan_out = double(spec.widths[l + 1]);
        const double stddev = spec.hidden == Activation::Tanh ? std::sqrt(2.0 / (fan_in + fan_out))
                                                              : std::sqrt(2.0 / fan_in);
        std::normal_distribution<double> normal(0.0, stddev);
        auto& w = p.layers[l].weight;
        for (Index k = 0; k < w.size(); ++k)
            w.data()[k] = Scalar(normal(rng));
    }
    return p;
}

template <class Scalar = double>
MlpParams<Scalar> init_params(const MlpSpec& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return init_params<Scalar>(spec, rng);
}

} // namespace hullgan::nn
