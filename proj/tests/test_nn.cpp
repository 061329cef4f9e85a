#include "hullgan/errors.hpp"
#include "hullgan/nn.hpp"

#include "support.hpp"

#include <cmath>
#include <random>

using namespace hullgan;
using namespace hullgan::nn;

namespace {

using T = Tensor<double>;

struct TinyNet {
    MlpSpec spec;
    MlpParams<double> params;
    T x;
};

// Random small network with random biases and inputs. Cycles through the
// activation combinations by seed.
TinyNet tiny_net(std::uint64_t seed, Index outputs)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> width(1, 5);
    TinyNet n;
    n.spec.widths = {width(rng) + 1};
    const int hidden = 1 + int(seed % 3);
    for (int h = 0; h < hidden; ++h)
        n.spec.widths.push_back(width(rng));
    n.spec.widths.push_back(outputs);
    n.spec.hidden = seed % 2 ? Activation::Tanh : Activation::LeakyReLU;
    n.spec.output = seed % 4 == 3 ? Activation::Sigmoid : Activation::Identity;
    n.params = init_params<double>(n.spec, rng);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (auto& layer : n.params.layers)
        for (Index k = 0; k < layer.bias.size(); ++k)
            layer.bias[k] = normal(rng);
    n.x = T(3, n.spec.input_width());
    for (Index k = 0; k < n.x.size(); ++k)
        n.x.data()[k] = normal(rng) * 2.0;
    return n;
}

template <class F>
std::vector<double> central_differences(MlpParams<double> p, F&& loss, double h)
{
    std::vector<double> flat = flatten(p);
    std::vector<double> out(flat.size());
    for (std::size_t k = 0; k < flat.size(); ++k) {
        const double keep = flat[k];
        flat[k] = keep + h;
        assign_flat<double>(p, flat);
        const double up = loss(p);
        flat[k] = keep - h;
        assign_flat<double>(p, flat);
        const double down = loss(p);
        flat[k] = keep;
        out[k] = (up - down) / (2 * h);
    }
    return out;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b)
{
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num += (a[k] - b[k]) * (a[k] - b[k]);
        den += b[k] * b[k];
    }
    return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

} // namespace

TEST_CASE("forward matches a hand computation")
{
    MlpSpec spec{{2, 2, 1}, Activation::LeakyReLU, Activation::Identity, 0.2};
    auto p = MlpParams<double>::zeros(spec);
    p.layers[0].weight << 1, -1, 2, 1;
    p.layers[0].bias << 0.5, -3;
    p.layers[1].weight << 2, 1;
    p.layers[1].bias << 0.25;
    T x(1, 2);
    x << 1, 1;
    // pre = (3.5, -3) -> (3.5, -0.6) -> 7 - 0.6 + 0.25
    CHECK(forward(spec, p, x)(0, 0) == doctest::Approx(6.65).epsilon(1e-15));
    T bad(1, 3);
    CHECK_THROWS_AS(forward(spec, p, bad), ShapeError);
}

TEST_CASE("backward matches central differences on seeded nets")
{
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
        const TinyNet n = tiny_net(seed, 2);
        std::mt19937_64 rng(seed + 1000);
        std::normal_distribution<double> normal;
        T up(n.x.rows(), 2);
        for (Index k = 0; k < up.size(); ++k)
            up.data()[k] = normal(rng);
        const auto loss = [&](const MlpParams<double>& p) { return forward(n.spec, p, n.x).cwiseProduct(up).sum(); };
        const auto g = backward(n.spec, n.params, n.x, up);
        const auto fd = central_differences(n.params, loss, 1e-6);
        INFO("seed " << seed);
        CHECK(relative_error(flatten(g.params), fd) < 1e-5);

        // Input gradient.
        T x = n.x;
        for (Index k = 0; k < x.size(); ++k) {
            const double keep = x.data()[k];
            x.data()[k] = keep + 1e-6;
            const double a = forward(n.spec, n.params, x).cwiseProduct(up).sum();
            x.data()[k] = keep - 1e-6;
            const double b = forward(n.spec, n.params, x).cwiseProduct(up).sum();
            x.data()[k] = keep;
            CHECK(g.input.data()[k] == doctest::Approx((a - b) / 2e-6).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("gradient penalty matches central differences on seeded nets")
{
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
        const TinyNet n = tiny_net(seed, 1);
        const Index cols = seed % 2 ? n.spec.input_width() : std::max<Index>(1, n.spec.input_width() - 1);
        const auto gp = gradient_penalty(n.spec, n.params, n.x, cols);
        const auto loss = [&](const MlpParams<double>& p) { return gradient_penalty(n.spec, p, n.x, cols).value; };
        const auto fd = central_differences(n.params, loss, 1e-5);
        INFO("seed " << seed);
        CHECK(relative_error(flatten(gp.grads), fd) < 1e-4);
        CHECK(gp.value >= 0.0);
    }
}

TEST_CASE("linear critic penalty closed form")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 20; ++trial) {
        MlpSpec spec{{6, 1}, Activation::LeakyReLU, Activation::Identity, 0.2};
        auto p = MlpParams<double>::zeros(spec);
        for (Index k = 0; k < 6; ++k)
            p.layers[0].weight(k, 0) = normal(rng);
        p.layers[0].bias << normal(rng);
        T x(4, 6);
        for (Index k = 0; k < x.size(); ++k)
            x.data()[k] = normal(rng);

        const Index cols = 4; // the last two inputs play the role of labels
        const auto w = p.layers[0].weight.col(0).head(cols);
        const double norm = w.norm();
        const auto gp = gradient_penalty(spec, p, x, cols);
        CHECK(std::abs(gp.value - (norm - 1) * (norm - 1)) <= 1e-12);
        for (Index k = 0; k < 6; ++k) {
            const double expect = k < cols ? 2 * (norm - 1) * w[k] / norm : 0.0;
            CHECK(std::abs(gp.grads.layers[0].weight(k, 0) - expect) <= 1e-12);
        }
        CHECK(gp.grads.layers[0].bias[0] == 0.0);
    }
}

TEST_CASE("zero input gradient stays finite")
{
    MlpSpec spec{{3, 1}, Activation::LeakyReLU, Activation::Identity, 0.2};
    auto p = MlpParams<double>::zeros(spec);
    const auto gp = gradient_penalty(spec, p, T(T::Ones(2, 3)));
    CHECK(gp.value == 1.0);
    CHECK(gp.grads.all_finite());
}

TEST_CASE("Adam first step")
{
    MlpSpec spec{{2, 1}, Activation::LeakyReLU, Activation::Identity, 0.2};
    auto p = MlpParams<double>::zeros(spec);
    auto g = MlpParams<double>::zeros(spec);
    g.layers[0].weight << 3.0, -1e-3;
    g.layers[0].bias << 0.0;
    AdamConfig cfg;
    cfg.beta1 = 0.5;
    auto state = AdamState<double>::start(p, cfg);
    adam_step(state, p, g);
    // Bias correction turns the first step into -lr * g / (|g| + eps).
    CHECK(p.layers[0].weight(0, 0) == doctest::Approx(-1e-4 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
    CHECK(p.layers[0].weight(1, 0) == doctest::Approx(1e-4 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));
    CHECK(p.layers[0].bias[0] == 0.0);
    CHECK(state.step == 1);

    adam_step(state, p, g);
    // Constant gradient: the corrected moments stay at g and g^2.
    CHECK(p.layers[0].weight(0, 0) == doctest::Approx(-2e-4 * 3.0 / (3.0 + 1e-8)).epsilon(1e-10));
}

TEST_CASE("initialization")
{
    MlpSpec spec{{400, 300, 1}, Activation::LeakyReLU, Activation::Identity, 0.2};
    const auto a = init_params<double>(spec, 11);
    const auto b = init_params<double>(spec, 11);
    CHECK(a == b);
    CHECK_FALSE(a == init_params<double>(spec, 12));
    const auto& w = a.layers[0].weight;
    const double var = w.squaredNorm() / double(w.size());
    CHECK(var == doctest::Approx(2.0 / 400).epsilon(0.02));
    CHECK(a.layers[0].bias.isZero());

    spec.hidden = Activation::Tanh;
    const auto t = init_params<double>(spec, 11);
    CHECK(t.layers[0].weight.squaredNorm() / double(w.size()) == doctest::Approx(2.0 / 700).epsilon(0.02));
}

TEST_CASE("parameter containers")
{
    MlpSpec spec{{3, 4, 2}, Activation::Tanh, Activation::Identity, 0.2};
    auto p = init_params<double>(spec, 3);
    const auto flat = flatten(p);
    CHECK(flat.size() == p.size());
    CHECK(p.size() == 3 * 4 + 4 + 4 * 2 + 2);
    auto q = MlpParams<double>::zeros_like(p);
    assign_flat<double>(q, flat);
    CHECK(q == p);
    q *= 2.0;
    q += p;
    CHECK(flatten(q)[5] == doctest::Approx(3 * flat[5]));
    CHECK_THROWS_AS(check_conforms(MlpSpec{{3, 5, 2}}, p), ShapeError);
    std::vector<double> short_flat(3);
    CHECK_THROWS_AS(assign_flat<double>(q, short_flat), ShapeError);
    CHECK_THROWS(MlpSpec{{3}}.validate());

    // The same code runs in single precision.
    const auto pf = init_params<float>(spec, 3);
    Tensor<float> xf = Tensor<float>::Ones(2, 3);
    CHECK(forward(spec, pf, xf).allFinite());
}
