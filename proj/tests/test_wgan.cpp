#include "hullgan/errors.hpp"
#include "hullgan/wgan.hpp"

#include "support.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace hullgan;

namespace {

// Tiny corpus of low-speed hulls and a matching small config.
const std::vector<LabeledSample>& corpus()
{
    static const std::vector<LabeledSample> samples =
        build_dataset(SweepSpec::table(SpeedClass::Low), GridSpec::standard(), HydroEnv{}, QuadratureSpec{}, 8)
            .samples;
    return samples;
}

TrainConfig tiny_config()
{
    TrainConfig cfg;
    cfg.latent_dim = 4;
    cfg.g_hidden = {8};
    cfg.d_hidden = {8};
    cfg.batch_size = 4;
    cfg.n_critic = 2;
    cfg.iterations = 3;
    cfg.seed = 17;
    return cfg;
}

// Nets of the given widths on a short data vector, with random biases.
GanNets small_nets(Index data_dim, nn::Activation act, std::uint64_t seed)
{
    TrainConfig cfg = tiny_config();
    cfg.hidden_activation = act;
    cfg.seed = seed;
    GanNets nets = make_nets(cfg, data_dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.3);
    for (auto* p : {&nets.g, &nets.d})
        for (auto& layer : p->layers)
            for (Index k = 0; k < layer.bias.size(); ++k)
                layer.bias[k] = normal(rng);
    return nets;
}

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix m(r, c);
    for (Index k = 0; k < m.size(); ++k)
        m.data()[k] = u(rng);
    return m;
}

template <class F>
double fd_relative_error(nn::MlpParams<double> p, const nn::MlpParams<double>& analytic, F&& loss)
{
    auto flat = nn::flatten(p);
    const auto g = nn::flatten(analytic);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < flat.size(); ++k) {
        const double keep = flat[k];
        flat[k] = keep + 1e-5;
        nn::assign_flat<double>(p, flat);
        const double up = loss(p);
        flat[k] = keep - 1e-5;
        nn::assign_flat<double>(p, flat);
        const double down = loss(p);
        flat[k] = keep;
        const double fd = (up - down) / 2e-5;
        num += (g[k] - fd) * (g[k] - fd);
        den += fd * fd;
    }
    nn::assign_flat<double>(p, flat);
    return std::sqrt(num / den);
}

} // namespace

TEST_CASE("network shapes follow the config")
{
    const TrainConfig cfg;
    const auto g = cfg.g_spec(1600);
    const auto d = cfg.d_spec(1600);
    CHECK(g.widths == std::vector<Index>{67, 256, 512, 1024, 1600});
    CHECK(d.widths == std::vector<Index>{1603, 512, 256, 128, 1});
    CHECK(g.output == nn::Activation::Identity);
    CHECK(d.output == nn::Activation::Identity);
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.adam.lr == 1e-4);
    CHECK(cfg.adam.beta1 == 0.0);
    CHECK(cfg.adam.beta2 == 0.9);
    CHECK(cfg.lambda_gp == 10.0);
    CHECK(cfg.n_critic == 5);
}

TEST_CASE("config overrides")
{
    TrainConfig cfg;
    CHECK(cfg.apply("g_hidden", "32,64"));
    CHECK(cfg.g_hidden == std::vector<Index>{32, 64});
    CHECK(cfg.apply("lr", "0.0005"));
    CHECK(cfg.adam.lr == 0.0005);
    CHECK(cfg.apply("loss_mode", "vanilla"));
    CHECK(cfg.loss_mode == LossMode::VanillaGan);
    CHECK(cfg.apply("activation", "tanh"));
    CHECK_FALSE(cfg.apply("momentum", "0.9"));
    CHECK_THROWS_AS(cfg.apply("iterations", "1.5"), FormatError);
    CHECK_THROWS_AS(cfg.apply("lr", "fast"), FormatError);
    cfg.n_critic = 0;
    CHECK_THROWS(cfg.validate());

    testing::ScratchDir dir("wgan_cfg");
    std::ofstream(dir / "a.cfg") << "# comment\niterations = 12\n\nseed=4 # trailing\n";
    const auto kv = read_key_values(dir / "a.cfg");
    CHECK(kv.at("iterations") == "12");
    CHECK(kv.at("seed") == "4");
    std::ofstream(dir / "b.cfg") << "iterations 12\n";
    CHECK_THROWS_AS(read_key_values(dir / "b.cfg"), FormatError);
}

TEST_CASE("conditions")
{
    const DatasetStats st = compute_stats(corpus());
    const Label mid{(st.labels[0].min + st.labels[0].max) / 2, st.labels[1].max, st.labels[2].min};
    const ConditionLabel c = make_condition(mid, st);
    CHECK(c.in_range);
    CHECK(c.normalized[0] == doctest::Approx(0.5));
    CHECK(c.normalized[1] == 1.0);
    CHECK(c.normalized[2] == 0.0); // constant over a one-class corpus
    CHECK_FALSE(make_condition({mid.Cd * 10, mid.W, mid.U}, st).in_range);
    CHECK_FALSE(make_condition({mid.Cd, mid.W, mid.U * 2}, st).in_range);
    CHECK(make_condition({mid.Cd * 10, mid.W, mid.U}, st).raw.Cd == mid.Cd * 10);
}

TEST_CASE("coordinate normalization")
{
    const DatasetStats st = compute_stats(corpus());
    const auto& v = corpus()[3].vector;
    const Eigen::VectorXd n = normalize_coords(v, st);
    CHECK(n.minCoeff() >= 0.0);
    CHECK(n.maxCoeff() <= 1.0);
    CHECK(n[1] == 0.0); // waterline z is constant
    CHECK((denormalize_coords(n, st) - v).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(normalize_coords(Eigen::VectorXd::Zero(3), st), ShapeError);
}

TEST_CASE("constant critic gives zero loss and gradients")
{
    GanNets nets = small_nets(6, nn::Activation::LeakyReLU, 1);
    for (auto& layer : nets.d.layers) {
        layer.weight.setZero();
        layer.bias.setZero();
    }
    nets.d.layers.back().bias[0] = 2.5;
    std::mt19937_64 rng(2);
    const Matrix real = random_matrix(4, 6, rng), labels = random_matrix(4, 3, rng), z = random_matrix(4, 4, rng);
    const Vector eps = random_matrix(4, 1, rng);
    const CriticLoss c = d_loss(nets, real, labels, z, eps, 0.0);
    CHECK(c.loss == 0.0);
    CHECK(flatten(c.grads) == std::vector<double>(nets.d.size(), 0.0));
    const GeneratorLoss g = g_loss(nets, z, labels);
    CHECK(g.loss == -2.5);
    CHECK(flatten(g.grads) == std::vector<double>(nets.g.size(), 0.0));
}

TEST_CASE("critic and generator gradients match central differences")
{
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const auto act = seed % 2 ? nn::Activation::Tanh : nn::Activation::LeakyReLU;
        GanNets nets = small_nets(5, act, seed);
        std::mt19937_64 rng(seed + 50);
        const Matrix real = random_matrix(4, 5, rng), labels = random_matrix(4, 3, rng);
        Matrix z = random_matrix(4, 4, rng);
        const Vector eps = random_matrix(4, 1, rng);
        INFO("seed " << seed);

        const CriticLoss c = d_loss(nets, real, labels, z, eps, 10.0);
        CHECK(c.loss == doctest::Approx(-c.wasserstein + 10.0 * c.gp));
        const double d_err = fd_relative_error(nets.d, c.grads, [&](const nn::MlpParams<double>& p) {
            GanNets n = nets;
            n.d = p;
            return d_loss(n, real, labels, z, eps, 10.0).loss;
        });
        CHECK(d_err < 1e-4);

        const GeneratorLoss g = g_loss(nets, z, labels);
        const double g_err = fd_relative_error(nets.g, g.grads, [&](const nn::MlpParams<double>& p) {
            GanNets n = nets;
            n.g = p;
            return g_loss(n, z, labels).loss;
        });
        CHECK(g_err < 1e-5);
    }
}

TEST_CASE("vanilla losses")
{
    GanNets nets = small_nets(5, nn::Activation::Tanh, 3);
    std::mt19937_64 rng(4);
    const Matrix real = random_matrix(4, 5, rng), labels = random_matrix(4, 3, rng), z = random_matrix(4, 4, rng);
    const VanillaLosses v = vanilla_gan_losses(nets, real, labels, z);
    const double d_err = fd_relative_error(nets.d, v.d_grads, [&](const nn::MlpParams<double>& p) {
        GanNets n = nets;
        n.d = p;
        return vanilla_gan_losses(n, real, labels, z).d_loss;
    });
    CHECK(d_err < 1e-5);
    const double g_err = fd_relative_error(nets.g, v.g_grads, [&](const nn::MlpParams<double>& p) {
        GanNets n = nets;
        n.g = p;
        return vanilla_gan_losses(n, real, labels, z).g_loss;
    });
    CHECK(g_err < 1e-5);

    // Constant logit b: D loss is log(1 + e^-b) + log(1 + e^b), G loss log(1 + e^-b).
    for (auto& layer : nets.d.layers) {
        layer.weight.setZero();
        layer.bias.setZero();
    }
    nets.d.layers.back().bias[0] = 0.7;
    const VanillaLosses c = vanilla_gan_losses(nets, real, labels, z);
    CHECK(c.d_loss == doctest::Approx(std::log1p(std::exp(-0.7)) + std::log1p(std::exp(0.7))));
    CHECK(c.g_loss == doctest::Approx(std::log1p(std::exp(-0.7))));
}

TEST_CASE("training is deterministic and checkpoints round trip")
{
    testing::ScratchDir dir("wgan_train");
    const DatasetStats st = compute_stats(corpus());
    const TrainConfig cfg = tiny_config();

    std::ostringstream m1, m2;
    const Checkpoint a = train(corpus(), st, cfg, {&m1, {}});
    const Checkpoint b = train(corpus(), st, cfg, {&m2, {}});
    CHECK(a == b);
    CHECK(m1.str() == m2.str());
    CHECK(m1.str().rfind("iteration,d_loss,g_loss,gp\n1,", 0) == 0);
    CHECK(a.iteration == 3);
    CHECK(a.rng_digest.size() == 16);

    TrainConfig other = cfg;
    other.seed = 18;
    CHECK_FALSE(train(corpus(), st, other) == a);

    save_checkpoint(dir / "a.ckpt", a);
    save_checkpoint(dir / "b.ckpt", b);
    CHECK(testing::slurp(dir / "a.ckpt") == testing::slurp(dir / "b.ckpt"));
    const Checkpoint back = load_checkpoint(dir / "a.ckpt");
    CHECK(back == a);
    save_checkpoint(dir / "c.ckpt", back);
    CHECK(testing::slurp(dir / "c.ckpt") == testing::slurp(dir / "a.ckpt"));

    TrainConfig vanilla = cfg;
    vanilla.loss_mode = LossMode::VanillaGan;
    const Checkpoint v = train(corpus(), st, vanilla);
    CHECK(v.nets.g.all_finite());
}

TEST_CASE("corrupt checkpoints are rejected")
{
    testing::ScratchDir dir("wgan_corrupt");
    const Checkpoint a = train(corpus(), compute_stats(corpus()), tiny_config());
    save_checkpoint(dir / "a.ckpt", a);
    const std::string bytes = testing::slurp(dir / "a.ckpt");
    const auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream(dir / name, std::ios::binary) << content;
        return dir / name;
    };

    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(load_checkpoint(write("magic.ckpt", bad)), FormatError);
    bad = bytes;
    bad[4] = 9;
    CHECK_THROWS_AS(load_checkpoint(write("version.ckpt", bad)), FormatError);
    CHECK_THROWS_AS(load_checkpoint(write("short.ckpt", bytes.substr(0, 10))), FormatError);
    CHECK_THROWS_AS(load_checkpoint(write("trunc.ckpt", bytes.substr(0, bytes.size() - 8))), FormatError);
    bad = bytes;
    bad[20] = '}';
    CHECK_THROWS_AS(load_checkpoint(write("json.ckpt", bad)), FormatError);
    bad = bytes;
    const double nan = std::nan("");
    bad.replace(bad.size() - 8, 8, reinterpret_cast<const char*>(&nan), 8);
    try {
        (void)load_checkpoint(write("nan.ckpt", bad));
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset " + std::to_string(bytes.size() - 8)) != std::string::npos);
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IOError);
}

TEST_CASE("divergence stops training with a diagnostic checkpoint")
{
    testing::ScratchDir dir("wgan_nan");
    TrainConfig cfg = tiny_config();
    cfg.adam.lr = 1e300;
    cfg.iterations = 50;
    TrainOptions opts;
    opts.diagnostic_checkpoint = dir / "diag.ckpt";
    CHECK_THROWS_AS(train(corpus(), compute_stats(corpus()), cfg, opts), NumericalError);
    CHECK(std::filesystem::exists(dir / "diag.ckpt"));
    CHECK(load_checkpoint(dir / "diag.ckpt").iteration >= 1);
}

TEST_CASE("generation")
{
    const DatasetStats st = compute_stats(corpus());
    const Checkpoint ck = train(corpus(), st, tiny_config());
    const std::vector<Label> req{corpus()[0].label, corpus()[5].label};
    const auto a = generate(ck, req, 3, 42);
    REQUIRE(a.size() == 6);
    CHECK(a[0].coords.size() == kVectorSize);
    CHECK(a[0].L == corpus()[0].params.L);
    const auto b = generate(ck, req, 3, 42);
    for (std::size_t k = 0; k < a.size(); ++k)
        CHECK(a[k].coords == b[k].coords);
    CHECK_FALSE(a[0].coords == a[1].coords);
    // Sample streams do not depend on how many samples are drawn.
    const auto one = generate(ck, req, 1, 42);
    CHECK(one[1].coords == a[3].coords);
    CHECK_FALSE(generate(ck, req, 1, 43)[0].coords == one[0].coords);

    const Matrix in = generator_inputs(ck, req, 2, 42);
    CHECK(in.cols() == 4 + 3);
    const auto cond = make_condition(req[1], st);
    CHECK(in(2, 4) == cond.normalized[0]);
    CHECK(in(3, 6) == cond.normalized[2]);
}
