#include "hullgan/wgan.hpp"

#include "hullgan/errors.hpp"
#include "text_io.hpp"

#include <json.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace hullgan {

using nlohmann::json;

namespace {

std::string_view activation_name(nn::Activation a)
{
    switch (a) {
    case nn::Activation::Identity:
        return "identity";
    case nn::Activation::LeakyReLU:
        return "leaky_relu";
    case nn::Activation::Tanh:
        return "tanh";
    case nn::Activation::Sigmoid:
        return "sigmoid";
    }
    return "identity";
}

nn::Activation parse_activation(std::string_view s)
{
    if (s == "identity")
        return nn::Activation::Identity;
    if (s == "leaky_relu")
        return nn::Activation::LeakyReLU;
    if (s == "tanh")
        return nn::Activation::Tanh;
    if (s == "sigmoid")
        return nn::Activation::Sigmoid;
    throw FormatError("unknown activation '" + std::string(s) + "'");
}

LossMode parse_loss_mode(std::string_view s)
{
    if (s == "wgan_gp")
        return LossMode::WganGp;
    if (s == "vanilla")
        return LossMode::VanillaGan;
    throw FormatError("unknown loss mode '" + std::string(s) + "'");
}

std::vector<Index> parse_widths(std::string_view s)
{
    std::vector<Index> out;
    for (auto cell : detail::split(s, ','))
        out.push_back(static_cast<Index>(detail::parse_double(cell, "layer width")));
    return out;
}

// Draws a batch of standard normals, row by row.
template <class Rng>
Matrix normal_matrix(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index k = 0; k < m.size(); ++k)
        m.data()[k] = normal(rng);
    return m;
}

double stable_softplus(double u)
{
    return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

double sigmoid(double u)
{
    return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

// Loss sum_i softplus(sign * clamp(logit_i)) / n and its derivative wrt the logits.
double softplus_term(const Matrix& logits, Index begin, Index count, double sign, Matrix& upstream)
{
    double total = 0.0;
    for (Index i = begin; i < begin + count; ++i) {
        const double raw = logits(i, 0);
        const double l = std::clamp(raw, -kLogitClamp, kLogitClamp);
        total += stable_softplus(sign * l);
        const double inside = (raw > -kLogitClamp && raw < kLogitClamp) ? 1.0 : 0.0;
        upstream(i, 0) = inside * sign * sigmoid(sign * l) / double(count);
    }
    return total / double(count);
}

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

template <class Rng>
std::string rng_digest(const Rng& rng)
{
    std::ostringstream os;
    os << rng;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
    return buf;
}

template <class Rng>
GanNets make_nets_with(const TrainConfig& cfg, Index data_dim, Rng& rng)
{
    GanNets nets{cfg.g_spec(data_dim), cfg.d_spec(data_dim), {}, {}};
    nets.g = nn::init_params<double>(nets.g_spec, rng);
    nets.d = nn::init_params<double>(nets.d_spec, rng);
    return nets;
}

} // namespace

std::string_view to_string(LossMode m)
{
    return m == LossMode::WganGp ? "wgan_gp" : "vanilla";
}

nn::MlpSpec TrainConfig::g_spec(Index data_dim) const
{
    nn::MlpSpec s;
    s.widths.push_back(latent_dim + kLabelDim);
    s.widths.insert(s.widths.end(), g_hidden.begin(), g_hidden.end());
    s.widths.push_back(data_dim);
    s.hidden = hidden_activation;
    s.output = nn::Activation::Identity;
    s.leaky_slope = leaky_slope;
    return s;
}

nn::MlpSpec TrainConfig::d_spec(Index data_dim) const
{
    nn::MlpSpec s;
    s.widths.push_back(data_dim + kLabelDim);
    s.widths.insert(s.widths.end(), d_hidden.begin(), d_hidden.end());
    s.widths.push_back(1);
    s.hidden = hidden_activation;
    s.output = nn::Activation::Identity;
    s.leaky_slope = leaky_slope;
    return s;
}

void TrainConfig::validate() const
{
    if (latent_dim < 1)
        throw Error("latent_dim must be >= 1");
    if (!(lambda_gp >= 0.0))
        throw Error("lambda_gp must be >= 0");
    if (n_critic < 1)
        throw Error("n_critic must be >= 1");
    if (batch_size < 2)
        throw Error("batch_size must be >= 2");
    if (iterations < 1)
        throw Error("iterations must be >= 1");
    if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)
        || !(adam.eps > 0.0))
        throw Error("invalid Adam settings");
    g_spec(1).validate();
    d_spec(1).validate();
}

bool TrainConfig::apply(std::string_view key, std::string_view value)
{
    const auto num = [&] { return detail::parse_double(value, std::string(key)); };
    const auto integer = [&] {
        const double v = num();
        if (v != std::floor(v))
            throw FormatError(std::string(key) + ": expected an integer, got '" + std::string(value) + "'");
        return v;
    };
    if (key == "latent_dim")
        latent_dim = static_cast<Index>(integer());
    else if (key == "g_hidden")
        g_hidden = parse_widths(value);
    else if (key == "d_hidden")
        d_hidden = parse_widths(value);
    else if (key == "activation")
        hidden_activation = parse_activation(value);
    else if (key == "leaky_slope")
        leaky_slope = num();
    else if (key == "lambda_gp")
        lambda_gp = num();
    else if (key == "n_critic")
        n_critic = static_cast<int>(integer());
    else if (key == "batch_size")
        batch_size = static_cast<int>(integer());
    else if (key == "iterations")
        iterations = static_cast<int>(integer());
    else if (key == "lr")
        adam.lr = num();
    else if (key == "beta1")
        adam.beta1 = num();
    else if (key == "beta2")
        adam.beta2 = num();
    else if (key == "adam_eps")
        adam.eps = num();
    else if (key == "seed")
        seed = static_cast<std::uint64_t>(integer());
    else if (key == "loss_mode")
        loss_mode = parse_loss_mode(value);
    else
        return false;
    return true;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        auto t = detail::trim(line);
        if (const auto hash = t.find('#'); hash != std::string_view::npos)
            t = detail::trim(t.substr(0, hash));
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw FormatError(path.string() + ": line " + std::to_string(row) + ": expected key=value");
        kv[std::string(detail::trim(t.substr(0, eq)))] = std::string(detail::trim(t.substr(eq + 1)));
    }
    return kv;
}

ConditionLabel make_condition(const Label& raw, const DatasetStats& stats)
{
    // A label that is constant over the corpus (U in a single-class set) carries
    // no information: it maps to 0 and is in range only at that value.
    const std::array<double, 3> values{raw.Cd, raw.W, raw.U};
    ConditionLabel c{raw, {}, true};
    for (std::size_t k = 0; k < 3; ++k) {
        const Summary& s = stats.labels[k];
        const double range = s.max - s.min;
        double v = 0.0;
        if (range > 0.0) {
            v = (values[k] - s.min) / range;
            if (!(v >= 0.0 && v <= 1.0))
                c.in_range = false;
        } else if (std::abs(values[k] - s.min) > 1e-9 * std::max(1.0, std::abs(s.min))) {
            c.in_range = false;
        }
        c.normalized[k] = v;
    }
    return c;
}

GanNets make_nets(const TrainConfig& cfg, Index data_dim)
{
    std::mt19937_64 rng(cfg.seed);
    return make_nets_with(cfg, data_dim, rng);
}

Matrix concat_cols(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows())
        throw ShapeError("cannot concatenate batches with " + std::to_string(a.rows()) + " and "
                         + std::to_string(b.rows()) + " rows");
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

CriticLoss d_loss(const GanNets& nets, const Matrix& real, const Matrix& labels, const Matrix& z, const Vector& eps,
                  double lambda_gp)
{
    const Index batch = real.rows();
    if (labels.rows() != batch || z.rows() != batch || eps.size() != batch)
        throw ShapeError("critic batch pieces disagree on the batch size");
    if (real.cols() != nets.data_dim() || labels.cols() != kLabelDim)
        throw ShapeError("critic batch has the wrong width");

    const Matrix fake = nn::forward(nets.g_spec, nets.g, concat_cols(z, labels));

    Matrix both(2 * batch, nets.d_spec.input_width());
    both.topRows(batch) = concat_cols(real, labels);
    both.bottomRows(batch) = concat_cols(fake, labels);
    const auto trace = nn::forward_trace(nets.d_spec, nets.d, both);
    const Matrix& scores = trace.output();

    CriticLoss out;
    const double mean_real = scores.topRows(batch).mean();
    const double mean_fake = scores.bottomRows(batch).mean();
    out.wasserstein = mean_real - mean_fake;

    Matrix upstream(2 * batch, 1);
    upstream.topRows(batch).setConstant(-1.0 / double(batch));
    upstream.bottomRows(batch).setConstant(1.0 / double(batch));
    out.grads = nn::backward(nets.d_spec, nets.d, trace, upstream).params;
    out.loss = mean_fake - mean_real;

    if (lambda_gp > 0.0) {
        Matrix x_hat = fake;
        for (Index i = 0; i < batch; ++i)
            x_hat.row(i) = eps[i] * real.row(i) + (1.0 - eps[i]) * fake.row(i);
        auto gp = nn::gradient_penalty(nets.d_spec, nets.d, concat_cols(x_hat, labels), nets.data_dim());
        out.gp = gp.value;
        out.loss += lambda_gp * gp.value;
        gp.grads *= lambda_gp;
        out.grads += gp.grads;
    }
    return out;
}

GeneratorLoss g_loss(const GanNets& nets, const Matrix& z, const Matrix& labels)
{
    const Index batch = z.rows();
    if (labels.rows() != batch || labels.cols() != kLabelDim)
        throw ShapeError("generator batch pieces disagree");
    const auto g_trace = nn::forward_trace(nets.g_spec, nets.g, concat_cols(z, labels));
    const auto d_trace = nn::forward_trace(nets.d_spec, nets.d, concat_cols(g_trace.output(), labels));

    GeneratorLoss out;
    out.loss = -d_trace.output().mean();
    const Matrix upstream = Matrix::Constant(batch, 1, -1.0 / double(batch));
    const auto d_grads = nn::backward(nets.d_spec, nets.d, d_trace, upstream, false);
    const Matrix to_fake = d_grads.input.leftCols(nets.data_dim());
    out.grads = nn::backward(nets.g_spec, nets.g, g_trace, to_fake).params;
    return out;
}

VanillaLosses vanilla_gan_losses(const GanNets& nets, const Matrix& real, const Matrix& labels, const Matrix& z)
{
    const Index batch = real.rows();
    if (labels.rows() != batch || z.rows() != batch)
        throw ShapeError("vanilla GAN batch pieces disagree");
    VanillaLosses out;

    // Discriminator: -mean log sigmoid(l_real) - mean log(1 - sigmoid(l_fake)).
    const Matrix fake = nn::forward(nets.g_spec, nets.g, concat_cols(z, labels));
    Matrix both(2 * batch, nets.d_spec.input_width());
    both.topRows(batch) = concat_cols(real, labels);
    both.bottomRows(batch) = concat_cols(fake, labels);
    const auto d_trace = nn::forward_trace(nets.d_spec, nets.d, both);
    Matrix upstream(2 * batch, 1);
    out.d_loss = softplus_term(d_trace.output(), 0, batch, -1.0, upstream)
        + softplus_term(d_trace.output(), batch, batch, 1.0, upstream);
    out.d_grads = nn::backward(nets.d_spec, nets.d, d_trace, upstream).params;

    // Generator: -mean log sigmoid(l_fake).
    const auto g_trace = nn::forward_trace(nets.g_spec, nets.g, concat_cols(z, labels));
    const auto f_trace = nn::forward_trace(nets.d_spec, nets.d, concat_cols(g_trace.output(), labels));
    Matrix g_up(batch, 1);
    out.g_loss = softplus_term(f_trace.output(), 0, batch, -1.0, g_up);
    const auto through_d = nn::backward(nets.d_spec, nets.d, f_trace, g_up, false);
    const Matrix to_fake = through_d.input.leftCols(nets.data_dim());
    out.g_grads = nn::backward(nets.g_spec, nets.g, g_trace, to_fake).params;
    return out;
}

Eigen::VectorXd normalize_coords(const Eigen::VectorXd& coords, const DatasetStats& stats)
{
    if (coords.size() != stats.coord_min.size())
        throw ShapeError("coordinate vector does not match the statistics");
    Eigen::VectorXd out(coords.size());
    for (Index i = 0; i < coords.size(); ++i) {
        const double range = stats.coord_max[i] - stats.coord_min[i];
        out[i] = range > 0.0 ? (coords[i] - stats.coord_min[i]) / range : 0.0;
    }
    return out;
}

Eigen::VectorXd denormalize_coords(const Eigen::VectorXd& normalized, const DatasetStats& stats)
{
    if (normalized.size() != stats.coord_min.size())
        throw ShapeError("coordinate vector does not match the statistics");
    return (stats.coord_min.array() + normalized.array() * (stats.coord_max - stats.coord_min).array()).matrix();
}

bool Checkpoint::operator==(const Checkpoint& o) const
{
    return version == o.version && nets.g_spec == o.nets.g_spec && nets.d_spec == o.nets.d_spec
        && nets.g == o.nets.g && nets.d == o.nets.d && stats == o.stats && grid == o.grid && length == o.length
        && config == o.config && iteration == o.iteration && rng_digest == o.rng_digest;
}

Checkpoint train(std::span<const LabeledSample> samples, const DatasetStats& stats, const TrainConfig& cfg,
                 const TrainOptions& options)
{
    cfg.validate();
    if (samples.empty())
        throw Error("cannot train on an empty dataset");
#if defined(__GLIBC__)
    // Keep the large per-step temporaries on the heap instead of fresh mmaps.
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
    const Index dim = samples.front().vector.size();
    const auto n = static_cast<Index>(samples.size());

    Matrix data(n, dim);
    Matrix labels(n, kLabelDim);
    for (Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        if (s.vector.size() != dim || s.params.L != samples.front().params.L)
            throw Error("training samples must share the vector size and hull length");
        data.row(i) = normalize_coords(s.vector, stats).transpose();
        const auto c = make_condition(s.label, stats).normalized;
        labels.row(i) << c[0], c[1], c[2];
    }

    std::mt19937_64 rng(cfg.seed);
    Checkpoint ckpt;
    ckpt.nets = make_nets_with(cfg, dim, rng);
    ckpt.stats = stats;
    ckpt.grid = GridSpec::standard();
    ckpt.length = samples.front().params.L;
    ckpt.config = cfg;

    auto g_opt = nn::AdamState<double>::start(ckpt.nets.g, cfg.adam);
    auto d_opt = nn::AdamState<double>::start(ckpt.nets.d, cfg.adam);

    const Index batch = cfg.batch_size;
    const Index latent = cfg.latent_dim;
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Matrix real(batch, dim), cond(batch, kLabelDim);
    Vector eps(batch);
    const auto draw_batch = [&](bool with_data) {
        for (Index b = 0; b < batch; ++b) {
            const Index k = pick(rng);
            if (with_data)
                real.row(b) = data.row(k);
            cond.row(b) = labels.row(k);
        }
    };

    if (options.metrics)
        *options.metrics << "iteration,d_loss,g_loss,gp\n";

    const auto fail = [&](std::int64_t it, const char* what, double value) {
        ckpt.iteration = it;
        ckpt.rng_digest = rng_digest(rng);
        if (!options.diagnostic_checkpoint.empty() && ckpt.nets.g.all_finite() && ckpt.nets.d.all_finite())
            save_checkpoint(options.diagnostic_checkpoint, ckpt);
        throw NumericalError(std::string("non-finite ") + what + " (" + std::to_string(value) + ") at iteration "
                             + std::to_string(it));
    };

    for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
        MetricsRow row{it, 0.0, 0.0, 0.0};
        if (cfg.loss_mode == LossMode::WganGp) {
            for (int k = 0; k < cfg.n_critic; ++k) {
                draw_batch(true);
                const Matrix z = normal_matrix(batch, latent, rng);
                for (Index b = 0; b < batch; ++b)
                    eps[b] = uniform(rng);
                CriticLoss c = d_loss(ckpt.nets, real, cond, z, eps, cfg.lambda_gp);
                if (!std::isfinite(c.loss) || !c.grads.all_finite())
                    fail(it, "critic loss or gradient", c.loss);
                nn::adam_step(d_opt, ckpt.nets.d, c.grads);
                row.d_loss = c.loss;
                row.gp = c.gp;
            }
            draw_batch(false);
            const Matrix z = normal_matrix(batch, latent, rng);
            const GeneratorLoss g = g_loss(ckpt.nets, z, cond);
            if (!std::isfinite(g.loss) || !g.grads.all_finite())
                fail(it, "generator loss or gradient", g.loss);
            nn::adam_step(g_opt, ckpt.nets.g, g.grads);
            row.g_loss = g.loss;
        } else {
            for (int k = 0; k < cfg.n_critic; ++k) {
                draw_batch(true);
                const Matrix z = normal_matrix(batch, latent, rng);
                const VanillaLosses v = vanilla_gan_losses(ckpt.nets, real, cond, z);
                if (!std::isfinite(v.d_loss) || !v.d_grads.all_finite())
                    fail(it, "discriminator loss or gradient", v.d_loss);
                nn::adam_step(d_opt, ckpt.nets.d, v.d_grads);
                row.d_loss = v.d_loss;
            }
            draw_batch(true);
            const Matrix z = normal_matrix(batch, latent, rng);
            const VanillaLosses v = vanilla_gan_losses(ckpt.nets, real, cond, z);
            if (!std::isfinite(v.g_loss) || !v.g_grads.all_finite())
                fail(it, "generator loss or gradient", v.g_loss);
            nn::adam_step(g_opt, ckpt.nets.g, v.g_grads);
            row.g_loss = v.g_loss;
        }
        if (options.metrics)
            *options.metrics << row.iteration << ',' << detail::format_double(row.d_loss) << ','
                             << detail::format_double(row.g_loss) << ',' << detail::format_double(row.gp) << '\n';
    }
    ckpt.iteration = cfg.iterations;
    ckpt.rng_digest = rng_digest(rng);
    return ckpt;
}

Matrix generator_inputs(const Checkpoint& ckpt, std::span<const Label> requests, int n_per_request,
                        std::uint64_t seed)
{
    if (n_per_request < 1)
        throw Error("need at least one sample per request");
    const Index latent = ckpt.nets.latent_dim();
    Matrix inputs(static_cast<Index>(requests.size()) * n_per_request, latent + kLabelDim);
    std::normal_distribution<double> normal(0.0, 1.0);
    Index row = 0;
    for (std::size_t r = 0; r < requests.size(); ++r) {
        const auto cond = make_condition(requests[r], ckpt.stats);
        for (int s = 0; s < n_per_request; ++s, ++row) {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(s)};
            std::mt19937_64 rng(seq);
            normal.reset();
            for (Index k = 0; k < latent; ++k)
                inputs(row, k) = normal(rng);
            for (Index k = 0; k < kLabelDim; ++k)
                inputs(row, latent + k) = cond.normalized[static_cast<std::size_t>(k)];
        }
    }
    return inputs;
}

std::vector<HullPointCloud> generate(const Checkpoint& ckpt, std::span<const Label> requests, int n_per_request,
                                     std::uint64_t seed)
{
    const Matrix out = nn::forward(ckpt.nets.g_spec, ckpt.nets.g, generator_inputs(ckpt, requests, n_per_request, seed));
    std::vector<HullPointCloud> clouds;
    clouds.reserve(static_cast<std::size_t>(out.rows()));
    for (Index i = 0; i < out.rows(); ++i)
        clouds.push_back({denormalize_coords(out.row(i).transpose(), ckpt.stats), ckpt.length});
    return clouds;
}

// ---------------------------------------------------------------------------
// Checkpoint file: "HFGN", u32 version, u64 header length, JSON header, then
// the tensors as little-endian doubles in the header's order.

namespace {

constexpr char kMagic[4] = {'H', 'F', 'G', 'N'};

json spec_to_json(const nn::MlpSpec& s)
{
    return {{"widths", s.widths},
            {"hidden", activation_name(s.hidden)},
            {"output", activation_name(s.output)},
            {"leaky_slope", s.leaky_slope}};
}

nn::MlpSpec spec_from_json(const json& j)
{
    nn::MlpSpec s;
    s.widths = j.at("widths").get<std::vector<Index>>();
    s.hidden = parse_activation(j.at("hidden").get<std::string>());
    s.output = parse_activation(j.at("output").get<std::string>());
    s.leaky_slope = j.at("leaky_slope").get<double>();
    s.validate();
    return s;
}

std::vector<double> to_std(const Eigen::VectorXd& v)
{
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd from_std(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

json stats_to_json(const DatasetStats& st)
{
    json labels = json::array();
    for (const Summary& s : st.labels)
        labels.push_back({{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"std", s.std}});
    return {{"count", st.count}, {"labels", labels}, {"coord_min", to_std(st.coord_min)},
            {"coord_max", to_std(st.coord_max)}};
}

DatasetStats stats_from_json(const json& j)
{
    DatasetStats st;
    st.count = j.at("count").get<std::size_t>();
    const auto& labels = j.at("labels");
    if (labels.size() != 3)
        throw FormatError("checkpoint header: expected 3 label summaries");
    for (std::size_t k = 0; k < 3; ++k)
        st.labels[k] = {labels[k].at("min").get<double>(), labels[k].at("max").get<double>(),
                        labels[k].at("mean").get<double>(), labels[k].at("std").get<double>()};
    st.coord_min = from_std(j.at("coord_min").get<std::vector<double>>());
    st.coord_max = from_std(j.at("coord_max").get<std::vector<double>>());
    return st;
}

json config_to_json(const TrainConfig& c)
{
    return {{"latent_dim", c.latent_dim},
            {"g_hidden", c.g_hidden},
            {"d_hidden", c.d_hidden},
            {"activation", activation_name(c.hidden_activation)},
            {"leaky_slope", c.leaky_slope},
            {"lambda_gp", c.lambda_gp},
            {"n_critic", c.n_critic},
            {"batch_size", c.batch_size},
            {"iterations", c.iterations},
            {"lr", c.adam.lr},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"adam_eps", c.adam.eps},
            {"seed", c.seed},
            {"loss_mode", to_string(c.loss_mode)}};
}

TrainConfig config_from_json(const json& j)
{
    TrainConfig c;
    c.latent_dim = j.at("latent_dim").get<Index>();
    c.g_hidden = j.at("g_hidden").get<std::vector<Index>>();
    c.d_hidden = j.at("d_hidden").get<std::vector<Index>>();
    c.hidden_activation = parse_activation(j.at("activation").get<std::string>());
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.lambda_gp = j.at("lambda_gp").get<double>();
    c.n_critic = j.at("n_critic").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.iterations = j.at("iterations").get<int>();
    c.adam.lr = j.at("lr").get<double>();
    c.adam.beta1 = j.at("beta1").get<double>();
    c.adam.beta2 = j.at("beta2").get<double>();
    c.adam.eps = j.at("adam_eps").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.loss_mode = parse_loss_mode(j.at("loss_mode").get<std::string>());
    return c;
}

void put_u32(std::string& out, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b)
        out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v)
{
    for (int b = 0; b < 8; ++b)
        out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_le(const std::string& in, std::size_t offset, int bytes)
{
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b)
        v |= std::uint64_t(static_cast<unsigned char>(in[offset + static_cast<std::size_t>(b)])) << (8 * b);
    return v;
}

struct TensorRef {
    std::string name;
    double* data;
    Index rows;
    Index cols;
};

std::vector<TensorRef> tensor_refs(GanNets& nets)
{
    std::vector<TensorRef> refs;
    const auto add = [&](const char* net, nn::MlpParams<double>& p) {
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            auto& layer = p.layers[l];
            const std::string base = std::string(net) + "." + std::to_string(l);
            refs.push_back({base + ".weight", layer.weight.data(), layer.weight.rows(), layer.weight.cols()});
            refs.push_back({base + ".bias", layer.bias.data(), 1, layer.bias.size()});
        }
    };
    add("g", nets.g);
    add("d", nets.d);
    return refs;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    if (!ckpt.nets.g.all_finite() || !ckpt.nets.d.all_finite())
        throw NumericalError("refusing to save non-finite network parameters");
    nn::check_conforms(ckpt.nets.g_spec, ckpt.nets.g);
    nn::check_conforms(ckpt.nets.d_spec, ckpt.nets.d);

    GanNets nets = ckpt.nets;
    const auto refs = tensor_refs(nets);
    json tensors = json::array();
    std::uint64_t offset = 0;
    for (const auto& r : refs) {
        tensors.push_back({{"name", r.name}, {"shape", {r.rows, r.cols}}, {"offset", offset}});
        offset += static_cast<std::uint64_t>(r.rows * r.cols) * 8;
    }
    const json header = {{"g_spec", spec_to_json(ckpt.nets.g_spec)},
                         {"d_spec", spec_to_json(ckpt.nets.d_spec)},
                         {"stats", stats_to_json(ckpt.stats)},
                         {"grid", {{"x_stations", to_std(ckpt.grid.x_stations)},
                                   {"z_stations", to_std(ckpt.grid.z_stations)}}},
                         {"length", ckpt.length},
                         {"config", config_to_json(ckpt.config)},
                         {"iteration", ckpt.iteration},
                         {"rng_digest", ckpt.rng_digest},
                         {"tensors", tensors},
                         {"blob_bytes", offset}};
    const std::string text = header.dump();

    std::string bytes(kMagic, 4);
    put_u32(bytes, ckpt.version);
    put_u64(bytes, text.size());
    bytes += text;
    bytes.reserve(bytes.size() + offset);
    for (const auto& r : refs)
        for (Index k = 0; k < r.rows * r.cols; ++k)
            put_u64(bytes, std::bit_cast<std::uint64_t>(r.data[k]));

    auto out = detail::open_output(path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IOError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string where = path.string() + ": ";

    constexpr std::size_t kPrefix = 16;
    if (bytes.size() < kPrefix)
        throw FormatError(where + "truncated at byte " + std::to_string(bytes.size()) + ", the fixed prefix needs "
                          + std::to_string(kPrefix) + " bytes");
    if (bytes.compare(0, 4, kMagic, 4) != 0)
        throw FormatError(where + "bad magic at byte offset 0 (expected \"HFGN\")");
    const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
    if (version != kCheckpointVersion)
        throw FormatError(where + "unsupported format version " + std::to_string(version) + " at byte offset 4 (expected "
                          + std::to_string(kCheckpointVersion) + ")");
    const std::uint64_t header_len = get_le(bytes, 8, 8);
    if (header_len > bytes.size() - kPrefix)
        throw FormatError(where + "header declares " + std::to_string(header_len) + " bytes at byte offset 16 but only "
                          + std::to_string(bytes.size() - kPrefix) + " remain");

    json header;
    try {
        header = json::parse(bytes.begin() + kPrefix, bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + header_len));
    } catch (const json::parse_error& e) {
        throw FormatError(where + "malformed JSON header at byte offset " + std::to_string(kPrefix + e.byte) + ": "
                          + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.version = version;
        ckpt.nets.g_spec = spec_from_json(header.at("g_spec"));
        ckpt.nets.d_spec = spec_from_json(header.at("d_spec"));
        ckpt.stats = stats_from_json(header.at("stats"));
        ckpt.grid.x_stations = from_std(header.at("grid").at("x_stations").get<std::vector<double>>());
        ckpt.grid.z_stations = from_std(header.at("grid").at("z_stations").get<std::vector<double>>());
        ckpt.length = header.at("length").get<double>();
        ckpt.config = config_from_json(header.at("config"));
        ckpt.iteration = header.at("iteration").get<std::int64_t>();
        ckpt.rng_digest = header.at("rng_digest").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(where + "header field error: " + e.what());
    }
    ckpt.nets.g = nn::MlpParams<double>::zeros(ckpt.nets.g_spec);
    ckpt.nets.d = nn::MlpParams<double>::zeros(ckpt.nets.d_spec);

    const std::size_t blob_start = kPrefix + header_len;
    const std::uint64_t blob_bytes = header.value("blob_bytes", std::uint64_t{0});
    if (bytes.size() - blob_start != blob_bytes)
        throw FormatError(where + "tensor blob at byte offset " + std::to_string(blob_start) + " has "
                          + std::to_string(bytes.size() - blob_start) + " bytes, expected " + std::to_string(blob_bytes));

    const auto refs = tensor_refs(ckpt.nets);
    const auto& listed = header.at("tensors");
    if (listed.size() != refs.size())
        throw FormatError(where + "header lists " + std::to_string(listed.size()) + " tensors, the specs need "
                          + std::to_string(refs.size()));
    for (std::size_t t = 0; t < refs.size(); ++t) {
        const auto& r = refs[t];
        const auto& entry = listed[t];
        const auto shape = entry.at("shape").get<std::vector<Index>>();
        if (entry.at("name").get<std::string>() != r.name || shape.size() != 2 || shape[0] != r.rows
            || shape[1] != r.cols)
            throw FormatError(where + "tensor " + std::to_string(t) + " (" + r.name + ") does not match its spec");
        const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
        const auto count = static_cast<std::uint64_t>(r.rows * r.cols);
        if (offset + 8 * count > blob_bytes)
            throw FormatError(where + "tensor " + r.name + " overruns the blob");
        for (std::uint64_t k = 0; k < count; ++k) {
            const double v = std::bit_cast<double>(get_le(bytes, blob_start + offset + 8 * k, 8));
            if (!std::isfinite(v))
                throw FormatError(where + "non-finite value in " + r.name + " at byte offset "
                                  + std::to_string(blob_start + offset + 8 * k));
            r.data[k] = v;
        }
    }
    return ckpt;
}

} // namespace hullgan
