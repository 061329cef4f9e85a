#pragma once

#include "hullgan/dataset.hpp"
#include "hullgan/geometry.hpp"
#include "hullgan/nn.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hullgan {

using Matrix = nn::Tensor<double>;
using Vector = nn::Vector<double>;

/// Number of condition inputs: normalized (Cd, W, U).
inline constexpr Index kLabelDim = 3;

enum class LossMode { WganGp, VanillaGan };

std::string_view to_string(LossMode m);

struct TrainConfig {
    Index latent_dim = 64;
    std::vector<Index> g_hidden{256, 512, 1024};
    std::vector<Index> d_hidden{512, 256, 128};
    nn::Activation hidden_activation = nn::Activation::LeakyReLU;
    double leaky_slope = 0.2;
    double lambda_gp = 10.0;
    int n_critic = 5;
    int batch_size = 64;
    int iterations = 7000;
    nn::AdamConfig adam;
    std::uint64_t seed = 0;
    LossMode loss_mode = LossMode::WganGp;

    /// [latent + labels] -> g_hidden... -> data, identity output.
    nn::MlpSpec g_spec(Index data_dim) const;
    /// [data + labels] -> d_hidden... -> 1, identity output (logit in vanilla mode).
    nn::MlpSpec d_spec(Index data_dim) const;

    void validate() const;

    /// Applies one key=value override; returns false for keys it does not own.
    bool apply(std::string_view key, std::string_view value);

    bool operator==(const TrainConfig&) const = default;
};

/// key=value file with '#' comments. Throws FormatError naming the line.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// A request mapped into the network's condition space. Components that are
/// constant over the training corpus map to 0.
struct ConditionLabel {
    Label raw;
    std::array<double, 3> normalized{};
    /// False when some component falls outside the training range.
    bool in_range = true;
};

ConditionLabel make_condition(const Label& raw, const DatasetStats& stats);

/// Generator and discriminator with their specs.
struct GanNets {
    nn::MlpSpec g_spec;
    nn::MlpSpec d_spec;
    nn::MlpParams<double> g;
    nn::MlpParams<double> d;

    Index data_dim() const { return g_spec.output_width(); }
    Index latent_dim() const { return g_spec.input_width() - kLabelDim; }
};

/// Random nets for the config, drawn from the config seed.
GanNets make_nets(const TrainConfig& cfg, Index data_dim);

/// Row-wise concatenation [a | b].
Matrix concat_cols(const Matrix& a, const Matrix& b);

struct CriticLoss {
    double loss = 0.0;
    double wasserstein = 0.0; // mean D(real) - mean D(fake)
    double gp = 0.0;
    nn::MlpParams<double> grads;
};

/// mean D(fake) - mean D(real) + lambda * L_gp, with x_hat = eps * real +
/// (1 - eps) * fake per row. All data inputs are normalized coordinates.
CriticLoss d_loss(const GanNets& nets, const Matrix& real, const Matrix& labels, const Matrix& z,
                  const Vector& eps, double lambda_gp);

struct GeneratorLoss {
    double loss = 0.0;
    nn::MlpParams<double> grads;
};

/// -mean D(G(z, c), c) and its generator gradient.
GeneratorLoss g_loss(const GanNets& nets, const Matrix& z, const Matrix& labels);

struct VanillaLosses {
    double d_loss = 0.0;
    double g_loss = 0.0;
    nn::MlpParams<double> d_grads;
    nn::MlpParams<double> g_grads;
};

inline constexpr double kLogitClamp = 30.0;

/// Cross-entropy GAN losses on sigmoid(D). The generator term is the
/// non-saturating -mean log D(G(z)). Logits are clamped to +-30.
VanillaLosses vanilla_gan_losses(const GanNets& nets, const Matrix& real, const Matrix& labels, const Matrix& z);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to generate hulls without any other file.
struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    GanNets nets;
    DatasetStats stats;
    GridSpec grid;
    double length = 100.0;
    TrainConfig config;
    std::int64_t iteration = 0;
    std::string rng_digest;

    bool operator==(const Checkpoint& o) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct MetricsRow {
    std::int64_t iteration = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double gp = 0.0;
};

struct TrainOptions {
    /// Receives the metrics CSV (header + one row per iteration) when set.
    std::ostream* metrics = nullptr;
    /// Where to persist the state that produced a non-finite loss.
    std::filesystem::path diagnostic_checkpoint;
};

/// Trains on the samples (all from one grid and one hull length). Labels and
/// coordinates are min-max normalized with `stats`.
Checkpoint train(std::span<const LabeledSample> samples, const DatasetStats& stats, const TrainConfig& cfg,
                 const TrainOptions& options = {});

/// Generator input rows for the requests: z drawn from a stream keyed by
/// (seed, request index, sample index), followed by the normalized label.
Matrix generator_inputs(const Checkpoint& ckpt, std::span<const Label> requests, int n_per_request,
                        std::uint64_t seed);

/// n_per_request hulls per request, request-major.
std::vector<HullPointCloud> generate(const Checkpoint& ckpt, std::span<const Label> requests, int n_per_request,
                                     std::uint64_t seed);

/// Normalized network coordinates back to meters.
Eigen::VectorXd denormalize_coords(const Eigen::VectorXd& normalized, const DatasetStats& stats);
Eigen::VectorXd normalize_coords(const Eigen::VectorXd& coords, const DatasetStats& stats);

} // namespace hullgan
