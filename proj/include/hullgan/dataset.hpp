#pragma once

#include "hullgan/geometry.hpp"
#include "hullgan/hydro.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hullgan {

enum class SpeedClass { High, Medium, Low };

inline constexpr std::array<SpeedClass, 3> kSpeedClasses{SpeedClass::High, SpeedClass::Medium, SpeedClass::Low};

std::string_view to_string(SpeedClass c);
/// Accepts high, mid, medium, low.
SpeedClass parse_speed_class(std::string_view text);
/// Design speed of the class in knots (25 / 20 / 15).
double design_speed_knots(SpeedClass c);
/// Class whose design speed is nearest to U [m/s].
SpeedClass classify_speed(double U);

/// One training sweep: every combination of the value lists at a fixed speed.
struct SweepSpec {
    SpeedClass speed_class = SpeedClass::High;
    double U_knots = 25.0;
    std::vector<double> BL_values;
    std::vector<double> dL_values;
    std::vector<double> Cm_values;
    std::vector<double> Cw_values;
    std::vector<double> Cb_values;
    double L = 100.0;

    /// Default sweep of a speed class. The lower fineness range of each class
    /// is the block coefficient and the upper one the waterplane coefficient.
    static SweepSpec table(SpeedClass c, double L = 100.0);
};

/// Cartesian product in nesting order B/L, d/L, Cm, Cw, Cb (Cb fastest).
/// Repeated list entries are dropped, keeping first occurrences.
std::vector<WigleyParams> enumerate_sweep(const SweepSpec& s);

struct LabeledSample {
    WigleyParams params;
    SpeedClass speed_class = SpeedClass::High;
    double U_knots = 0.0;
    Label label;
    Eigen::VectorXd vector; // canonical point-cloud flattening

    bool operator==(const LabeledSample& o) const
    {
        return params == o.params && speed_class == o.speed_class && U_knots == o.U_knots && label == o.label
            && vector.size() == o.vector.size() && vector == o.vector;
    }
};

struct Summary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;

    bool operator==(const Summary&) const = default;
};

/// Normalization statistics. labels[] is ordered Cd, W, U (U in m/s).
struct DatasetStats {
    std::size_t count = 0;
    std::array<Summary, 3> labels;
    Eigen::VectorXd coord_min;
    Eigen::VectorXd coord_max;

    bool operator==(const DatasetStats& o) const
    {
        return count == o.count && labels == o.labels && coord_min.size() == o.coord_min.size()
            && coord_min == o.coord_min && coord_max.size() == o.coord_max.size() && coord_max == o.coord_max;
    }
};

struct Rejection {
    std::size_t index = 0; // position in the enumeration
    WigleyParams params;
    std::string reason;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<Rejection> rejections;
    std::size_t raw_count = 0;
};

/// Enumerates, filters with validate_params, samples and labels every hull.
/// Labeling failures are collected as rejections. A nonzero limit labels only
/// that many valid hulls, evenly spaced through the enumeration.
Dataset build_dataset(const SweepSpec& s, const GridSpec& grid = GridSpec::standard(), const HydroEnv& env = {},
                      const QuadratureSpec& q = {}, std::size_t limit = 0);

/// Throws DegenerateStats for an empty corpus.
DatasetStats compute_stats(std::span<const LabeledSample> samples);

/// Label recomputed from the stored vector with the given physics settings.
Label relabel(const LabeledSample& sample, const HydroEnv& env = {}, const QuadratureSpec& q = {},
              const GridSpec& grid = GridSpec::standard());

/// Sidecar path holding the stats of a dataset CSV.
std::filesystem::path stats_path(const std::filesystem::path& csv);

void write_csv(const std::filesystem::path& path, std::span<const LabeledSample> samples, const DatasetStats& stats);
std::pair<std::vector<LabeledSample>, DatasetStats> read_csv(const std::filesystem::path& path);

void write_stats(const std::filesystem::path& path, const DatasetStats& stats);
DatasetStats read_stats(const std::filesystem::path& path);

/// Min-max map of (Cd, W, U) to [0, 1]. Throws DegenerateStats when a label has max == min.
std::array<double, 3> normalize_labels(const Label& label, const DatasetStats& stats);
Label denormalize_labels(const std::array<double, 3>& normalized, const DatasetStats& stats);

/// Deterministic split: returns (kept, held_out) both in original order.
std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>>
split_holdout(std::span<const LabeledSample> samples, double fraction, std::uint64_t seed);

/// Deterministic subset of at most n samples, in original order.
std::vector<LabeledSample> subsample(std::span<const LabeledSample> samples, std::size_t n, std::uint64_t seed);

} // namespace hullgan
