#pragma once

#include "hullgan/dataset.hpp"
#include "hullgan/geometry.hpp"
#include "hullgan/hydro.hpp"
#include "hullgan/wgan.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace hullgan {

/// (1/n) sum |recomputed_i - requested_i| / |requested_i|.
/// Throws LengthMismatch for unequal or empty inputs and DivisionByZero for a zero request.
double mape(std::span<const double> requested, std::span<const double> recomputed);

/// Mean of the two label errors.
inline double report_total(double mape_cd, double mape_w) { return (mape_cd + mape_w) / 2.0; }

struct ClassReport {
    SpeedClass speed_class = SpeedClass::High;
    double mape_cd = 0.0;
    double mape_w = 0.0;
    double total = 0.0;
    std::size_t samples = 0;  // hulls that entered the MAPE
    std::size_t rejected = 0; // degenerate hulls
};

struct EvalReport {
    /// Classes that received at least one request, in High, Medium, Low order.
    std::vector<ClassReport> classes;
    std::size_t samples = 0;
    std::size_t rejected = 0;

    const ClassReport* find(SpeedClass c) const;
};

/// Requested vs recomputed values of accepted hulls, in generation order.
struct ScatterData {
    std::vector<double> cd_requested;
    std::vector<double> cd_recomputed;
    std::vector<double> w_requested;
    std::vector<double> w_recomputed;

    bool operator==(const ScatterData&) const = default;
};

/// Produces n_per_request clouds per request, request-major.
using CloudSource = std::function<std::vector<HullPointCloud>(std::span<const Label> requests, int n_per_request)>;

/// Labels every produced cloud at its request's speed and compares. Requests
/// are grouped into speed classes by U. Throws EmptyEvaluation when every hull
/// is rejected.
std::pair<EvalReport, ScatterData> evaluate_hulls(std::span<const Label> requests, int n_per_request,
                                                  const CloudSource& source, const HydroEnv& env = {},
                                                  const QuadratureSpec& q = {});

std::pair<EvalReport, ScatterData> evaluate_model(const Checkpoint& ckpt, std::span<const Label> requests,
                                                  int n_per_request, const HydroEnv& env = {},
                                                  const QuadratureSpec& q = {}, std::uint64_t seed = 0);

/// Evaluation requests: the labels of the held-out samples, with U pinned to
/// each sample's class design speed.
std::vector<Label> requests_from_samples(std::span<const LabeledSample> held_out);

/// Body plan: each transverse section drawn as one polyline mirrored about the centerline.
void emit_lineplan_svg(const HullGrid& hull, const std::filesystem::path& path);
void emit_lineplan_svg(const HullPointCloud& cloud, const std::filesystem::path& path,
                       const GridSpec& grid = GridSpec::standard());

/// Writes <prefix>_cd.csv (requested_cd,recomputed_cd) and <prefix>_w.csv
/// (requested_w,recomputed_w) with shortest round-trip decimals.
void emit_scatter_csv(const ScatterData& sd, const std::filesystem::path& prefix);
ScatterData read_scatter_csv(const std::filesystem::path& prefix);

/// Paths used by emit_scatter_csv.
std::filesystem::path scatter_path(const std::filesystem::path& prefix, std::string_view kind);

/// Human-readable table, one line per class plus the totals.
void print_report(std::ostream& os, const EvalReport& report);

} // namespace hullgan
