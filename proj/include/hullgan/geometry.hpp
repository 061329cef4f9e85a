#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <span>
#include <vector>

namespace hullgan {

using Eigen::Index;

/// Number of longitudinal stations, depth stations, and the flat vector size
/// exchanged with the networks.
inline constexpr Index kStations = 20;
inline constexpr Index kDepths = 40;
inline constexpr Index kPoints = kStations * kDepths;
inline constexpr Index kVectorSize = 2 * kPoints;

/// Principal dimensions [m] and coefficients of fineness of one hull.
struct WigleyParams {
    double L = 0.0;
    double B = 0.0;
    double d = 0.0;
    double Cb = 0.0;
    double Cm = 0.0;
    double Cw = 0.0;

    bool operator==(const WigleyParams&) const = default;
};

/// Exponents of the generalized Wigley surface, derived from the fineness
/// coefficients by compute_exponents().
struct WigleyExponents {
    double Cp = 0.0;
    double X1 = 0.0;
    double X2 = 0.0;
    double X3 = 0.0;
    double Z1 = 0.0;
    double Z2 = 0.0;
    double S = 0.0;
};

/// Normalized sampling stations. x runs from midship (0) to the ends (1) over
/// half the length; z runs from the waterline (0) to the keel (1).
struct GridSpec {
    Eigen::VectorXd x_stations;
    Eigen::VectorXd z_stations;

    /// The fixed 20-station longitudinal list and 40 uniform depth stations.
    static GridSpec standard();

    Index nx() const { return x_stations.size(); }
    Index nz() const { return z_stations.size(); }

    bool operator==(const GridSpec& other) const
    {
        return x_stations.size() == other.x_stations.size()
            && z_stations.size() == other.z_stations.size()
            && x_stations == other.x_stations && z_stations == other.z_stations;
    }
};

/// Half-breadth offsets on a GridSpec. y(i, j) is the half-breadth [m] at
/// station x_i and depth z_j.
struct HullGrid {
    GridSpec grid;
    Eigen::MatrixXd y;
    double L = 0.0;
    double B_nominal = 0.0;
    double d_nominal = 0.0;
};

/// Flat (y, z) representation consumed and emitted by the networks. Point
/// (i, j) occupies coords[2 * (i * nz + j)] (y) and the following slot (z),
/// with z measured downward-negative from the waterline.
struct HullPointCloud {
    Eigen::VectorXd coords;
    double L = 0.0;

    Index size() const { return coords.size() / 2; }
    double y(Index point) const { return coords[2 * point]; }
    double z(Index point) const { return coords[2 * point + 1]; }
};

struct Dimensions {
    double beam = 0.0;
    double draft = 0.0;
};

struct FormCoefficients {
    double Cb = 0.0;
    double Cm = 0.0;
    double Cw = 0.0;
};

WigleyExponents compute_exponents(const WigleyParams& p);

/// True iff the parameters describe a closed, nonnegative hull on the grid.
bool validate_params(const WigleyParams& p, const GridSpec& grid = GridSpec::standard());

/// Normalized half-breadth of the generalized Wigley surface.
template <class Scalar>
Scalar eta(const WigleyExponents& e, Scalar xi, Scalar zeta)
{
    using std::pow;
    const Scalar zz1 = pow(zeta, Scalar(e.Z1));
    return (Scalar(1) - zz1) * (Scalar(1) - pow(xi, Scalar(e.X1)))
        + zz1 * (Scalar(1) - pow(zeta, Scalar(e.Z2)))
        * pow(Scalar(1) - pow(xi, Scalar(e.X2)), Scalar(e.X3));
}

HullGrid sample_hull(const WigleyParams& p, const GridSpec& grid = GridSpec::standard());

HullPointCloud to_point_cloud(const HullGrid& hull);

/// Rebuilds offsets from a point cloud. The draft is -min z; within each
/// station the points are ranked by depth and placed on the grid's z stations.
HullGrid from_point_cloud(const HullPointCloud& cloud, const GridSpec& grid = GridSpec::standard());

/// Wraps a flat network vector; throws ShapeError unless it has 2 * grid points entries.
HullPointCloud point_cloud_from_vector(std::span<const double> flat, double L,
                                       const GridSpec& grid = GridSpec::standard());

Dimensions measured_dimensions(const HullPointCloud& cloud);
Dimensions measured_dimensions(const HullGrid& hull);

FormCoefficients coefficients_from_grid(const HullGrid& hull);

/// Displaced volume [m^3] of the full hull (both sides, fore and aft halves).
double displacement_volume(const HullGrid& hull);

/// Trapezoid weights for arbitrary increasing nodes.
Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& nodes);

/// Hull offset CSV: header L,B,d,y_001..y_800 then one row per hull.
void write_hull_csv(const std::filesystem::path& path, std::span<const HullGrid> hulls);
std::vector<HullGrid> read_hull_csv(const std::filesystem::path& path,
                                    const GridSpec& grid = GridSpec::standard());

} // namespace hullgan
