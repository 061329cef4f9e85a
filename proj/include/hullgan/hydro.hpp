#pragma once

#include "hullgan/geometry.hpp"

#include <numbers>

namespace hullgan {

/// 1 knot in m/s.
inline constexpr double kKnot = 0.514444;

inline double knots_to_ms(double knots) { return knots * kKnot; }

struct HydroEnv {
    double g = 9.80665;   // [m/s^2]
    double rho = 1025.0;  // [kg/m^3]
    double nu = 1.19e-6;  // [m^2/s], seawater at 15 C
};

/// Components of the total drag coefficient. Cd == (1 + K) * Cdf + Cdw exactly.
struct DragBreakdown {
    double K = 0.0;
    double Cdf = 0.0;
    double Cdw = 0.0;
    double Cd = 0.0;
    double Fn = 0.0;
    double Rn = 0.0;
};

/// Composite Simpson rule over the wave angle. n_theta must be even and >= 16.
struct QuadratureSpec {
    int n_theta = 1024;
    double theta_max = std::numbers::pi / 2 - 1e-3;
    int refinement_factor = 8;
    bool check_convergence = false;
    double convergence_rtol = 1e-4;

    /// The same rule with n_theta multiplied by refinement_factor.
    QuadratureSpec refined() const;
    void validate() const;

    bool operator==(const QuadratureSpec&) const = default;
};

/// Performance label of one hull at one speed. U is in m/s, W in tonnes.
struct Label {
    double Cd = 0.0;
    double W = 0.0;
    double U = 0.0;

    bool operator==(const Label&) const = default;
};

struct Amplitudes {
    double P = 0.0;
    double Q = 0.0;
    /// Sum of the absolute contributions; |Q| / magnitude is the normalized residual.
    double magnitude = 0.0;
};

double froude(double U, double L, const HydroEnv& env = {});
double reynolds(double U, double L, const HydroEnv& env = {});

/// Prohaska's form factor regression.
double prohaska_k(double B, double d, double Cb, double L);

/// Blasius flat-plate line.
double friction_cdf(double Rn);

/// Michell amplitude functions at wave angle theta, over the full centerplane
/// with every length made dimensionless by L.
Amplitudes amplitude_pq(const HullGrid& hull, double U, const HydroEnv& env, double theta);
Amplitudes amplitude_pq(const HullPointCloud& cloud, double U, const HydroEnv& env, double theta);

double wave_cdw(const HullGrid& hull, double U, const HydroEnv& env = {}, const QuadratureSpec& q = {});

DragBreakdown total_cd(const HullGrid& hull, double U, const HydroEnv& env = {}, const QuadratureSpec& q = {});

/// Displacement in tonnes.
double displacement_tonnage(const HullGrid& hull, const HydroEnv& env = {});

Label label_hull(const HullGrid& hull, double U, const HydroEnv& env = {}, const QuadratureSpec& q = {});
Label label_hull(const HullPointCloud& cloud, double U, const HydroEnv& env = {}, const QuadratureSpec& q = {});

} // namespace hullgan
