#include "hullgan/hydro.hpp"

#include "hullgan/errors.hpp"

#include <complex>
#include <string>

namespace hullgan {

namespace {

using Complex = std::complex<double>;

constexpr double kSeriesThreshold = 1.0;
constexpr int kSeriesTerms = 24;

// Integrals over v in [0, 1] of exp(-t v) and v exp(-t v), for t >= 0.
void exp_moments(double t, double& m0, double& m1)
{
    if (t < kSeriesThreshold) {
        double term = 1.0;
        m0 = 0.0;
        m1 = 0.0;
        for (int k = 0; k < kSeriesTerms; ++k) {
            m0 += term / (k + 1);
            m1 += term / (k + 2);
            term *= -t / (k + 1);
        }
        return;
    }
    const double e = std::exp(-t);
    m0 = -std::expm1(-t) / t;
    m1 = (1.0 - e * (1.0 + t)) / (t * t);
}

// Integrals over u in [0, 1] of exp(i a u) and u exp(i a u).
void trig_moments(double a, Complex& m0, Complex& m1)
{
    if (std::abs(a) < kSeriesThreshold) {
        Complex term = 1.0;
        m0 = 0.0;
        m1 = 0.0;
        const Complex ia(0.0, a);
        for (int k = 0; k < kSeriesTerms; ++k) {
            m0 += term / double(k + 1);
            m1 += term / double(k + 2);
            term *= ia / double(k + 1);
        }
        return;
    }
    const Complex e = std::polar(1.0, a);
    const Complex ia(0.0, a);
    m0 = (e - 1.0) / ia;
    m1 = e / ia - (e - 1.0) / (ia * ia);
}

// Slope dy/dx of the full (mirrored) centerplane on nondimensional stations.
// Rows run along x from -1/2 to 1/2, columns along z from 0 down to -d/L.
struct Centerplane {
    Eigen::VectorXd x;
    Eigen::VectorXd z;
    Eigen::MatrixXd slope;
};

Centerplane make_centerplane(const HullGrid& hull)
{
    const Index nx = hull.grid.nx();
    const Index nz = hull.grid.nz();
    if (hull.y.rows() != nx || hull.y.cols() != nz)
        throw ShapeError("offset table does not match its grid");
    if (nx < 2 || hull.grid.x_stations[0] != 0.0)
        throw DegenerateHull("x stations must start at midship (0)");
    if (!(hull.L > 0.0) || !(hull.d_nominal > 0.0))
        throw DegenerateHull("hull needs positive length and draft");
    if (!hull.y.allFinite())
        throw DegenerateHull("non-finite offsets");

    const Index n = 2 * nx - 1;
    Centerplane c{Eigen::VectorXd(n), Eigen::VectorXd(nz), Eigen::MatrixXd(n, nz)};
    Eigen::MatrixXd f(n, nz);
    for (Index i = 0; i < nx; ++i) {
        const double xi = 0.5 * hull.grid.x_stations[i];
        c.x[nx - 1 + i] = xi;
        c.x[nx - 1 - i] = -xi;
        f.row(nx - 1 + i) = hull.y.row(i) / hull.L;
        f.row(nx - 1 - i) = hull.y.row(i) / hull.L;
    }
    const double draft = hull.d_nominal / hull.L;
    for (Index j = 0; j < nz; ++j)
        c.z[j] = -(draft * hull.grid.z_stations[j]);

    // Three-point differences on the nonuniform stations, one-sided at the
    // ends, written on differences so a constant row has exactly zero slope.
    for (Index i = 1; i + 1 < n; ++i) {
        const double h1 = c.x[i] - c.x[i - 1];
        const double h2 = c.x[i + 1] - c.x[i];
        c.slope.row(i) = (h2 / (h1 * (h1 + h2))) * (f.row(i) - f.row(i - 1))
            + (h1 / (h2 * (h1 + h2))) * (f.row(i + 1) - f.row(i));
    }
    {
        const double h1 = c.x[1] - c.x[0];
        const double h2 = c.x[2] - c.x[1];
        c.slope.row(0) = ((h1 + h2) / (h1 * h2)) * (f.row(1) - f.row(0))
            - (h1 / (h2 * (h1 + h2))) * (f.row(2) - f.row(0));
    }
    {
        const double h1 = c.x[n - 1] - c.x[n - 2];
        const double h2 = c.x[n - 2] - c.x[n - 3];
        c.slope.row(n - 1) = ((h1 + h2) / (h1 * h2)) * (f.row(n - 1) - f.row(n - 2))
            - (h1 / (h2 * (h1 + h2))) * (f.row(n - 1) - f.row(n - 3));
    }
    return c;
}

// The slope is integrated as its piecewise-linear interpolant. Against
// exp(k z) in depth and exp(i k x) along the length both integrals are exact,
// which keeps the amplitudes decaying as theta approaches pi/2.
class AmplitudeEvaluator {
public:
    AmplitudeEvaluator(const HullGrid& hull, double U, const HydroEnv& env)
        : plane_(make_centerplane(hull)),
          k0_(env.g * hull.L / (U * U)),
          depth_weights_(plane_.z.size()),
          depth_profile_(plane_.x.size())
    {
        if (!(U > 0.0) || !std::isfinite(k0_))
            throw DegenerateHull("speed must be positive");
    }

    Amplitudes operator()(double theta)
    {
        const double sec = 1.0 / std::cos(theta);
        const double kz = k0_ * sec * sec;
        const double kx = k0_ * sec;

        const Eigen::VectorXd& z = plane_.z;
        depth_weights_.setZero();
        for (Index j = 0; j + 1 < z.size(); ++j) {
            const double h = z[j] - z[j + 1];
            double m0 = 0.0, m1 = 0.0;
            exp_moments(kz * h, m0, m1);
            const double top = std::exp(kz * z[j]) * h;
            depth_weights_[j] += top * (m0 - m1);
            depth_weights_[j + 1] += top * m1;
        }
        depth_profile_.noalias() = plane_.slope * depth_weights_;

        const Eigen::VectorXd& x = plane_.x;
        Complex sum = 0.0;
        double magnitude = 0.0;
        const auto accumulate = [&](Index i, Complex w) {
            const Complex term = depth_profile_[i] * w;
            sum += term;
            magnitude += std::abs(term);
        };
        for (Index i = 0; i + 1 < x.size(); ++i) {
            const double h = x[i + 1] - x[i];
            Complex m0, m1;
            trig_moments(kx * h, m0, m1);
            const Complex left = std::polar(h, kx * x[i]);
            accumulate(i, left * (m0 - m1));
            accumulate(i + 1, left * m1);
        }
        return {sum.imag(), sum.real(), magnitude};
    }

    double k0() const { return k0_; }

private:
    Centerplane plane_;
    double k0_;
    Eigen::VectorXd depth_weights_;
    Eigen::VectorXd depth_profile_;
};

double simpson_wave_integral(AmplitudeEvaluator& amp, int panels, double theta_max)
{
    const double h = theta_max / panels;
    double sum = 0.0;
    for (int k = 0; k <= panels; ++k) {
        const double theta = h * k;
        const Amplitudes a = amp(theta);
        const double sec = 1.0 / std::cos(theta);
        const double value = (a.P * a.P + a.Q * a.Q) * sec * sec * sec;
        const double weight = (k == 0 || k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        sum += weight * value;
    }
    return sum * h / 3.0;
}

} // namespace

QuadratureSpec QuadratureSpec::refined() const
{
    QuadratureSpec r = *this;
    r.n_theta = n_theta * refinement_factor;
    r.check_convergence = false;
    return r;
}

void QuadratureSpec::validate() const
{
    if (n_theta < 16 || n_theta % 2 != 0)
        throw Error("n_theta must be an even number >= 16, got " + std::to_string(n_theta));
    if (!(theta_max > 0.0 && theta_max < std::numbers::pi / 2))
        throw Error("theta_max must lie in (0, pi/2)");
    if (refinement_factor < 2)
        throw Error("refinement_factor must be >= 2");
}

double froude(double U, double L, const HydroEnv& env)
{
    return U / std::sqrt(env.g * L);
}

double reynolds(double U, double L, const HydroEnv& env)
{
    return U * L / env.nu;
}

double prohaska_k(double B, double d, double Cb, double L)
{
    const double bd = B / d;
    const double cbl = Cb * B / L;
    return 0.11 + 0.128 * bd - 0.0157 * bd * bd - 3.1 * cbl + 28.8 * cbl * cbl;
}

double friction_cdf(double Rn)
{
    return 1.328 / std::sqrt(Rn);
}

Amplitudes amplitude_pq(const HullGrid& hull, double U, const HydroEnv& env, double theta)
{
    AmplitudeEvaluator amp(hull, U, env);
    return amp(theta);
}

Amplitudes amplitude_pq(const HullPointCloud& cloud, double U, const HydroEnv& env, double theta)
{
    return amplitude_pq(from_point_cloud(cloud), U, env, theta);
}

double wave_cdw(const HullGrid& hull, double U, const HydroEnv& env, const QuadratureSpec& q)
{
    q.validate();
    AmplitudeEvaluator amp(hull, U, env);
    const double fn = froude(U, hull.L, env);
    const double scale = 8.0 / (std::numbers::pi * fn * fn * fn * fn);
    const double cdw = scale * simpson_wave_integral(amp, q.n_theta, q.theta_max);
    if (q.check_convergence) {
        const double doubled = scale * simpson_wave_integral(amp, 2 * q.n_theta, q.theta_max);
        const double change = std::abs(doubled - cdw);
        if (change > q.convergence_rtol * std::abs(doubled))
            throw QuadratureNonConverged("wave drag changed by " + std::to_string(change / std::abs(doubled))
                                         + " (relative) when doubling n_theta from "
                                         + std::to_string(q.n_theta));
    }
    return cdw;
}

DragBreakdown total_cd(const HullGrid& hull, double U, const HydroEnv& env, const QuadratureSpec& q)
{
    const Dimensions dims = measured_dimensions(hull);
    const FormCoefficients coeffs = coefficients_from_grid(hull);
    DragBreakdown r;
    r.K = prohaska_k(dims.beam, dims.draft, coeffs.Cb, hull.L);
    r.Fn = froude(U, hull.L, env);
    r.Rn = reynolds(U, hull.L, env);
    r.Cdf = friction_cdf(r.Rn);
    r.Cdw = wave_cdw(hull, U, env, q);
    r.Cd = (1.0 + r.K) * r.Cdf + r.Cdw;
    return r;
}

double displacement_tonnage(const HullGrid& hull, const HydroEnv& env)
{
    return env.rho * displacement_volume(hull) / 1000.0;
}

Label label_hull(const HullGrid& hull, double U, const HydroEnv& env, const QuadratureSpec& q)
{
    return {total_cd(hull, U, env, q).Cd, displacement_tonnage(hull, env), U};
}

Label label_hull(const HullPointCloud& cloud, double U, const HydroEnv& env, const QuadratureSpec& q)
{
    return label_hull(from_point_cloud(cloud), U, env, q);
}

} // namespace hullgan
