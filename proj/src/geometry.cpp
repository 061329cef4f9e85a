#include "hullgan/geometry.hpp"

#include "hullgan/errors.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace hullgan {

namespace {

constexpr double kDenominatorFloor = 1e-12;
constexpr double kEtaSlack = 1e-9;

void require_denominator(double value, const char* what)
{
    if (!(std::abs(value) >= kDenominatorFloor))
        throw DegenerateParams(std::string("degenerate Wigley parameters: ") + what
                               + " = " + detail::format_double(value));
}

void check_grid_shape(const HullGrid& hull)
{
    if (hull.y.rows() != hull.grid.nx() || hull.y.cols() != hull.grid.nz())
        throw ShapeError("offset table is " + std::to_string(hull.y.rows()) + "x"
                         + std::to_string(hull.y.cols()) + ", grid expects "
                         + std::to_string(hull.grid.nx()) + "x" + std::to_string(hull.grid.nz()));
}

} // namespace

GridSpec GridSpec::standard()
{
    GridSpec g;
    g.x_stations.resize(kStations);
    g.x_stations << 0.0, 0.2, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85,
        0.9, 0.925, 0.9375, 0.95, 0.9625, 0.975, 0.9875, 1.0;
    g.z_stations.resize(kDepths);
    for (Index j = 0; j < kDepths; ++j)
        g.z_stations[j] = static_cast<double>(j) / static_cast<double>(kDepths - 1);
    return g;
}

WigleyExponents compute_exponents(const WigleyParams& p)
{
    WigleyExponents e;
    require_denominator(p.Cm, "Cm");
    e.Cp = p.Cb / p.Cm;
    require_denominator(e.Cp, "Cp");
    require_denominator(1.0 - p.Cw, "1 - Cw");
    require_denominator(1.0 - e.Cp, "1 - Cp");
    require_denominator(1.0 - p.Cm, "1 - Cm");

    e.X1 = p.Cw / (1.0 - p.Cw);
    e.X2 = std::max(2.0, e.Cp / (1.0 - e.Cp));
    e.X3 = 1.0 / (e.Cp * e.Cp);

    // Beta-type integral of the second term, through log-gamma.
    const double a = 1.0 / e.X2 + 1.0;
    const double b = e.X3 + 1.0;
    e.S = std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b - 1.0));

    const double den = p.Cw - p.Cb - e.S * (1.0 - p.Cm);
    require_denominator(den, "Cw - Cb - S(1 - Cm)");
    e.Z1 = (p.Cb - e.S * p.Cm) / den;
    e.Z2 = p.Cm / (1.0 - p.Cm) * (p.Cw - e.Cp) / den;
    return e;
}

bool validate_params(const WigleyParams& p, const GridSpec& grid)
{
    const auto finite_positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!finite_positive(p.L) || !finite_positive(p.B) || !finite_positive(p.d))
        return false;
    if (!(0.0 < p.Cb && p.Cb < p.Cm && p.Cm < 1.0))
        return false;
    if (!(0.0 < p.Cw && p.Cw < 1.0))
        return false;

    WigleyExponents e;
    try {
        e = compute_exponents(p);
    } catch (const DegenerateParams&) {
        return false;
    }
    if (!(e.Cp < 1.0) || !(e.X1 > 0.0) || !(e.X3 > 0.0) || !(e.Z1 > 0.0) || !(e.Z2 > 0.0))
        return false;
    if (!(p.Cw - p.Cb - e.S * (1.0 - p.Cm) > 0.0))
        return false;

    for (Index i = 0; i < grid.nx(); ++i)
        for (Index j = 0; j < grid.nz(); ++j) {
            const double v = eta(e, grid.x_stations[i], grid.z_stations[j]);
            if (!std::isfinite(v) || v < 0.0 || v > 1.0 + kEtaSlack)
                return false;
        }
    return true;
}

HullGrid sample_hull(const WigleyParams& p, const GridSpec& grid)
{
    const WigleyExponents e = compute_exponents(p);
    HullGrid hull{grid, Eigen::MatrixXd(grid.nx(), grid.nz()), p.L, p.B, p.d};
    const double half_beam = 0.5 * p.B;
    for (Index i = 0; i < grid.nx(); ++i)
        for (Index j = 0; j < grid.nz(); ++j)
            hull.y(i, j) = half_beam * eta(e, grid.x_stations[i], grid.z_stations[j]);
    return hull;
}

HullPointCloud to_point_cloud(const HullGrid& hull)
{
    check_grid_shape(hull);
    const Index nx = hull.grid.nx();
    const Index nz = hull.grid.nz();
    HullPointCloud cloud{Eigen::VectorXd(2 * nx * nz), hull.L};
    for (Index i = 0; i < nx; ++i)
        for (Index j = 0; j < nz; ++j) {
            const Index k = i * nz + j;
            cloud.coords[2 * k] = hull.y(i, j);
            cloud.coords[2 * k + 1] = -(hull.d_nominal * hull.grid.z_stations[j]);
        }
    return cloud;
}

HullPointCloud point_cloud_from_vector(std::span<const double> flat, double L, const GridSpec& grid)
{
    const auto expected = static_cast<std::size_t>(2 * grid.nx() * grid.nz());
    if (flat.size() != expected)
        throw ShapeError("hull vector has " + std::to_string(flat.size()) + " entries, expected "
                         + std::to_string(expected));
    HullPointCloud cloud{Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Index>(flat.size())), L};
    return cloud;
}

HullGrid from_point_cloud(const HullPointCloud& cloud, const GridSpec& grid)
{
    const Index nx = grid.nx();
    const Index nz = grid.nz();
    if (cloud.coords.size() != 2 * nx * nz)
        throw ShapeError("hull vector has " + std::to_string(cloud.coords.size()) + " entries, expected "
                         + std::to_string(2 * nx * nz));

    double min_z = cloud.z(0);
    for (Index k = 1; k < cloud.size(); ++k)
        min_z = std::min(min_z, cloud.z(k));

    HullGrid hull{grid, Eigen::MatrixXd(nx, nz), cloud.L, 0.0, -min_z};
    std::vector<Index> order(static_cast<std::size_t>(nz));
    double max_y = 0.0;
    for (Index i = 0; i < nx; ++i) {
        std::iota(order.begin(), order.end(), Index{0});
        // Shallowest point first: rank 0 lands on the waterline station.
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return cloud.z(i * nz + a) > cloud.z(i * nz + b);
        });
        for (Index r = 0; r < nz; ++r) {
            hull.y(i, r) = cloud.y(i * nz + order[static_cast<std::size_t>(r)]);
            max_y = std::max(max_y, hull.y(i, r));
        }
    }
    hull.B_nominal = 2.0 * max_y;
    return hull;
}

Dimensions measured_dimensions(const HullPointCloud& cloud)
{
    if (cloud.size() == 0)
        throw DegenerateHull("empty point cloud");
    double max_y = cloud.y(0);
    double min_z = cloud.z(0);
    for (Index k = 1; k < cloud.size(); ++k) {
        max_y = std::max(max_y, cloud.y(k));
        min_z = std::min(min_z, cloud.z(k));
    }
    const Dimensions dims{2.0 * max_y, -min_z};
    if (!(dims.beam > 0.0) || !(dims.draft > 0.0) || !std::isfinite(dims.beam) || !std::isfinite(dims.draft))
        throw DegenerateHull("degenerate hull: beam " + detail::format_double(dims.beam) + " m, draft "
                             + detail::format_double(dims.draft) + " m");
    return dims;
}

Dimensions measured_dimensions(const HullGrid& hull)
{
    check_grid_shape(hull);
    if (hull.y.size() == 0)
        throw DegenerateHull("empty offset table");
    const Dimensions dims{2.0 * hull.y.maxCoeff(), hull.d_nominal};
    if (!(dims.beam > 0.0) || !(dims.draft > 0.0) || !std::isfinite(dims.beam) || !std::isfinite(dims.draft))
        throw DegenerateHull("degenerate hull: beam " + detail::format_double(dims.beam) + " m, draft "
                             + detail::format_double(dims.draft) + " m");
    return dims;
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& nodes)
{
    Eigen::VectorXd w = Eigen::VectorXd::Zero(nodes.size());
    for (Index k = 0; k + 1 < nodes.size(); ++k) {
        const double h = 0.5 * (nodes[k + 1] - nodes[k]);
        w[k] += h;
        w[k + 1] += h;
    }
    return w;
}

double displacement_volume(const HullGrid& hull)
{
    const Dimensions dims = measured_dimensions(hull);
    if (!(hull.L > 0.0))
        throw DegenerateHull("nonpositive hull length");
    const Eigen::VectorXd wx = trapezoid_weights(hull.grid.x_stations);
    const Eigen::VectorXd wz = trapezoid_weights(hull.grid.z_stations);
    // 2 sides x 2 halves; x spans L/2, z spans the draft.
    return 2.0 * hull.L * dims.draft * wx.dot(hull.y * wz);
}

FormCoefficients coefficients_from_grid(const HullGrid& hull)
{
    const Dimensions dims = measured_dimensions(hull);
    const double half_beam = 0.5 * dims.beam;
    const Eigen::VectorXd wx = trapezoid_weights(hull.grid.x_stations);
    const Eigen::VectorXd wz = trapezoid_weights(hull.grid.z_stations);

    // Midship is the x = 0 station; the waterline is the z = 0 station.
    const Index midship = 0;
    const Index waterline = 0;
    FormCoefficients c;
    c.Cw = wx.dot(hull.y.col(waterline)) / half_beam;
    c.Cm = wz.dot(hull.y.row(midship).transpose()) / half_beam;
    c.Cb = displacement_volume(hull) / (hull.L * dims.beam * dims.draft);
    return c;
}

void write_hull_csv(const std::filesystem::path& path, std::span<const HullGrid> hulls)
{
    auto out = detail::open_output(path);
    out << "L,B,d";
    const Index n = hulls.empty() ? kPoints : hulls.front().y.size();
    for (Index k = 0; k < n; ++k)
        out << ',' << detail::indexed_name("y_", static_cast<std::size_t>(k + 1), 3);
    out << '\n';
    for (const HullGrid& h : hulls) {
        check_grid_shape(h);
        if (h.y.size() != n)
            throw ShapeError("hulls in one offset file must share a grid");
        out << detail::format_double(h.L) << ',' << detail::format_double(h.B_nominal) << ','
            << detail::format_double(h.d_nominal);
        for (Index i = 0; i < h.y.rows(); ++i)
            for (Index j = 0; j < h.y.cols(); ++j)
                out << ',' << detail::format_double(h.y(i, j));
        out << '\n';
    }
    if (!out)
        throw IOError("write failed: " + path.string());
}

std::vector<HullGrid> read_hull_csv(const std::filesystem::path& path, const GridSpec& grid)
{
    auto in = detail::open_input(path);
    const auto n_cols = static_cast<std::size_t>(3 + grid.nx() * grid.nz());
    std::string line;
    if (!std::getline(in, line))
        throw FormatError(path.string() + ": empty file, expected header");
    const auto header = detail::split(detail::trim(line));
    if (header.size() != n_cols || header[0] != "L" || header[1] != "B" || header[2] != "d")
        throw FormatError(path.string() + ": malformed header (expected L,B,d,y_001..y_"
                          + std::to_string(grid.nx() * grid.nz()) + ")");

    std::vector<HullGrid> hulls;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty())
            continue;
        const auto cells = detail::split(detail::trim(line));
        if (cells.size() != n_cols)
            throw FormatError(path.string() + ": row " + std::to_string(row) + " has "
                              + std::to_string(cells.size()) + " columns, expected " + std::to_string(n_cols));
        HullGrid h{grid, Eigen::MatrixXd(grid.nx(), grid.nz()), 0.0, 0.0, 0.0};
        h.L = detail::parse_double(cells[0], detail::cell_location(path, row, 0));
        h.B_nominal = detail::parse_double(cells[1], detail::cell_location(path, row, 1));
        h.d_nominal = detail::parse_double(cells[2], detail::cell_location(path, row, 2));
        for (Index i = 0; i < grid.nx(); ++i)
            for (Index j = 0; j < grid.nz(); ++j) {
                const auto c = static_cast<std::size_t>(3 + i * grid.nz() + j);
                h.y(i, j) = detail::parse_double(cells[c], detail::cell_location(path, row, c));
            }
        hulls.push_back(std::move(h));
    }
    return hulls;
}

} // namespace hullgan
