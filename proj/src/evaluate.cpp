#include "hullgan/evaluate.hpp"

#include "hullgan/errors.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace hullgan {

double mape(std::span<const double> requested, std::span<const double> recomputed)
{
    if (requested.size() != recomputed.size())
        throw LengthMismatch("MAPE inputs have " + std::to_string(requested.size()) + " and "
                             + std::to_string(recomputed.size()) + " entries");
    if (requested.empty())
        throw LengthMismatch("MAPE of empty inputs");
    double sum = 0.0;
    for (std::size_t i = 0; i < requested.size(); ++i) {
        if (requested[i] == 0.0)
            throw DivisionByZero("requested value " + std::to_string(i) + " is zero");
        sum += std::abs(recomputed[i] - requested[i]) / std::abs(requested[i]);
    }
    return sum / double(requested.size());
}

const ClassReport* EvalReport::find(SpeedClass c) const
{
    for (const auto& r : classes)
        if (r.speed_class == c)
            return &r;
    return nullptr;
}

std::pair<EvalReport, ScatterData> evaluate_hulls(std::span<const Label> requests, int n_per_request,
                                                  const CloudSource& source, const HydroEnv& env,
                                                  const QuadratureSpec& q)
{
    if (requests.empty() || n_per_request < 1)
        throw EmptyEvaluation("no evaluation requests");
    const auto clouds = source(requests, n_per_request);
    if (clouds.size() != requests.size() * static_cast<std::size_t>(n_per_request))
        throw LengthMismatch("hull source returned " + std::to_string(clouds.size()) + " hulls for "
                             + std::to_string(requests.size() * static_cast<std::size_t>(n_per_request)));

    struct Bucket {
        std::vector<double> cd_req, cd_got, w_req, w_got;
        std::size_t rejected = 0;
        bool used = false;
    };
    std::array<Bucket, 3> buckets;
    ScatterData sd;
    EvalReport report;

    for (std::size_t k = 0; k < clouds.size(); ++k) {
        const Label& req = requests[k / static_cast<std::size_t>(n_per_request)];
        Bucket& b = buckets[static_cast<std::size_t>(classify_speed(req.U))];
        b.used = true;
        Label got;
        try {
            got = label_hull(clouds[k], req.U, env, q);
        } catch (const DegenerateHull&) {
            ++b.rejected;
            ++report.rejected;
            continue;
        }
        if (!std::isfinite(got.Cd) || !std::isfinite(got.W)) {
            ++b.rejected;
            ++report.rejected;
            continue;
        }
        b.cd_req.push_back(req.Cd);
        b.cd_got.push_back(got.Cd);
        b.w_req.push_back(req.W);
        b.w_got.push_back(got.W);
        sd.cd_requested.push_back(req.Cd);
        sd.cd_recomputed.push_back(got.Cd);
        sd.w_requested.push_back(req.W);
        sd.w_recomputed.push_back(got.W);
    }
    if (sd.cd_requested.empty())
        throw EmptyEvaluation("all " + std::to_string(clouds.size()) + " generated hulls were degenerate");

    for (SpeedClass c : kSpeedClasses) {
        const Bucket& b = buckets[static_cast<std::size_t>(c)];
        if (!b.used)
            continue;
        ClassReport r;
        r.speed_class = c;
        r.samples = b.cd_req.size();
        r.rejected = b.rejected;
        if (r.samples > 0) {
            r.mape_cd = mape(b.cd_req, b.cd_got);
            r.mape_w = mape(b.w_req, b.w_got);
        } else {
            r.mape_cd = r.mape_w = std::numeric_limits<double>::quiet_NaN();
        }
        r.total = report_total(r.mape_cd, r.mape_w);
        report.samples += r.samples;
        report.classes.push_back(r);
    }
    return {report, sd};
}

std::pair<EvalReport, ScatterData> evaluate_model(const Checkpoint& ckpt, std::span<const Label> requests,
                                                  int n_per_request, const HydroEnv& env, const QuadratureSpec& q,
                                                  std::uint64_t seed)
{
    const CloudSource source = [&](std::span<const Label> r, int n) { return generate(ckpt, r, n, seed); };
    return evaluate_hulls(requests, n_per_request, source, env, q);
}

std::vector<Label> requests_from_samples(std::span<const LabeledSample> held_out)
{
    std::vector<Label> out;
    out.reserve(held_out.size());
    for (const auto& s : held_out)
        out.push_back({s.label.Cd, s.label.W, knots_to_ms(design_speed_knots(s.speed_class))});
    return out;
}

namespace {

std::string fixed3(double v)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    // Avoid "-0.000".
    if (std::string_view(buf) == "-0.000")
        return "0.000";
    return buf;
}

} // namespace

void emit_lineplan_svg(const HullGrid& hull, const std::filesystem::path& path)
{
    const Index nx = hull.y.rows();
    const Index nz = hull.y.cols();
    if (nx == 0 || nz == 0 || !hull.y.allFinite())
        throw DegenerateHull("cannot draw an empty or non-finite hull");
    const double half_b = std::max(hull.y.maxCoeff(), 1e-12);
    const double depth = std::max(hull.d_nominal, 1e-12);

    const double width = 800.0, height = 500.0, margin = 60.0;
    const double scale = std::min((width - 2 * margin) / (2 * half_b), (height - 2 * margin) / depth);
    const double cx = width / 2.0;
    const double top = margin;
    const auto px = [&](double y) { return fixed3(cx + scale * y); };
    const auto pz = [&](double z) { return fixed3(top + scale * z); };

    auto out = detail::open_output(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed3(width) << "\" height=\"" << fixed3(height)
        << "\" viewBox=\"0 0 " << fixed3(width) << ' ' << fixed3(height) << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << fixed3(width) << "\" height=\"" << fixed3(height)
        << "\" fill=\"white\"/>\n";

    // Axes: waterline and centerline.
    out << "<g stroke=\"#888888\" stroke-width=\"1\">\n";
    out << "<line x1=\"" << px(-half_b) << "\" y1=\"" << pz(0) << "\" x2=\"" << px(half_b) << "\" y2=\"" << pz(0)
        << "\"/>\n";
    out << "<line x1=\"" << px(0) << "\" y1=\"" << pz(0) << "\" x2=\"" << px(0) << "\" y2=\"" << pz(depth)
        << "\"/>\n";
    out << "</g>\n";

    out << "<g fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1\">\n";
    for (Index i = 0; i < nx; ++i) {
        out << "<polyline id=\"section_" << i << "\" points=\"";
        for (Index j = 0; j < nz; ++j)
            out << px(-hull.y(i, j)) << ',' << pz(depth * hull.grid.z_stations[j]) << ' ';
        for (Index j = nz; j-- > 0;) {
            out << px(hull.y(i, j)) << ',' << pz(depth * hull.grid.z_stations[j]);
            if (j > 0)
                out << ' ';
        }
        out << "\"/>\n";
    }
    out << "</g>\n";

    out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
    out << "<text x=\"" << px(half_b) << "\" y=\"" << fixed3(top - 8) << "\" text-anchor=\"end\">B/2 = "
        << fixed3(half_b) << " m</text>\n";
    out << "<text x=\"" << fixed3(cx + 6) << "\" y=\"" << fixed3(top + scale * depth + 16) << "\">d = " << fixed3(depth)
        << " m</text>\n";
    out << "<text x=\"" << fixed3(margin / 2) << "\" y=\"" << fixed3(height - margin / 3) << "\">L = "
        << fixed3(hull.L) << " m, " << nx << " sections</text>\n";
    out << "</g>\n</svg>\n";
    if (!out)
        throw IOError("write failed: " + path.string());
}

void emit_lineplan_svg(const HullPointCloud& cloud, const std::filesystem::path& path, const GridSpec& grid)
{
    emit_lineplan_svg(from_point_cloud(cloud, grid), path);
}

std::filesystem::path scatter_path(const std::filesystem::path& prefix, std::string_view kind)
{
    std::filesystem::path p = prefix;
    p += "_";
    p += std::string(kind);
    p += ".csv";
    return p;
}

void emit_scatter_csv(const ScatterData& sd, const std::filesystem::path& prefix)
{
    const auto write = [](const std::filesystem::path& path, std::string_view kind, const std::vector<double>& req,
                          const std::vector<double>& got) {
        if (req.size() != got.size())
            throw LengthMismatch("scatter columns differ in length");
        auto out = detail::open_output(path);
        out << "requested_" << kind << ",recomputed_" << kind << '\n';
        for (std::size_t i = 0; i < req.size(); ++i)
            out << detail::format_double(req[i]) << ',' << detail::format_double(got[i]) << '\n';
        if (!out)
            throw IOError("write failed: " + path.string());
    };
    write(scatter_path(prefix, "cd"), "cd", sd.cd_requested, sd.cd_recomputed);
    write(scatter_path(prefix, "w"), "w", sd.w_requested, sd.w_recomputed);
}

ScatterData read_scatter_csv(const std::filesystem::path& prefix)
{
    const auto read = [](const std::filesystem::path& path, std::string_view kind, std::vector<double>& req,
                         std::vector<double>& got) {
        auto in = detail::open_input(path);
        std::string line;
        const std::string header = "requested_" + std::string(kind) + ",recomputed_" + std::string(kind);
        if (!std::getline(in, line) || detail::trim(line) != header)
            throw FormatError(path.string() + ": expected header '" + header + "'");
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (detail::trim(line).empty())
                continue;
            const auto cells = detail::split(line);
            if (cells.size() != 2)
                throw FormatError(detail::cell_location(path, row, cells.size()) + ": expected 2 columns");
            req.push_back(detail::parse_double(cells[0], detail::cell_location(path, row, 1)));
            got.push_back(detail::parse_double(cells[1], detail::cell_location(path, row, 2)));
        }
    };
    ScatterData sd;
    read(scatter_path(prefix, "cd"), "cd", sd.cd_requested, sd.cd_recomputed);
    read(scatter_path(prefix, "w"), "w", sd.w_requested, sd.w_recomputed);
    return sd;
}

void print_report(std::ostream& os, const EvalReport& report)
{
    char buf[160];
    os << "class  MAPE(Cd)  MAPE(W)   Total     samples  rejected\n";
    for (const auto& r : report.classes) {
        std::snprintf(buf, sizeof buf, "%-6s %-9.5f %-9.5f %-9.5f %-8zu %zu\n", std::string(to_string(r.speed_class)).c_str(),
                      r.mape_cd, r.mape_w, r.total, r.samples, r.rejected);
        os << buf;
    }
    os << "accepted " << report.samples << ", rejected " << report.rejected << '\n';
}

} // namespace hullgan
