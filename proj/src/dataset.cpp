#include "hullgan/dataset.hpp"

#include "hullgan/errors.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace hullgan {

namespace {

// Arithmetic sequence first, first + step, ..., last in units of 1/1000 so
// every entry is the double nearest its decimal literal.
std::vector<double> milli_range(int first, int last, int step)
{
    std::vector<double> v;
    for (int k = first; k <= last; k += step)
        v.push_back(k / 1000.0);
    return v;
}

std::vector<double> unique_in_order(const std::vector<double>& values)
{
    std::vector<double> out;
    for (double v : values)
        if (std::find(out.begin(), out.end(), v) == out.end())
            out.push_back(v);
    return out;
}

constexpr std::array<std::string_view, 3> kLabelNames{"Cd", "W", "U"};
constexpr int kFixedColumns = 10;

double label_component(const Label& l, std::size_t k)
{
    return k == 0 ? l.Cd : (k == 1 ? l.W : l.U);
}

} // namespace

std::string_view to_string(SpeedClass c)
{
    switch (c) {
    case SpeedClass::High:
        return "high";
    case SpeedClass::Medium:
        return "mid";
    case SpeedClass::Low:
        return "low";
    }
    return "high";
}

SpeedClass parse_speed_class(std::string_view text)
{
    if (text == "high")
        return SpeedClass::High;
    if (text == "mid" || text == "medium")
        return SpeedClass::Medium;
    if (text == "low")
        return SpeedClass::Low;
    throw FormatError("unknown speed class '" + std::string(text) + "'");
}

double design_speed_knots(SpeedClass c)
{
    switch (c) {
    case SpeedClass::High:
        return 25.0;
    case SpeedClass::Medium:
        return 20.0;
    case SpeedClass::Low:
        return 15.0;
    }
    return 25.0;
}

SpeedClass classify_speed(double U)
{
    const double knots = U / kKnot;
    SpeedClass best = SpeedClass::High;
    for (SpeedClass c : kSpeedClasses)
        if (std::abs(knots - design_speed_knots(c)) < std::abs(knots - design_speed_knots(best)))
            best = c;
    return best;
}

SweepSpec SweepSpec::table(SpeedClass c, double L)
{
    SweepSpec s;
    s.speed_class = c;
    s.U_knots = design_speed_knots(c);
    s.L = L;
    switch (c) {
    case SpeedClass::High:
        s.BL_values = {0.125};
        s.dL_values = {0.045};
        s.Cm_values = milli_range(850, 970, 10);
        s.Cb_values = milli_range(500, 600, 10);
        s.Cw_values = milli_range(680, 780, 10);
        break;
    case SpeedClass::Medium:
        s.BL_values = milli_range(130, 150, 5);
        s.dL_values = {0.055, 0.060, 0.060};
        s.Cm_values = {0.98, 0.99};
        s.Cb_values = milli_range(650, 750, 10);
        s.Cw_values = milli_range(800, 850, 10);
        break;
    case SpeedClass::Low:
        s.BL_values = milli_range(155, 200, 5);
        s.dL_values = {0.065, 0.070};
        s.Cm_values = {0.95};
        s.Cb_values = milli_range(780, 850, 10);
        s.Cw_values = milli_range(860, 920, 10);
        break;
    }
    return s;
}

std::vector<WigleyParams> enumerate_sweep(const SweepSpec& s)
{
    const auto bl = unique_in_order(s.BL_values);
    const auto dl = unique_in_order(s.dL_values);
    const auto cm = unique_in_order(s.Cm_values);
    const auto cw = unique_in_order(s.Cw_values);
    const auto cb = unique_in_order(s.Cb_values);

    std::vector<WigleyParams> out;
    out.reserve(bl.size() * dl.size() * cm.size() * cw.size() * cb.size());
    for (double b : bl)
        for (double d : dl)
            for (double m : cm)
                for (double w : cw)
                    for (double k : cb)
                        out.push_back({s.L, b * s.L, d * s.L, k, m, w});
    return out;
}

Dataset build_dataset(const SweepSpec& s, const GridSpec& grid, const HydroEnv& env, const QuadratureSpec& q,
                      std::size_t limit)
{
    const auto params = enumerate_sweep(s);
    Dataset ds;
    ds.raw_count = params.size();
    const double U = knots_to_ms(s.U_knots);

    std::vector<std::size_t> valid;
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (validate_params(params[k], grid))
            valid.push_back(k);
        else
            ds.rejections.push_back({k, params[k], "invalid Wigley parameters"});
    }
    if (limit > 0 && limit < valid.size()) {
        std::vector<std::size_t> picked(limit);
        for (std::size_t m = 0; m < limit; ++m)
            picked[m] = valid[m * valid.size() / limit];
        valid = std::move(picked);
    }

    for (std::size_t k : valid) {
        const WigleyParams& p = params[k];
        try {
            const HullGrid hull = sample_hull(p, grid);
            LabeledSample sample{p, s.speed_class, s.U_knots, label_hull(hull, U, env, q),
                                 to_point_cloud(hull).coords};
            ds.samples.push_back(std::move(sample));
        } catch (const Error& e) {
            ds.rejections.push_back({k, p, e.what()});
        }
    }
    std::sort(ds.rejections.begin(), ds.rejections.end(),
              [](const Rejection& a, const Rejection& b) { return a.index < b.index; });
    return ds;
}

DatasetStats compute_stats(std::span<const LabeledSample> samples)
{
    if (samples.empty())
        throw DegenerateStats("cannot compute statistics of an empty dataset");
    const Index dim = samples.front().vector.size();
    DatasetStats st;
    st.count = samples.size();
    st.coord_min = samples.front().vector;
    st.coord_max = samples.front().vector;
    for (const auto& s : samples) {
        if (s.vector.size() != dim)
            throw ShapeError("samples have different vector lengths");
        st.coord_min = st.coord_min.cwiseMin(s.vector);
        st.coord_max = st.coord_max.cwiseMax(s.vector);
    }
    const double n = static_cast<double>(samples.size());
    for (std::size_t k = 0; k < 3; ++k) {
        Summary& sum = st.labels[k];
        sum.min = sum.max = label_component(samples.front().label, k);
        double total = 0.0;
        for (const auto& s : samples) {
            const double v = label_component(s.label, k);
            sum.min = std::min(sum.min, v);
            sum.max = std::max(sum.max, v);
            total += v;
        }
        sum.mean = total / n;
        double sq = 0.0;
        for (const auto& s : samples) {
            const double dv = label_component(s.label, k) - sum.mean;
            sq += dv * dv;
        }
        sum.std = std::sqrt(sq / n);
    }
    return st;
}

Label relabel(const LabeledSample& sample, const HydroEnv& env, const QuadratureSpec& q, const GridSpec& grid)
{
    const auto cloud = point_cloud_from_vector({sample.vector.data(), static_cast<std::size_t>(sample.vector.size())},
                                               sample.params.L, grid);
    return label_hull(from_point_cloud(cloud, grid), knots_to_ms(sample.U_knots), env, q);
}

std::filesystem::path stats_path(const std::filesystem::path& csv)
{
    auto p = csv;
    p.replace_extension(".stats");
    return p;
}

void write_stats(const std::filesystem::path& path, const DatasetStats& stats)
{
    auto out = detail::open_output(path);
    out << "count=" << stats.count << '\n';
    for (std::size_t k = 0; k < 3; ++k) {
        const Summary& s = stats.labels[k];
        out << kLabelNames[k] << ".min=" << detail::format_double(s.min) << '\n'
            << kLabelNames[k] << ".max=" << detail::format_double(s.max) << '\n'
            << kLabelNames[k] << ".mean=" << detail::format_double(s.mean) << '\n'
            << kLabelNames[k] << ".std=" << detail::format_double(s.std) << '\n';
    }
    out << "dim=" << stats.coord_min.size() << '\n';
    for (Index i = 0; i < stats.coord_min.size(); ++i) {
        const auto name = detail::indexed_name("v_", static_cast<std::size_t>(i + 1), 4);
        out << name << ".min=" << detail::format_double(stats.coord_min[i]) << '\n'
            << name << ".max=" << detail::format_double(stats.coord_max[i]) << '\n';
    }
    if (!out)
        throw IOError("write failed: " + path.string());
}

DatasetStats read_stats(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    std::map<std::string, std::pair<std::string, std::size_t>, std::less<>> kv;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": expected key=value");
        kv[std::string(detail::trim(t.substr(0, eq)))] = {std::string(detail::trim(t.substr(eq + 1))), row};
    }
    const auto get = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw FormatError(path.string() + ": missing key '" + key + "'");
        return detail::parse_double(it->second.first,
                                    path.string() + ": row " + std::to_string(it->second.second) + " (" + key + ")");
    };
    DatasetStats st;
    st.count = static_cast<std::size_t>(get("count"));
    for (std::size_t k = 0; k < 3; ++k) {
        const std::string name(kLabelNames[k]);
        st.labels[k] = {get(name + ".min"), get(name + ".max"), get(name + ".mean"), get(name + ".std")};
    }
    const auto dim = static_cast<Index>(get("dim"));
    st.coord_min.resize(dim);
    st.coord_max.resize(dim);
    for (Index i = 0; i < dim; ++i) {
        const auto name = detail::indexed_name("v_", static_cast<std::size_t>(i + 1), 4);
        st.coord_min[i] = get(name + ".min");
        st.coord_max[i] = get(name + ".max");
    }
    return st;
}

void write_csv(const std::filesystem::path& path, std::span<const LabeledSample> samples, const DatasetStats& stats)
{
    auto out = detail::open_output(path);
    out << "speed_class,U_knots,L,B,d,Cb,Cm,Cw,Cd,W";
    const Index dim = samples.empty() ? kVectorSize : samples.front().vector.size();
    for (Index i = 0; i < dim; ++i)
        out << ',' << detail::indexed_name("v_", static_cast<std::size_t>(i + 1), 4);
    out << '\n';
    for (const auto& s : samples) {
        if (s.vector.size() != dim)
            throw ShapeError("samples have different vector lengths");
        const auto f = detail::format_double;
        out << to_string(s.speed_class) << ',' << f(s.U_knots) << ',' << f(s.params.L) << ',' << f(s.params.B)
            << ',' << f(s.params.d) << ',' << f(s.params.Cb) << ',' << f(s.params.Cm) << ',' << f(s.params.Cw)
            << ',' << f(s.label.Cd) << ',' << f(s.label.W);
        for (Index i = 0; i < dim; ++i)
            out << ',' << f(s.vector[i]);
        out << '\n';
    }
    if (!out)
        throw IOError("write failed: " + path.string());
    write_stats(stats_path(path), stats);
}

std::pair<std::vector<LabeledSample>, DatasetStats> read_csv(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line))
        throw FormatError(path.string() + ": row 1: missing header");
    const auto header = detail::split(detail::trim(line));
    static constexpr std::array<std::string_view, kFixedColumns> fixed{
        "speed_class", "U_knots", "L", "B", "d", "Cb", "Cm", "Cw", "Cd", "W"};
    if (header.size() <= fixed.size())
        throw FormatError(path.string() + ": row 1: malformed header (too few columns)");
    for (std::size_t c = 0; c < fixed.size(); ++c)
        if (header[c] != fixed[c])
            throw FormatError(path.string() + ": row 1, column " + std::to_string(c + 1) + ": expected '"
                              + std::string(fixed[c]) + "', found '" + std::string(header[c]) + "'");
    const std::size_t dim = header.size() - fixed.size();
    for (std::size_t i = 0; i < dim; ++i)
        if (header[fixed.size() + i] != detail::indexed_name("v_", i + 1, 4))
            throw FormatError(path.string() + ": row 1, column " + std::to_string(fixed.size() + i + 1)
                              + ": unexpected name '" + std::string(header[fixed.size() + i]) + "'");

    std::vector<LabeledSample> samples;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        const auto t = detail::trim(line);
        if (t.empty())
            continue;
        const auto cells = detail::split(t);
        if (cells.size() != header.size())
            throw FormatError(path.string() + ": row " + std::to_string(row) + ": " + std::to_string(cells.size())
                              + " columns, expected " + std::to_string(header.size()));
        const auto num = [&](std::size_t c) { return detail::parse_double(cells[c], detail::cell_location(path, row, c)); };
        LabeledSample s;
        try {
            s.speed_class = parse_speed_class(detail::trim(cells[0]));
        } catch (const FormatError& e) {
            throw FormatError(detail::cell_location(path, row, 0) + ": " + e.what());
        }
        s.U_knots = num(1);
        s.params = {num(2), num(3), num(4), num(5), num(6), num(7)};
        s.label = {num(8), num(9), knots_to_ms(s.U_knots)};
        s.vector.resize(static_cast<Index>(dim));
        for (std::size_t i = 0; i < dim; ++i)
            s.vector[static_cast<Index>(i)] = num(fixed.size() + i);
        samples.push_back(std::move(s));
    }
    return {std::move(samples), read_stats(stats_path(path))};
}

std::array<double, 3> normalize_labels(const Label& label, const DatasetStats& stats)
{
    std::array<double, 3> out{};
    for (std::size_t k = 0; k < 3; ++k) {
        const Summary& s = stats.labels[k];
        if (!(s.max > s.min))
            throw DegenerateStats("label " + std::string(kLabelNames[k]) + " has max == min");
        out[k] = (label_component(label, k) - s.min) / (s.max - s.min);
    }
    return out;
}

Label denormalize_labels(const std::array<double, 3>& normalized, const DatasetStats& stats)
{
    std::array<double, 3> raw{};
    for (std::size_t k = 0; k < 3; ++k) {
        const Summary& s = stats.labels[k];
        if (!(s.max > s.min))
            throw DegenerateStats("label " + std::string(kLabelNames[k]) + " has max == min");
        raw[k] = s.min + normalized[k] * (s.max - s.min);
    }
    return {raw[0], raw[1], raw[2]};
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Fisher-Yates with explicit draws; std::shuffle's sequence is library-specific.
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>>
split_holdout(std::span<const LabeledSample> samples, double fraction, std::uint64_t seed)
{
    if (!(fraction >= 0.0 && fraction < 1.0))
        throw Error("holdout fraction must lie in [0, 1)");
    const auto n_hold = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(samples.size())));
    const auto idx = shuffled_indices(samples.size(), seed);
    std::vector<char> held(samples.size(), 0);
    for (std::size_t k = 0; k < n_hold; ++k)
        held[idx[k]] = 1;
    std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        (held[i] ? out.second : out.first).push_back(samples[i]);
    return out;
}

std::vector<LabeledSample> subsample(std::span<const LabeledSample> samples, std::size_t n, std::uint64_t seed)
{
    if (n >= samples.size())
        return {samples.begin(), samples.end()};
    auto idx = shuffled_indices(samples.size(), seed);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<LabeledSample> out;
    out.reserve(n);
    for (std::size_t i : idx)
        out.push_back(samples[i]);
    return out;
}

} // namespace hullgan
