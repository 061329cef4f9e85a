#include "hullgan/errors.hpp"
#include "hullgan/evaluate.hpp"

#include "support.hpp"

#include <algorithm>
#include <regex>
#include <set>

using namespace hullgan;

namespace {

std::vector<LabeledSample> few(SpeedClass c, std::size_t n)
{
    return build_dataset(SweepSpec::table(c), GridSpec::standard(), HydroEnv{}, QuadratureSpec{}, n).samples;
}

// Hull source that returns the stored vectors of the samples, in request order.
CloudSource replay(const std::vector<LabeledSample>& samples)
{
    return [&samples](std::span<const Label> requests, int n) {
        std::vector<HullPointCloud> out;
        for (std::size_t r = 0; r < requests.size(); ++r)
            for (int k = 0; k < n; ++k)
                out.push_back({samples[r].vector, samples[r].params.L});
        return out;
    };
}

} // namespace

TEST_CASE("mape")
{
    const std::vector<double> c{1.0, 2.0}, h{1.1, 1.8};
    CHECK(mape(c, h) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(mape(c, c) == 0.0);
    const std::vector<double> z{1.0, 0.0};
    CHECK_THROWS_AS(mape(z, h), DivisionByZero);
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(mape(one, h), LengthMismatch);
    CHECK_THROWS_AS(mape(std::vector<double>{}, std::vector<double>{}), LengthMismatch);
}

TEST_CASE("report total is the mean of the two errors")
{
    CHECK(report_total(0.04347, 0.07327) == doctest::Approx(0.05837).epsilon(1e-12));
    CHECK(report_total(0.2, 0.4) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("replaying training hulls gives zero error")
{
    auto samples = few(SpeedClass::Low, 4);
    const auto mid = few(SpeedClass::Medium, 3);
    samples.insert(samples.end(), mid.begin(), mid.end());
    std::vector<Label> requests;
    for (const auto& s : samples)
        requests.push_back(s.label);
    const auto [report, scatter] = evaluate_hulls(requests, 2, replay(samples));
    REQUIRE(report.classes.size() == 2);
    CHECK(report.classes[0].speed_class == SpeedClass::Medium);
    CHECK(report.classes[1].speed_class == SpeedClass::Low);
    CHECK(report.find(SpeedClass::High) == nullptr);
    CHECK(report.find(SpeedClass::Low)->samples == 8);
    CHECK(report.samples == 14);
    CHECK(report.rejected == 0);
    for (const auto& r : report.classes) {
        CHECK(r.mape_cd <= 1e-10);
        CHECK(r.mape_w <= 1e-10);
        CHECK(r.total == report_total(r.mape_cd, r.mape_w));
    }
    CHECK(scatter.cd_requested.size() == 14);
    CHECK(scatter.cd_requested == scatter.cd_recomputed);
}

TEST_CASE("degenerate hulls are counted and excluded")
{
    const auto samples = few(SpeedClass::High, 3);
    std::vector<Label> requests;
    for (const auto& s : samples)
        requests.push_back(s.label);
    const CloudSource broken = [&](std::span<const Label> r, int n) {
        auto out = replay(samples)(r, n);
        out[1].coords.setZero(); // no beam and no draft
        for (Index k = 0; k < out[2].size(); ++k)
            out[2].coords[2 * k] = -1.0; // negative half-breadths
        return out;
    };
    const auto [report, scatter] = evaluate_hulls(requests, 1, broken);
    CHECK(report.rejected == 2);
    CHECK(report.samples == 1);
    CHECK(report.classes[0].rejected == 2);
    CHECK(scatter.w_requested.size() == 1);

    const CloudSource all_bad = [](std::span<const Label> r, int n) {
        return std::vector<HullPointCloud>(r.size() * n, HullPointCloud{Eigen::VectorXd::Zero(1600), 100.0});
    };
    CHECK_THROWS_AS(evaluate_hulls(requests, 1, all_bad), EmptyEvaluation);
}

TEST_CASE("requests from held-out samples")
{
    const auto samples = few(SpeedClass::Medium, 3);
    const auto req = requests_from_samples(samples);
    REQUIRE(req.size() == 3);
    CHECK(req[1].Cd == samples[1].label.Cd);
    CHECK(req[1].W == samples[1].label.W);
    CHECK(req[1].U == knots_to_ms(20.0));
}

TEST_CASE("evaluate_model is deterministic")
{
    const auto samples = few(SpeedClass::Low, 6);
    TrainConfig cfg;
    cfg.latent_dim = 4;
    cfg.g_hidden = {8};
    cfg.d_hidden = {8};
    cfg.batch_size = 4;
    cfg.iterations = 2;
    const Checkpoint ck = train(samples, compute_stats(samples), cfg);
    const auto req = requests_from_samples(samples);
    const auto a = evaluate_model(ck, req, 2, HydroEnv{}, QuadratureSpec{}, 5);
    const auto b = evaluate_model(ck, req, 2, HydroEnv{}, QuadratureSpec{}, 5);
    CHECK(a.second == b.second);
    CHECK(a.first.samples + a.first.rejected == 12);
}

TEST_CASE("line plan SVG")
{
    testing::ScratchDir dir("svg");
    HullGrid box{GridSpec::standard(), Eigen::MatrixXd::Constant(20, 40, 5.0), 100.0, 10.0, 4.0};
    emit_lineplan_svg(box, dir / "box.svg");
    const std::string svg = testing::slurp(dir / "box.svg");
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);

    // Twenty identical rectangular sections.
    const std::regex poly("<polyline id=\"section_\\d+\" points=\"([^\"]*)\"/>");
    std::vector<std::string> points;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator(); ++it)
        points.push_back((*it)[1]);
    REQUIRE(points.size() == 20);
    for (const auto& p : points)
        CHECK(p == points[0]);
    std::set<std::string> xs;
    const std::regex pair("([-0-9.]+),([-0-9.]+)");
    for (auto it = std::sregex_iterator(points[0].begin(), points[0].end(), pair); it != std::sregex_iterator(); ++it)
        xs.insert((*it)[1]);
    CHECK(xs.size() == 2); // both sides are vertical lines

    // Crude well-formedness: every opened element is closed.
    std::size_t opens = 0, closes = 0;
    for (std::size_t k = 0; k + 1 < svg.size(); ++k) {
        if (svg[k] == '<' && svg[k + 1] != '/' && svg[k + 1] != '?')
            ++opens;
        if ((svg[k] == '<' && svg[k + 1] == '/') || (svg[k] == '/' && svg[k + 1] == '>'))
            ++closes;
    }
    CHECK(opens == closes);

    emit_lineplan_svg(box, dir / "again.svg");
    CHECK(testing::slurp(dir / "again.svg") == svg);

    const HullGrid wig = sample_hull({100.0, 14.0, 5.5, 0.70, 0.99, 0.80});
    emit_lineplan_svg(to_point_cloud(wig), dir / "wig.svg");
    CHECK(testing::slurp(dir / "wig.svg").find("section_19") != std::string::npos);
    CHECK_THROWS_AS(emit_lineplan_svg(box, dir / "no" / "such" / "dir.svg"), IOError);
}

TEST_CASE("scatter CSV round trip")
{
    testing::ScratchDir dir("scatter");
    ScatterData sd;
    sd.cd_requested = {0.1, 1.0 / 3.0};
    sd.cd_recomputed = {0.11, 2.0 / 7.0};
    sd.w_requested = {9000.5, 1e4};
    sd.w_recomputed = {9100.25, 9999.999999999998};
    emit_scatter_csv(sd, dir / "sc");
    CHECK(read_scatter_csv(dir / "sc") == sd);
    const std::string cd = testing::slurp(scatter_path(dir / "sc", "cd"));
    CHECK(cd.rfind("requested_cd,recomputed_cd\n", 0) == 0);
    CHECK(std::count(cd.begin(), cd.end(), '\n') == 3);
    CHECK(testing::slurp(scatter_path(dir / "sc", "w")).rfind("requested_w,recomputed_w\n", 0) == 0);
}
