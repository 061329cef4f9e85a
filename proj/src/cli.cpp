#include "hullgan/cli.hpp"

#include "hullgan/dataset.hpp"
#include "hullgan/errors.hpp"
#include "hullgan/evaluate.hpp"
#include "hullgan/geometry.hpp"
#include "hullgan/hydro.hpp"
#include "hullgan/wgan.hpp"
#include "text_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>

namespace hullgan {

namespace {

struct DatasetArgs {
    std::string speed_class = "high";
    std::string out;
    double length = 100.0;
    int n_theta = QuadratureSpec{}.n_theta;
    std::size_t limit = 0;
    double holdout = 0.0;
    std::uint64_t seed = 0;
};

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config;
    std::vector<std::string> overrides;
    std::string metrics;
    std::size_t subsample = 0;
    std::uint64_t subsample_seed = 0;
};

struct GenerateArgs {
    std::string ckpt;
    double cd = 0.0;
    double w = 0.0;
    double speed_knots = 0.0;
    int count = 1;
    std::uint64_t seed = 0;
    std::string out;
    std::string svg_dir;
};

struct EvaluateArgs {
    std::string ckpt;
    std::string data;
    int count = 1;
    std::uint64_t seed = 0;
    int n_theta = QuadratureSpec{}.n_theta;
    std::size_t max_requests = 0;
    std::string scatter;
};

struct HydroArgs {
    std::string hulls;
    double speed_knots = 0.0;
    HydroEnv env;
    int n_theta = QuadratureSpec{}.n_theta;
};

struct PlotArgs {
    std::string hulls;
    std::string data;
    std::string out_dir = ".";
};

QuadratureSpec quadrature(int n_theta)
{
    QuadratureSpec q;
    q.n_theta = n_theta;
    q.validate();
    return q;
}

std::vector<SpeedClass> classes_for(const std::string& name)
{
    if (name == "all")
        return {kSpeedClasses.begin(), kSpeedClasses.end()};
    return {parse_speed_class(name)};
}

std::filesystem::path holdout_path(const std::filesystem::path& out)
{
    std::filesystem::path p = out;
    p.replace_filename(out.stem().string() + "_holdout" + out.extension().string());
    return p;
}

void run_dataset(const DatasetArgs& a, std::ostream& out)
{
    const QuadratureSpec q = quadrature(a.n_theta);
    std::vector<LabeledSample> all;
    for (SpeedClass c : classes_for(a.speed_class)) {
        Dataset ds = build_dataset(SweepSpec::table(c, a.length), GridSpec::standard(), HydroEnv{}, q, a.limit);
        out << to_string(c) << ": raw " << ds.raw_count << ", accepted " << ds.samples.size() << ", rejected "
            << ds.rejections.size() << '\n';
        all.insert(all.end(), std::make_move_iterator(ds.samples.begin()), std::make_move_iterator(ds.samples.end()));
    }
    if (!(a.holdout >= 0.0 && a.holdout < 1.0))
        throw Error("--holdout must be in [0, 1)");
    auto [kept, held] = split_holdout(all, a.holdout, a.seed);
    const DatasetStats stats = compute_stats(kept);
    write_csv(a.out, kept, stats);
    out << "wrote " << kept.size() << " samples to " << a.out << '\n';
    if (!held.empty()) {
        const auto hp = holdout_path(a.out);
        write_csv(hp, held, stats);
        out << "wrote " << held.size() << " held-out samples to " << hp.string() << '\n';
    }
}

TrainConfig load_config(const std::string& file, const std::vector<std::string>& overrides)
{
    TrainConfig cfg;
    const auto apply = [&](const std::string& key, const std::string& value) {
        if (!cfg.apply(key, value))
            throw Error("unknown training option '" + key + "'");
    };
    if (!file.empty())
        for (const auto& [k, v] : read_key_values(file))
            apply(k, v);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw Error("--set expects key=value, got '" + kv + "'");
        apply(std::string(detail::trim(std::string_view(kv).substr(0, eq))),
              std::string(detail::trim(std::string_view(kv).substr(eq + 1))));
    }
    cfg.validate();
    return cfg;
}

void run_train(const TrainArgs& a, std::ostream& out)
{
    const TrainConfig cfg = load_config(a.config, a.overrides);
    auto [samples, stats] = read_csv(a.data);
    if (a.subsample > 0)
        samples = subsample(samples, a.subsample, a.subsample_seed);
    TrainOptions opts;
    std::ofstream metrics;
    if (!a.metrics.empty()) {
        metrics = detail::open_output(a.metrics);
        opts.metrics = &metrics;
    }
    std::filesystem::path diag = a.out;
    diag += ".diag";
    opts.diagnostic_checkpoint = diag;
    const Checkpoint ckpt = train(samples, stats, cfg, opts);
    save_checkpoint(a.out, ckpt);
    out << "trained " << ckpt.iteration << " iterations on " << samples.size() << " samples, saved " << a.out
        << '\n';
}

void run_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err)
{
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const Label request{a.cd, a.w, knots_to_ms(a.speed_knots)};
    if (!make_condition(request, ckpt.stats).in_range)
        err << "warning: requested label lies outside the training range\n";
    const std::vector<Label> requests{request};
    const auto clouds = generate(ckpt, requests, a.count, a.seed);
    std::vector<HullGrid> hulls;
    for (const auto& c : clouds)
        hulls.push_back(from_point_cloud(c, ckpt.grid));
    write_hull_csv(a.out, hulls);
    out << "wrote " << hulls.size() << " hulls to " << a.out << '\n';
    if (!a.svg_dir.empty()) {
        std::filesystem::create_directories(a.svg_dir);
        for (std::size_t i = 0; i < hulls.size(); ++i)
            emit_lineplan_svg(hulls[i], std::filesystem::path(a.svg_dir) / (detail::indexed_name("hull_", i + 1, 4) + ".svg"));
    }
}

void run_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err)
{
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    auto [held, stats] = read_csv(a.data);
    std::vector<Label> requests = requests_from_samples(held);
    if (a.max_requests > 0 && requests.size() > a.max_requests)
        requests.resize(a.max_requests);
    std::size_t outside = 0;
    for (const auto& r : requests)
        outside += make_condition(r, ckpt.stats).in_range ? 0 : 1;
    if (outside > 0)
        err << "warning: " << outside << " requests lie outside the training range\n";
    const auto [report, scatter] = evaluate_model(ckpt, requests, a.count, HydroEnv{}, quadrature(a.n_theta), a.seed);
    print_report(out, report);
    if (!a.scatter.empty())
        emit_scatter_csv(scatter, a.scatter);
}

void run_hydro(const HydroArgs& a, std::ostream& out)
{
    const QuadratureSpec q = quadrature(a.n_theta);
    const double U = knots_to_ms(a.speed_knots);
    out << "K,Cdf,Cdw,Cd,Fn,Rn,W\n";
    for (const auto& hull : read_hull_csv(a.hulls)) {
        const DragBreakdown r = total_cd(hull, U, a.env, q);
        out << detail::format_double(r.K) << ',' << detail::format_double(r.Cdf) << ','
            << detail::format_double(r.Cdw) << ',' << detail::format_double(r.Cd) << ','
            << detail::format_double(r.Fn) << ',' << detail::format_double(r.Rn) << ','
            << detail::format_double(displacement_tonnage(hull, a.env)) << '\n';
    }
}

void run_plot(const PlotArgs& a, std::ostream& out)
{
    std::vector<HullGrid> hulls;
    if (!a.hulls.empty()) {
        hulls = read_hull_csv(a.hulls);
    } else {
        const auto samples = read_csv(a.data).first;
        for (const auto& s : samples)
            hulls.push_back(from_point_cloud(point_cloud_from_vector(
                std::span<const double>(s.vector.data(), static_cast<std::size_t>(s.vector.size())), s.params.L)));
    }
    std::filesystem::create_directories(a.out_dir);
    for (std::size_t i = 0; i < hulls.size(); ++i)
        emit_lineplan_svg(hulls[i], std::filesystem::path(a.out_dir) / (detail::indexed_name("hull_", i + 1, 4) + ".svg"));
    out << "wrote " << hulls.size() << " line plans to " << a.out_dir << '\n';
}

} // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Conditional GAN for Wigley-type hull forms with thin-ship drag labels", "hullgan"};
    app.require_subcommand(1);

    DatasetArgs ds;
    auto* dataset = app.add_subcommand("dataset", "Build a labeled hull dataset from the parameter sweeps");
    dataset->add_option("--class", ds.speed_class, "Speed class: high, mid, low or all")
        ->check(CLI::IsMember({"high", "mid", "medium", "low", "all"}));
    dataset->add_option("--out", ds.out, "Output CSV (a .stats sidecar is written next to it)")->required();
    dataset->add_option("--length", ds.length, "Hull length L [m]")->check(CLI::PositiveNumber);
    dataset->add_option("--n-theta", ds.n_theta, "Simpson panels for the wave integral");
    dataset->add_option("--limit", ds.limit, "Label at most this many valid hulls per class (0: all)");
    dataset->add_option("--holdout", ds.holdout, "Fraction written to <out>_holdout.csv");
    dataset->add_option("--seed", ds.seed, "Seed of the holdout split");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train a conditional WGAN-gp on a dataset CSV");
    train_cmd->add_option("--data", tr.data, "Dataset CSV")->required();
    train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
    train_cmd->add_option("--config", tr.config, "key=value configuration file");
    train_cmd->add_option("--set", tr.overrides, "Configuration override key=value (repeatable)");
    train_cmd->add_option("--metrics", tr.metrics, "Per-iteration loss CSV");
    train_cmd->add_option("--subsample", tr.subsample, "Train on a seeded subset of this size");
    train_cmd->add_option("--subsample-seed", tr.subsample_seed, "Seed of the subset");

    GenerateArgs gen;
    auto* generate_cmd = app.add_subcommand("generate", "Generate hulls for a requested (Cd, W, U)");
    generate_cmd->add_option("--ckpt", gen.ckpt, "Checkpoint")->required();
    generate_cmd->add_option("--cd", gen.cd, "Requested drag coefficient")->required();
    generate_cmd->add_option("--w", gen.w, "Requested displacement [t]")->required();
    generate_cmd->add_option("--speed-knots", gen.speed_knots, "Speed [kn]")->required();
    generate_cmd->add_option("--count", gen.count, "Number of hulls")->check(CLI::PositiveNumber);
    generate_cmd->add_option("--seed", gen.seed, "Latent seed");
    generate_cmd->add_option("--out", gen.out, "Hull CSV")->required();
    generate_cmd->add_option("--svg-dir", gen.svg_dir, "Also write one line plan per hull here");

    EvaluateArgs ev;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Regenerate held-out labels and report MAPE per speed class");
    evaluate_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
    evaluate_cmd->add_option("--data", ev.data, "Held-out dataset CSV supplying the requests")->required();
    evaluate_cmd->add_option("--count", ev.count, "Hulls per request")->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--seed", ev.seed, "Latent seed");
    evaluate_cmd->add_option("--n-theta", ev.n_theta, "Simpson panels for the wave integral");
    evaluate_cmd->add_option("--max-requests", ev.max_requests, "Use only the first N requests (0: all)");
    evaluate_cmd->add_option("--scatter", ev.scatter, "Write <prefix>_cd.csv and <prefix>_w.csv");

    HydroArgs hy;
    auto* hydro_cmd = app.add_subcommand("hydro", "Drag breakdown and displacement of hulls in a hull CSV");
    hydro_cmd->add_option("hulls", hy.hulls, "Hull CSV (L,B,d,y_001..)")->required();
    hydro_cmd->add_option("--speed-knots", hy.speed_knots, "Speed [kn]")->required()->check(CLI::PositiveNumber);
    hydro_cmd->add_option("--rho", hy.env.rho, "Water density [kg/m^3]");
    hydro_cmd->add_option("--nu", hy.env.nu, "Kinematic viscosity [m^2/s]");
    hydro_cmd->add_option("--g", hy.env.g, "Gravity [m/s^2]");
    hydro_cmd->add_option("--n-theta", hy.n_theta, "Simpson panels for the wave integral");

    PlotArgs pl;
    auto* plot_cmd = app.add_subcommand("plot", "Write SVG line plans");
    auto* hulls_opt = plot_cmd->add_option("--hulls", pl.hulls, "Hull CSV");
    auto* data_opt = plot_cmd->add_option("--data", pl.data, "Dataset CSV");
    hulls_opt->excludes(data_opt);
    plot_cmd->add_option("--out-dir", pl.out_dir, "Output directory");

    if (args.empty()) {
        err << app.help();
        return 1;
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (*plot_cmd && pl.hulls.empty() && pl.data.empty())
            throw CLI::RequiredError("--hulls or --data");
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        err << "run 'hullgan --help' for usage\n";
        return 1;
    }

    try {
        if (*dataset)
            run_dataset(ds, out);
        else if (*train_cmd)
            run_train(tr, out);
        else if (*generate_cmd)
            run_generate(gen, out, err);
        else if (*evaluate_cmd)
            run_evaluate(ev, out, err);
        else if (*hydro_cmd)
            run_hydro(hy, out);
        else if (*plot_cmd)
            run_plot(pl, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

int cli_main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return cli_main(args, std::cout, std::cerr);
}

} // namespace hullgan
