// Command-line front end: generate, degrade, reconstruct, evaluate, run.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pnpdm/error.hpp"
#include "pnpdm/experiment.hpp"
#include "pnpdm/io.hpp"
#include "pnpdm/metrics.hpp"
#include "pnpdm/phantom.hpp"

namespace fs = std::filesystem;
using namespace pnpdm;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string methods;
    std::optional<std::size_t> chains;
    bool decimate = false;
};

ExperimentConfig load_config(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config);
    if (c.seed)
        cfg.seed = *c.seed;
    if (!c.out.empty())
        cfg.output_dir = c.out;
    if (!c.methods.empty())
        cfg.methods = parse_method_list(c.methods);
    if (c.chains)
        cfg.chains = *c.chains;
    if (c.decimate)
        cfg.decimate = true;
    cfg.validate();
    return cfg;
}

void write_image(const fs::path& stem, const ImageGrid& img) {
    io::write_raster(stem.string() + ".imgf32", img);
    io::write_pgm(stem.string() + ".pgm", img);
}

void add_common(CLI::App* app, Common& c, bool with_methods) {
    app->add_option("--config", c.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Master seed (overrides the config)");
    app->add_option("--out", c.out, "Output directory");
    if (with_methods) {
        app->add_option("--methods", c.methods, "Comma list of bicubic,pnpdm_edm,pnpdm_vp,pnpdm_ve");
        app->add_option("--chains", c.chains, "Independent chains per image")->check(CLI::PositiveNumber);
    }
}

int cmd_generate(const Common& c) {
    ExperimentConfig cfg = load_config(c);
    const fs::path out = cfg.output_dir;
    fs::create_directories(out);
    for (std::size_t i = 0; i < cfg.images; ++i) {
        PhantomSpec spec = cfg.phantom;
        spec.seed = cfg.phantom.seed + i;
        if (c.seed)
            spec.seed = *c.seed + i;
        char name[32];
        std::snprintf(name, sizeof name, "phantom_%04zu", i);
        write_image(out / name, generate_phantom(spec));
    }
    std::cout << "wrote " << cfg.images << " phantom(s) to " << out.string() << "\n";
    return 0;
}

int cmd_degrade(const Common& c, const std::string& input) {
    ExperimentConfig cfg = load_config(c);
    const ImageGrid hr = io::read_image(input);
    const std::uint64_t seed = derive_seed(cfg.seed, 1, 0);
    const ImagePair pair = build_pair(hr, cfg.factor, cfg.sigma_y, seed, cfg.decimate);
    save_pair(cfg.output_dir, pair);
    io::write_pgm(cfg.output_dir / "lr.pgm", pair.lr.as_image());
    std::cout << "pair " << hr.height() << "x" << hr.width() << " -> " << pair.lr.height << "x" << pair.lr.width
              << " written to " << cfg.output_dir.string() << "\n";
    return 0;
}

int cmd_reconstruct(const Common& c, const std::string& pair_dir) {
    ExperimentConfig cfg = load_config(c);
    const ImagePair pair = load_pair(pair_dir);
    cfg.factor = pair.factor;
    cfg.sigma_y = pair.sigma_y;
    const std::size_t h = pair.hr.height(), w = pair.hr.width();
    std::shared_ptr<const AnalyticPrior> prior;
    fs::create_directories(cfg.output_dir);
    int status = 0;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        const std::string& method = cfg.methods[m];
        try {
            if (method != "bicubic" && !prior)
                prior = make_prior(cfg, h, w);
            const auto dump = cfg.dump_iterates ? cfg.output_dir / ("iterates_" + method) : fs::path{};
            const ImageGrid est = reconstruct(cfg, method, pair.lr, h, w, prior.get(),
                                              derive_seed(cfg.seed, 2, 0, m), dump);
            write_image(cfg.output_dir / method, est);
            std::cout << method << ": done\n";
        } catch (const std::exception& e) {
            std::cerr << method << ": failed: " << e.what() << "\n";
            status = 1;
        }
    }
    return status;
}

int cmd_evaluate(const std::string& reference, const std::vector<std::string>& estimates, const std::string& out) {
    const ImageGrid ref = io::read_image(reference);
    std::vector<MetricRow> rows;
    for (const auto& path : estimates) {
        MetricRow row{0, fs::path(path).stem().string(), std::nullopt, {}};
        try {
            row.report = evaluate(ref, io::read_image(path));
        } catch (const std::exception& e) {
            row.failure = e.what();
        }
        rows.push_back(std::move(row));
    }
    const std::string csv = format_metrics_csv(rows);
    if (out.empty()) {
        std::cout << csv;
    } else {
        std::ofstream f(out, std::ios::binary);
        f << csv;
        if (!f)
            throw Error("failed writing " + out);
    }
    return 0;
}

int cmd_run(const Common& c) {
    ExperimentConfig cfg = load_config(c);
    const ExperimentResult result = run_experiment(cfg);
    std::cout << format_table_csv(result);
    std::fprintf(stderr, "wall time %.2f s, outputs in %s\n", result.wall_seconds, cfg.output_dir.string().c_str());
    for (const auto& r : result.rows)
        if (!r.report)
            return 1;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PnP-DM super-resolution toolkit"};
    app.require_subcommand(1);

    Common gen_opts, deg_opts, rec_opts, run_opts;
    std::string degrade_input, pair_dir, reference, metrics_out;
    std::vector<std::string> estimates;

    auto* gen = app.add_subcommand("generate", "Write synthetic phantoms");
    add_common(gen, gen_opts, false);

    auto* deg = app.add_subcommand("degrade", "Block-average and add noise to an HR image");
    add_common(deg, deg_opts, false);
    deg->add_option("--input", degrade_input, "HR image (.imgf32 or .pgm)")->required()->check(CLI::ExistingFile);
    deg->add_flag("--decimate", deg_opts.decimate, "Sample every f-th pixel instead of block averaging");

    auto* rec = app.add_subcommand("reconstruct", "Reconstruct a saved LR/HR pair");
    add_common(rec, rec_opts, true);
    rec->add_option("--pair", pair_dir, "Directory written by degrade")->required()->check(CLI::ExistingDirectory);

    auto* ev = app.add_subcommand("evaluate", "PSNR/SSIM/RMSE of estimates against a reference");
    ev->add_option("--reference", reference, "Ground-truth image")->required()->check(CLI::ExistingFile);
    ev->add_option("--estimate", estimates, "Estimated image(s)")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", metrics_out, "CSV output (default stdout)");

    auto* run = app.add_subcommand("run", "Full pipeline: phantoms, degradation, methods, metrics");
    add_common(run, run_opts, true);
    run->add_flag("--decimate", run_opts.decimate, "Generate measurements by decimation (mismatched operator)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen)
            return cmd_generate(gen_opts);
        if (*deg)
            return cmd_degrade(deg_opts, degrade_input);
        if (*rec)
            return cmd_reconstruct(rec_opts, pair_dir);
        if (*ev)
            return cmd_evaluate(reference, estimates, metrics_out);
        if (*run)
            return cmd_run(run_opts);
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
