#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pnpdm/error.hpp"
#include "pnpdm/experiment.hpp"
#include "pnpdm/io.hpp"
#include "pnpdm/kernels.hpp"
#include "pnpdm/phantom.hpp"
#include "support.hpp"

using namespace pnpdm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pnpdm_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Local maxima of a column profile standing out from their surroundings.
std::size_t count_peaks(const std::vector<double>& profile, double prominence) {
    std::size_t peaks = 0;
    const std::size_t n = profile.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(profile[i] >= profile[i - 1] && profile[i] > profile[i + 1]))
            continue;
        double left = profile[i], right = profile[i];
        for (std::size_t j = i; j-- > 0 && profile[j] <= profile[i];)
            left = std::min(left, profile[j]);
        for (std::size_t j = i + 1; j < n && profile[j] <= profile[i]; ++j)
            right = std::min(right, profile[j]);
        if (profile[i] - std::max(left, right) >= prominence)
            ++peaks;
    }
    return peaks;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig cfg;
    cfg.phantom.height = 16;
    cfg.phantom.width = 16;
    cfg.factor = 2;
    cfg.images = 2;
    cfg.iterations = 12;
    cfg.burn_in = 6;
    cfg.sde.steps = 15;
    cfg.prior.training_images = 40;
    cfg.prior.fit.components = 4;
    cfg.output_dir = out;
    return cfg;
}

} // namespace

TEST_CASE("flat phantom and determinism") {
    PhantomSpec flat;
    flat.kind = PhantomKind::flat;
    flat.height = 8;
    flat.width = 5;
    const auto img = generate_phantom(flat);
    for (double v : img.values())
        CHECK(v == 0.5);

    for (auto kind : {PhantomKind::layered_cornea, PhantomKind::gmm_field}) {
        PhantomSpec s;
        s.kind = kind;
        s.seed = 17;
        CHECK(generate_phantom(s) == generate_phantom(s));
        PhantomSpec t = s;
        t.seed = 18;
        CHECK_FALSE(generate_phantom(s) == generate_phantom(t));
    }
}

TEST_CASE("layered cornea shows two membrane arcs in the unit range") {
    PhantomSpec s;
    s.height = 256;
    s.width = 256;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        s.seed = seed;
        const auto img = generate_phantom(s);
        double lo = 1, hi = 0;
        for (double v : img.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo >= 0.0);
        CHECK(hi <= 1.0);
        // central column profile, lightly averaged over neighbouring columns to tame speckle
        std::vector<double> profile(256, 0.0);
        for (std::size_t r = 0; r < 256; ++r)
            for (std::size_t c = 124; c < 132; ++c)
                profile[r] += img(r, c) / 8.0;
        CHECK(count_peaks(profile, 0.15) >= 2);
    }
}

TEST_CASE("phantom spec validation") {
    PhantomSpec s;
    s.height = 0;
    CHECK_THROWS_AS(generate_phantom(s), InvalidInput);
    s.height = 8;
    s.membrane_width = 0.0;
    CHECK_THROWS_AS(generate_phantom(s), InvalidInput);
    CHECK_THROWS_AS(parse_phantom_kind("sphere"), InvalidInput);
    CHECK(parse_phantom_kind("gmm_field") == PhantomKind::gmm_field);
}

TEST_CASE("gmm fit recovers well-separated clusters") {
    std::vector<std::vector<double>> samples;
    Rng rng(3);
    for (int i = 0; i < 300; ++i) {
        const double center = i % 3 == 0 ? -5.0 : 5.0;
        samples.push_back({center + 0.5 * rng.normal(), 2.0 + 0.1 * rng.normal()});
    }
    GmmFitOptions opt;
    opt.components = 2;
    opt.variance_floor = 1e-6;
    const auto gmm = fit_gmm(samples, opt);
    REQUIRE(gmm.components().size() == 2);
    const auto& c = gmm.components();
    const auto& left = c[0].mean[0] < c[1].mean[0] ? c[0] : c[1];
    const auto& right = c[0].mean[0] < c[1].mean[0] ? c[1] : c[0];
    CHECK(left.weight == doctest::Approx(1.0 / 3));
    CHECK(left.mean[0] == doctest::Approx(-5.0).epsilon(0.03));
    CHECK(right.mean[0] == doctest::Approx(5.0).epsilon(0.03));
    CHECK(std::sqrt(left.variance[0]) == doctest::Approx(0.5).epsilon(0.2));
    CHECK(std::sqrt(right.variance[1]) == doctest::Approx(0.1).epsilon(0.2));

    // identical samples collapse to one component with the floor as variance
    std::vector<std::vector<double>> same(10, std::vector<double>{0.3, 0.3});
    opt.components = 3;
    opt.variance_floor = 1e-4;
    const auto one = fit_gmm(same, opt);
    REQUIRE(one.components().size() == 1);
    CHECK(one.components()[0].variance[0] == doctest::Approx(1e-4));
    CHECK_THROWS_AS(fit_gmm(std::vector<std::vector<double>>{}, opt), InvalidInput);
}

TEST_CASE("config parsing is strict") {
    const auto cfg = ExperimentConfig::from_json(json::parse(R"({"factor": 2, "phantom": {"height": 32, "width": 32}})"));
    CHECK(cfg.factor == 2);
    CHECK(cfg.phantom.height == 32);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"factr": 2})")), InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"phantom": {"colour": 1}})")), InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"sigma_y": -0.1})")), InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"sigma_y": "high"})")), InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"methods": ["bicubic", "unet"]})")), InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"factor": 3})")), InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"iterations": 10, "burn_in": 10})")), InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"({"annealing": {"rho0": 1, "rho_min": 2}})")),
                    InvalidInput);
    CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(R"([1, 2])")), InvalidInput);
}

TEST_CASE("config round trip and hash") {
    ExperimentConfig cfg;
    cfg.prior.kind = PriorKind::gmm;
    cfg.prior.components = {{0.5, {0.2}, {0.01}}, {0.5, {0.8}, {0.02}}};
    cfg.prior.scale = 0.7;
    cfg.sde.method = SdeMethod::euler_maruyama;
    const auto back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
    CHECK(back.hash() == cfg.hash());

    ExperimentConfig reseeded = cfg;
    reseeded.seed = 99;
    reseeded.output_dir = "elsewhere";
    CHECK(reseeded.hash() == cfg.hash());
    ExperimentConfig changed = cfg;
    changed.sigma_y = 0.05;
    CHECK(changed.hash() != cfg.hash());
}

TEST_CASE("method lists") {
    CHECK(parse_method_list("bicubic, pnpdm_vp") == std::vector<std::string>{"bicubic", "pnpdm_vp"});
    CHECK_THROWS_AS(parse_method_list("bicubic,lanczos"), InvalidInput);
    CHECK_THROWS_AS(parse_method_list(" , "), InvalidInput);
}

TEST_CASE("pairs: shapes, noiseless data and byte-identical reload") {
    PhantomSpec s;
    s.height = 256;
    s.width = 256;
    const auto hr = generate_phantom(s);
    const auto pair = build_pair(hr, 4, 0.03, 5);
    CHECK(pair.lr.height == 64);
    CHECK(pair.lr.width == 64);

    const auto exact = build_pair(hr, 4, 0.0, 5);
    const BlockAverageOperator op(4, 256, 256);
    CHECK(exact.lr.data == op.apply(hr.values()));

    const auto dir = scratch_dir("pair");
    save_pair(dir, pair);
    const auto loaded = load_pair(dir);
    const auto dir2 = scratch_dir("pair2");
    save_pair(dir2, loaded);
    for (const char* f : {"hr.imgf32", "lr.imgf32", "pair.json"})
        CHECK(slurp(dir / f) == slurp(dir2 / f));
    CHECK(loaded.factor == 4);
    CHECK(loaded.sigma_y == 0.03);
    CHECK(loaded.seed == 5);

    const auto dec = build_pair(hr, 4, 0.0, 5, true);
    CHECK(dec.decimated);
    CHECK(dec.lr.data[0] == hr(0, 0));
    CHECK(dec.lr.data[1] == hr(0, 4));
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("flat phantom is reconstructed above 40 dB by every method") {
    auto cfg = small_config("");
    cfg.phantom.kind = PhantomKind::flat;
    cfg.phantom.value = 0.5;
    cfg.sigma_y = 0.01;
    cfg.images = 1;
    cfg.iterations = 30;
    cfg.burn_in = 15;
    cfg.sde.steps = 30;
    const auto result = run_experiment(cfg);
    REQUIRE(result.rows.size() == 4);
    for (const auto& row : result.rows) {
        CAPTURE(row.method);
        CAPTURE(row.failure);
        REQUIRE(row.report);
        CHECK(row.report->psnr > 40.0);
    }
}

TEST_CASE("seeded runs write identical bytes; outputs follow the schema") {
    const auto a = scratch_dir("run_a"), b = scratch_dir("run_b");
    auto cfg = small_config(a);
    run_experiment(cfg);
    cfg.output_dir = b;
    run_experiment(cfg);
    const std::string metrics = slurp(a / "metrics.csv");
    CHECK(metrics.rfind("image_id,method,psnr,ssim,rmse\n", 0) == 0);
    CHECK(metrics == slurp(b / "metrics.csv"));
    CHECK(slurp(a / "table.csv") == slurp(b / "table.csv"));
    auto ma = json::parse(slurp(a / "manifest.json")), mb = json::parse(slurp(b / "manifest.json"));
    ma["config"].erase("output_dir");
    mb["config"].erase("output_dir");
    CHECK(ma == mb);
    for (const auto& entry : fs::directory_iterator(a / "images"))
        CHECK(slurp(entry.path()) == slurp(b / "images" / entry.path().filename()));

    const auto table = slurp(a / "table.csv");
    CHECK(table.rfind("metric,bicubic,pnpdm_edm,pnpdm_vp,pnpdm_ve\npsnr,", 0) == 0);
    const auto manifest = json::parse(slurp(a / "manifest.json"));
    CHECK(manifest.at("iterations") == 12);
    CHECK(manifest.at("images").size() == 2);
    CHECK(manifest.at("config_hash").get<std::string>().size() == 16);

    // a different master seed gives different noise and chains
    auto other = cfg;
    other.seed = 1;
    other.output_dir = scratch_dir("run_c");
    run_experiment(other);
    CHECK(slurp(other.output_dir / "metrics.csv") != metrics);
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(other.output_dir);
}

TEST_CASE("a failing method is recorded without aborting the others") {
    auto cfg = small_config(scratch_dir("fail"));
    cfg.sigma_y = 0.0; // the likelihood step needs sigma_y > 0
    cfg.images = 1;
    const auto result = run_experiment(cfg);
    for (const auto& row : result.rows) {
        if (row.method == "bicubic")
            CHECK(row.report.has_value());
        else
            CHECK(row.failure.find("sigma_y") != std::string::npos);
    }
    const auto table = slurp(cfg.output_dir / "table.csv");
    CHECK(table.find("failed:") != std::string::npos);
    CHECK(slurp(cfg.output_dir / "metrics.csv").find(",pnpdm_vp,failed:") != std::string::npos);
    fs::remove_all(cfg.output_dir);
}

TEST_CASE("reconstruction leaves the ground truth untouched") {
    auto cfg = small_config("");
    PhantomSpec s = cfg.phantom;
    const ImageGrid hr = generate_phantom(s);
    const ImageGrid copy = hr;
    const auto pair = build_pair(hr, cfg.factor, cfg.sigma_y, 3);
    const auto prior = make_prior(cfg, hr.height(), hr.width());
    for (const auto& m : known_methods())
        reconstruct(cfg, m, pair.lr, hr.height(), hr.width(), prior.get(), 1);
    CHECK(hr == copy);
    CHECK(pair.hr == copy);
}

TEST_CASE("metrics CSV formatting") {
    std::vector<MetricRow> rows{{0, "bicubic", MetricReport{INFINITY, 1.0, 0.0}, {}},
                                {1, "pnpdm_ve", std::nullopt, "bad, thing\nhappened"}};
    CHECK(format_metrics_csv(rows) ==
          "image_id,method,psnr,ssim,rmse\n0,bicubic,inf,1.000000,0.00000000\n1,pnpdm_ve,failed:bad; thing happened,,\n");
}

TEST_CASE("iterate dumps") {
    auto cfg = small_config(scratch_dir("dump"));
    cfg.images = 1;
    cfg.methods = {"pnpdm_edm"};
    cfg.dump_iterates = true;
    run_experiment(cfg);
    const auto dir = cfg.output_dir / "iterates" / "0000_pnpdm_edm";
    CHECK(fs::exists(dir / "x_0000.imgf32"));
    CHECK(fs::exists(dir / "x_0011.imgf32"));
    const auto log = slurp(dir / "iterates.csv");
    CHECK(log.rfind("q,rho,x_norm,z_norm\n0,10,", 0) == 0);
    fs::remove_all(cfg.output_dir);
}

TEST_CASE("pipeline output does not depend on the kernel backend") {
    if (!kernels::available(kernels::Backend::avx2)) {
        MESSAGE("AVX2 unavailable; skipped");
        return;
    }
    const auto before = kernels::active().backend;
    auto cfg = small_config(scratch_dir("kern_scalar"));
    cfg.images = 1;
    kernels::select(kernels::Backend::scalar);
    run_experiment(cfg);
    const auto scalar_dir = cfg.output_dir;
    cfg.output_dir = scratch_dir("kern_avx2");
    kernels::select(kernels::Backend::avx2);
    run_experiment(cfg);
    kernels::select(before);
    CHECK(slurp(scalar_dir / "metrics.csv") == slurp(cfg.output_dir / "metrics.csv"));
    for (const auto& entry : fs::directory_iterator(scalar_dir / "images"))
        CHECK(slurp(entry.path()) == slurp(cfg.output_dir / "images" / entry.path().filename()));
    fs::remove_all(scalar_dir);
    fs::remove_all(cfg.output_dir);
}
