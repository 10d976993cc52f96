#include "pnpdm/experiment.hpp"

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "pnpdm/error.hpp"
#include "pnpdm/io.hpp"
#include "pnpdm/kernels.hpp"

namespace pnpdm {

using nlohmann::json;

namespace {

// Reads an object's fields while remembering which keys were used, so leftovers can be
// reported as unknown.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object())
            throw InvalidInput(where_ + " must be a JSON object");
    }

    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key))
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw InvalidInput(path(key) + ": " + e.what());
        }
    }

    const json& at(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key()))
                throw InvalidInput("unknown key '" + path(it.key()) + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

std::vector<double> number_or_array(const json& j, const std::string& where) {
    try {
        if (j.is_number())
            return {j.get<double>()};
        return j.get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw InvalidInput(where + ": " + e.what());
    }
}

template <typename Enum, typename Parse>
void get_enum(Fields& f, const std::string& key, Enum& out, Parse parse) {
    std::string name;
    if (!f.has(key))
        return;
    f.get(key, name);
    out = parse(name);
}

std::string_view init_name(ChainInit init) { return init == ChainInit::prior ? "prior" : "bicubic"; }

ChainInit parse_init(std::string_view name) {
    if (name == "prior")
        return ChainInit::prior;
    if (name == "bicubic")
        return ChainInit::given;
    throw InvalidInput("unknown chain initialization '" + std::string(name) + "' (expected prior or bicubic)");
}

std::string_view prior_name(PriorKind k) {
    switch (k) {
    case PriorKind::gaussian: return "gaussian";
    case PriorKind::gmm: return "gmm";
    case PriorKind::gmm_fit: return "gmm_fit";
    }
    return "?";
}

PriorKind parse_prior_kind(std::string_view name) {
    if (name == "gaussian")
        return PriorKind::gaussian;
    if (name == "gmm")
        return PriorKind::gmm;
    if (name == "gmm_fit")
        return PriorKind::gmm_fit;
    throw InvalidInput("unknown prior kind '" + std::string(name) + "'");
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

std::size_t method_index(const std::string& method) {
    const auto& names = known_methods();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == method)
            return i;
    throw InvalidInput("unknown method '" + method + "'");
}

// Seed streams derived from the master seed.
enum Stream : std::uint64_t { noise_stream = 1, method_stream = 2 };

} // namespace

// ---------------------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    Fields top(j, "config");

    if (top.has("phantom")) {
        Fields p(top.at("phantom"), "config.phantom");
        get_enum(p, "kind", c.phantom.kind, parse_phantom_kind);
        p.get("height", c.phantom.height);
        p.get("width", c.phantom.width);
        p.get("seed", c.phantom.seed);
        p.get("value", c.phantom.value);
        p.get("jitter", c.phantom.jitter);
        p.get("speckle", c.phantom.speckle);
        p.get("membrane_width", c.phantom.membrane_width);
        p.get("blobs", c.phantom.blobs);
        p.finish();
    }
    top.get("images", c.images);
    if (top.has("input")) {
        std::string path;
        top.get("input", path);
        c.input = path;
    }
    top.get("factor", c.factor);
    top.get("sigma_y", c.sigma_y);
    top.get("decimate", c.decimate);

    if (top.has("prior")) {
        Fields p(top.at("prior"), "config.prior");
        get_enum(p, "kind", c.prior.kind, parse_prior_kind);
        if (p.has("mean"))
            c.prior.mean = number_or_array(p.at("mean"), p.path("mean"));
        if (p.has("variance"))
            c.prior.variance = number_or_array(p.at("variance"), p.path("variance"));
        if (p.has("components")) {
            const json& arr = p.at("components");
            if (!arr.is_array())
                throw InvalidInput("config.prior.components must be an array");
            c.prior.components.clear();
            for (std::size_t k = 0; k < arr.size(); ++k) {
                Fields cf(arr[k], "config.prior.components[" + std::to_string(k) + "]");
                GmmComponent comp;
                cf.get("weight", comp.weight);
                if (cf.has("mean"))
                    comp.mean = number_or_array(cf.at("mean"), cf.path("mean"));
                if (cf.has("variance"))
                    comp.variance = number_or_array(cf.at("variance"), cf.path("variance"));
                cf.finish();
                c.prior.components.push_back(std::move(comp));
            }
        }
        if (p.has("fit")) {
            Fields f(p.at("fit"), "config.prior.fit");
            f.get("components", c.prior.fit.components);
            f.get("iterations", c.prior.fit.iterations);
            f.get("variance_floor", c.prior.fit.variance_floor);
            f.get("seed", c.prior.fit.seed);
            f.finish();
        }
        p.get("training_images", c.prior.training_images);
        p.get("training_seed", c.prior.training_seed);
        if (p.has("scale")) {
            double s = 0.0;
            p.get("scale", s);
            c.prior.scale = s;
        }
        p.finish();
    }

    if (top.has("methods")) {
        std::vector<std::string> m;
        top.get("methods", m);
        c.methods = m;
    }
    if (top.has("annealing")) {
        Fields a(top.at("annealing"), "config.annealing");
        a.get("rho0", c.annealing.rho0);
        a.get("rho_min", c.annealing.rho_min);
        a.get("alpha", c.annealing.alpha);
        a.finish();
    }
    top.get("iterations", c.iterations);
    top.get("burn_in", c.burn_in);
    top.get("chains", c.chains);
    get_enum(top, "init", c.init, parse_init);
    top.get("init_sigma_max", c.init_sigma_max);
    if (top.has("sde")) {
        Fields s(top.at("sde"), "config.sde");
        s.get("steps", c.sde.steps);
        s.get("step_exponent", c.sde.step_exponent);
        s.get("sigma_terminal", c.sde.sigma_terminal);
        get_enum(s, "method", c.sde.method, parse_sde_method);
        s.finish();
    }
    if (top.has("vp")) {
        Fields s(top.at("vp"), "config.vp");
        s.get("beta_min", c.vp_beta_min);
        s.get("beta_max", c.vp_beta_max);
        s.finish();
    }
    if (top.has("ve")) {
        Fields s(top.at("ve"), "config.ve");
        s.get("sigma_min", c.ve_sigma_min);
        s.get("sigma_max", c.ve_sigma_max);
        s.finish();
    }
    top.get("seed", c.seed);
    if (top.has("output_dir")) {
        std::string out;
        top.get("output_dir", out);
        c.output_dir = out;
    }
    top.get("dump_iterates", c.dump_iterates);
    top.finish();

    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidInput("config " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    json comps = json::array();
    for (const auto& c : prior.components)
        comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
    json prior_j = {{"kind", prior_name(prior.kind)},
                    {"mean", prior.mean},
                    {"variance", prior.variance},
                    {"components", comps},
                    {"fit",
                     {{"components", prior.fit.components},
                      {"iterations", prior.fit.iterations},
                      {"variance_floor", prior.fit.variance_floor},
                      {"seed", prior.fit.seed}}},
                    {"training_images", prior.training_images},
                    {"training_seed", prior.training_seed}};
    if (prior.scale)
        prior_j["scale"] = *prior.scale;
    json j = {{"phantom",
               {{"kind", to_string(phantom.kind)},
                {"height", phantom.height},
                {"width", phantom.width},
                {"seed", phantom.seed},
                {"value", phantom.value},
                {"jitter", phantom.jitter},
                {"speckle", phantom.speckle},
                {"membrane_width", phantom.membrane_width},
                {"blobs", phantom.blobs}}},
              {"images", images},
              {"factor", factor},
              {"sigma_y", sigma_y},
              {"decimate", decimate},
              {"prior", prior_j},
              {"methods", methods},
              {"annealing", {{"rho0", annealing.rho0}, {"rho_min", annealing.rho_min}, {"alpha", annealing.alpha}}},
              {"iterations", iterations},
              {"burn_in", burn_in},
              {"chains", chains},
              {"init", init_name(init)},
              {"init_sigma_max", init_sigma_max},
              {"sde",
               {{"steps", sde.steps},
                {"step_exponent", sde.step_exponent},
                {"sigma_terminal", sde.sigma_terminal},
                {"method", to_string(sde.method)}}},
              {"vp", {{"beta_min", vp_beta_min}, {"beta_max", vp_beta_max}}},
              {"ve", {{"sigma_min", ve_sigma_min}, {"sigma_max", ve_sigma_max}}},
              {"seed", seed},
              {"output_dir", output_dir.string()},
              {"dump_iterates", dump_iterates}};
    if (input)
        j["input"] = input->string();
    return j;
}

std::uint64_t ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("seed");
    j.erase("output_dir");
    return fnv1a(j.dump());
}

void ExperimentConfig::validate() const {
    if (!input)
        phantom.validate();
    if (images == 0)
        throw InvalidInput("images must be >= 1");
    if (input && images != 1)
        throw InvalidInput("an input image implies images = 1");
    if (factor == 0)
        throw InvalidInput("factor must be >= 1");
    if (!input && (phantom.height % factor != 0 || phantom.width % factor != 0))
        throw InvalidInput("phantom dimensions must be divisible by the factor");
    if (!(sigma_y >= 0.0) || !std::isfinite(sigma_y))
        throw InvalidInput("sigma_y must be finite and >= 0");
    if (methods.empty())
        throw InvalidInput("no methods selected");
    for (const auto& m : methods)
        method_index(m);
    annealing.validate();
    sde.validate();
    if (!(iterations > burn_in))
        throw InvalidInput("iterations must exceed burn_in");
    if (chains == 0)
        throw InvalidInput("chains must be >= 1");
    if (!(init_sigma_max > 0.0) || !std::isfinite(init_sigma_max))
        throw InvalidInput("init_sigma_max must be positive");
    if (!(vp_beta_min > 0.0) || !(vp_beta_max > vp_beta_min) || !std::isfinite(vp_beta_max))
        throw InvalidInput("VP schedule needs 0 < beta_min < beta_max");
    if (!(ve_sigma_min > 0.0) || !(ve_sigma_max > ve_sigma_min) || !std::isfinite(ve_sigma_max))
        throw InvalidInput("VE schedule needs 0 < sigma_min < sigma_max");
    if (prior.scale && (!(*prior.scale >= 0.0) || !std::isfinite(*prior.scale)))
        throw InvalidInput("prior scale must be finite and >= 0");
    if (prior.kind == PriorKind::gaussian) {
        if (prior.mean.empty() || prior.variance.empty())
            throw InvalidInput("gaussian prior needs mean and variance");
        for (double v : prior.variance)
            if (!(v > 0.0) || !std::isfinite(v))
                throw InvalidInput("prior variances must be positive");
        require_finite(prior.mean, "prior mean");
    }
    if (prior.kind == PriorKind::gmm && prior.components.empty())
        throw InvalidInput("gmm prior needs components");
    if (prior.kind == PriorKind::gmm_fit &&
        (prior.training_images == 0 || prior.fit.components == 0 || prior.fit.components > prior.training_images))
        throw InvalidInput("gmm_fit needs 1 <= fit.components <= training_images");
}

std::vector<std::string> parse_method_list(const std::string& comma_list) {
    std::vector<std::string> out;
    std::stringstream ss(comma_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos)
            continue;
        item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
        method_index(item);
        out.push_back(item);
    }
    if (out.empty())
        throw InvalidInput("empty method list");
    return out;
}

// ---------------------------------------------------------------------------------------

ImagePair build_pair(const ImageGrid& hr, std::size_t factor, double sigma_y, std::uint64_t seed, bool decimate) {
    ImagePair pair{hr, MeasurementVector(std::vector<double>{}), factor, sigma_y, seed, decimate};
    BlockAverageOperator op(factor, hr.height(), hr.width());
    const NoiseModel noise(sigma_y);
    if (!decimate) {
        pair.lr = pnpdm::degrade(hr, op, noise, seed);
        return pair;
    }
    MeasurementVector clean = pnpdm::decimate(hr, factor);
    const auto noisy = pnpdm::degrade(clean.data, BlockAverageOperator(1, clean.height, clean.width), noise, seed);
    pair.lr = MeasurementVector(clean.height, clean.width, noisy);
    return pair;
}

void save_pair(const std::filesystem::path& dir, const ImagePair& pair) {
    std::filesystem::create_directories(dir);
    io::write_raster(dir / "hr.imgf32", pair.hr);
    io::write_raster(dir / "lr.imgf32", pair.lr.as_image());
    const json manifest = {{"factor", pair.factor},
                           {"sigma_y", pair.sigma_y},
                           {"seed", pair.seed},
                           {"decimate", pair.decimated},
                           {"hr", {{"height", pair.hr.height()}, {"width", pair.hr.width()}}},
                           {"lr", {{"height", pair.lr.height}, {"width", pair.lr.width}}}};
    std::ofstream out(dir / "pair.json");
    out << manifest.dump(2) << '\n';
    if (!out)
        throw Error("failed writing " + (dir / "pair.json").string());
}

ImagePair load_pair(const std::filesystem::path& dir) {
    std::ifstream in(dir / "pair.json");
    if (!in)
        throw InvalidInput("cannot open " + (dir / "pair.json").string());
    json j;
    try {
        j = json::parse(in);
        ImagePair pair{io::read_raster(dir / "hr.imgf32"), MeasurementVector::from_image(io::read_raster(dir / "lr.imgf32")),
                       j.at("factor").get<std::size_t>(), j.at("sigma_y").get<double>(),
                       j.at("seed").get<std::uint64_t>(), j.at("decimate").get<bool>()};
        if (pair.factor == 0 || pair.hr.height() != pair.lr.height * pair.factor ||
            pair.hr.width() != pair.lr.width * pair.factor)
            throw InvalidInput("pair in " + dir.string() + " has inconsistent dimensions");
        return pair;
    } catch (const json::exception& e) {
        throw InvalidInput("pair manifest: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------------------------------

namespace {

std::vector<double> broadcast(const std::vector<double>& v, std::size_t n, const char* what) {
    if (v.size() == 1)
        return std::vector<double>(n, v.front());
    if (v.size() != n)
        throw InvalidInput(std::string(what) + " has " + std::to_string(v.size()) + " entries, expected 1 or " +
                           std::to_string(n));
    return v;
}

} // namespace

std::shared_ptr<const AnalyticPrior> make_prior(const ExperimentConfig& cfg, std::size_t height, std::size_t width) {
    const std::size_t n = height * width;
    switch (cfg.prior.kind) {
    case PriorKind::gaussian:
        return std::make_shared<GaussianPrior>(broadcast(cfg.prior.mean, n, "prior mean"),
                                               broadcast(cfg.prior.variance, n, "prior variance"));
    case PriorKind::gmm: {
        auto comps = cfg.prior.components;
        for (auto& c : comps) {
            c.mean = broadcast(c.mean, n, "component mean");
            c.variance = broadcast(c.variance, n, "component variance");
        }
        return std::make_shared<GmmPrior>(std::move(comps));
    }
    case PriorKind::gmm_fit: {
        PhantomSpec spec = cfg.phantom;
        spec.height = height;
        spec.width = width;
        std::vector<std::vector<double>> train;
        train.reserve(cfg.prior.training_images);
        for (std::size_t i = 0; i < cfg.prior.training_images; ++i) {
            spec.seed = derive_seed(cfg.prior.training_seed, i);
            train.push_back(generate_phantom(spec).values());
        }
        return std::make_shared<GmmPrior>(fit_gmm(train, cfg.prior.fit));
    }
    }
    throw InvalidInput("unknown prior kind");
}

DiffusionSchedule make_schedule(const ExperimentConfig& cfg, ScheduleKind kind) {
    switch (kind) {
    case ScheduleKind::edm: return DiffusionSchedule::edm();
    case ScheduleKind::vp: return DiffusionSchedule::vp(cfg.vp_beta_min, cfg.vp_beta_max);
    case ScheduleKind::ve: return DiffusionSchedule::ve(cfg.ve_sigma_min, cfg.ve_sigma_max);
    }
    throw InvalidInput("unknown schedule");
}

ImageGrid reconstruct(const ExperimentConfig& cfg, const std::string& method, const MeasurementVector& y,
                      std::size_t hr_height, std::size_t hr_width, const AnalyticPrior* prior, std::uint64_t seed,
                      const std::filesystem::path& dump_dir) {
    method_index(method);
    if (!y.shaped() || y.height * cfg.factor != hr_height || y.width * cfg.factor != hr_width)
        throw InvalidInput("measurement shape does not match the HR shape and factor");
    if (method == "bicubic")
        return bicubic_upsample(y.as_image(), cfg.factor);

    if (!prior)
        throw InvalidInput(method + " needs a prior");
    const ScheduleKind kind = parse_schedule_kind(method.substr(std::string("pnpdm_").size()));
    const BlockAverageOperator op(cfg.factor, hr_height, hr_width);
    SamplerOptions options;
    options.iterations = cfg.iterations;
    options.burn_in = cfg.burn_in;
    options.init = cfg.init;
    options.init_sigma_max = cfg.init_sigma_max;
    options.prior_scale = cfg.prior.scale.value_or(prior->scale());
    options.keep_samples = false;
    if (cfg.init == ChainInit::given)
        options.initial_state = bicubic_upsample(y.as_image(), cfg.factor).values();

    const PnpDmSampler sampler(op, y.data, NoiseModel(cfg.sigma_y), *prior, make_schedule(cfg, kind), cfg.annealing,
                               cfg.sde, options);

    ChainResult result;
    if (cfg.chains > 1) {
        result = sampler.run_chains(cfg.chains, seed);
    } else if (cfg.dump_iterates && !dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        std::ofstream log(dump_dir / "iterates.csv");
        log << "q,rho,x_norm,z_norm\n";
        char line[128];
        result = sampler.run(derive_seed(seed, 0), [&](const SamplerState& s) {
            const double xn = std::sqrt(kernels::dot(s.x, s.x)), zn = std::sqrt(kernels::dot(s.z, s.z));
            std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", s.q, s.rho, xn, zn);
            log << line;
            char name[32];
            std::snprintf(name, sizeof name, "x_%04zu.imgf32", s.q);
            io::write_raster(dump_dir / name, ImageGrid(hr_height, hr_width, std::vector<double>(s.x.begin(), s.x.end())));
        });
    } else {
        result = sampler.run(derive_seed(seed, 0));
    }
    return posterior_mean_estimate(result.stats, hr_height, hr_width);
}

// ---------------------------------------------------------------------------------------

std::optional<MetricReport> ExperimentResult::mean_report(const std::string& method) const {
    MetricReport sum{0.0, 0.0, 0.0};
    std::size_t count = 0;
    for (const auto& r : rows) {
        if (r.method != method)
            continue;
        if (!r.report)
            return std::nullopt;
        sum.psnr += r.report->psnr;
        sum.ssim += r.report->ssim;
        sum.rmse += r.report->rmse;
        ++count;
    }
    if (count == 0)
        return std::nullopt;
    const double n = static_cast<double>(count);
    return MetricReport{sum.psnr / n, sum.ssim / n, sum.rmse / n};
}

namespace {

std::string fmt(double v, const char* spec) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (std::isnan(v))
        return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string sanitize(std::string reason) {
    for (auto& ch : reason)
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"')
            ch = ch == ',' ? ';' : ' ';
    return reason;
}

} // namespace

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
    std::string out = "image_id,method,psnr,ssim,rmse\n";
    for (const auto& r : rows) {
        out += std::to_string(r.image_id) + "," + r.method + ",";
        if (r.report)
            out += fmt(r.report->psnr, "%.6f") + "," + fmt(r.report->ssim, "%.6f") + "," + fmt(r.report->rmse, "%.8f");
        else
            out += "failed:" + sanitize(r.failure) + ",,";
        out += "\n";
    }
    return out;
}

std::string format_table_csv(const ExperimentResult& result) {
    std::string out = "metric";
    for (const auto& m : result.methods)
        out += "," + m;
    out += "\n";
    const char* names[] = {"psnr", "ssim", "rmse"};
    for (int k = 0; k < 3; ++k) {
        out += names[k];
        for (const auto& m : result.methods) {
            out += ",";
            const auto rep = result.mean_report(m);
            if (rep) {
                const double v = k == 0 ? rep->psnr : k == 1 ? rep->ssim : rep->rmse;
                out += fmt(v, k == 2 ? "%.8f" : "%.6f");
                continue;
            }
            std::string reason = "no rows";
            for (const auto& r : result.rows)
                if (r.method == m && !r.report) {
                    reason = r.failure;
                    break;
                }
            out += "failed:" + sanitize(reason);
        }
        out += "\n";
    }
    return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out)
        throw Error("failed writing " + path.string());
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const bool write = !cfg.output_dir.empty();
    if (write)
        std::filesystem::create_directories(cfg.output_dir / "images");

    std::vector<ImageGrid> truths;
    std::vector<std::uint64_t> phantom_seeds;
    if (cfg.input) {
        truths.push_back(io::read_image(*cfg.input));
        phantom_seeds.push_back(0);
    } else {
        for (std::size_t i = 0; i < cfg.images; ++i) {
            PhantomSpec spec = cfg.phantom;
            spec.seed = cfg.phantom.seed + i;
            truths.push_back(generate_phantom(spec));
            phantom_seeds.push_back(spec.seed);
        }
    }
    const std::size_t h = truths.front().height(), w = truths.front().width();
    if (h % cfg.factor != 0 || w % cfg.factor != 0)
        throw InvalidInput("image dimensions must be divisible by the factor");

    std::shared_ptr<const AnalyticPrior> prior;
    std::string prior_failure;
    for (const auto& m : cfg.methods)
        if (m != "bicubic" && !prior && prior_failure.empty()) {
            try {
                prior = make_prior(cfg, h, w);
            } catch (const std::exception& e) {
                prior_failure = std::string("prior: ") + e.what();
            }
        }

    ExperimentResult result;
    result.methods = cfg.methods;
    json image_log = json::array();
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const ImageGrid& hr = truths[i];
        const std::uint64_t noise_seed = derive_seed(cfg.seed, noise_stream, i);
        const ImagePair pair = build_pair(hr, cfg.factor, cfg.sigma_y, noise_seed, cfg.decimate);
        char id[32];
        std::snprintf(id, sizeof id, "%04zu", i);
        if (write) {
            save_pair(cfg.output_dir / "pairs" / id, pair);
            io::write_pgm(cfg.output_dir / "images" / (std::string(id) + "_hr.pgm"), hr);
            io::write_pgm(cfg.output_dir / "images" / (std::string(id) + "_lr.pgm"), pair.lr.as_image());
        }
        json seeds = json::object();
        for (const auto& method : cfg.methods) {
            const std::uint64_t seed = derive_seed(cfg.seed, method_stream, i, method_index(method));
            seeds[method] = seed;
            MetricRow row{i, method, std::nullopt, {}};
            try {
                if (method != "bicubic" && !prior)
                    throw InvalidInput(prior_failure);
                const auto dump = write && cfg.dump_iterates
                                      ? cfg.output_dir / "iterates" / (std::string(id) + "_" + method)
                                      : std::filesystem::path{};
                const ImageGrid est = reconstruct(cfg, method, pair.lr, h, w, prior.get(), seed, dump);
                row.report = evaluate(hr, est);
                if (write) {
                    const auto stem = cfg.output_dir / "images" / (std::string(id) + "_" + method);
                    io::write_raster(stem.string() + ".imgf32", est);
                    io::write_pgm(stem.string() + ".pgm", est);
                }
            } catch (const std::exception& e) {
                row.failure = e.what();
            }
            result.rows.push_back(std::move(row));
        }
        image_log.push_back({{"id", i}, {"phantom_seed", phantom_seeds[i]}, {"noise_seed", noise_seed},
                             {"method_seeds", seeds}});
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (write) {
        write_text(cfg.output_dir / "metrics.csv", format_metrics_csv(result.rows));
        write_text(cfg.output_dir / "table.csv", format_table_csv(result));
        // Wall time is the only nondeterministic output, so it lives apart from the manifest.
        const json manifest = {{"config", cfg.to_json()},
                               {"config_hash", hex64(cfg.hash())},
                               {"seed", cfg.seed},
                               {"iterations", cfg.iterations},
                               {"burn_in", cfg.burn_in},
                               {"chains", cfg.chains},
                               {"kernels", std::string(kernels::active().name)},
                               {"images", image_log}};
        write_text(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
        write_text(cfg.output_dir / "timing.json",
                   json{{"wall_seconds", result.wall_seconds}}.dump(2) + "\n");
    }
    return result;
}

} // namespace pnpdm
