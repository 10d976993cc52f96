#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnpdm/image.hpp"
#include "pnpdm/linear_operator.hpp"
#include "pnpdm/metrics.hpp"
#include "pnpdm/phantom.hpp"
#include "pnpdm/reverse_sde.hpp"
#include "pnpdm/sampler.hpp"
#include "pnpdm/schedule.hpp"

namespace pnpdm {

enum class PriorKind { gaussian, gmm, gmm_fit };

struct PriorSpec {
    PriorKind kind = PriorKind::gmm_fit;
    // gaussian: one entry broadcasts over all pixels
    std::vector<double> mean{0.5};
    std::vector<double> variance{0.05};
    // gmm
    std::vector<GmmComponent> components;
    // gmm_fit: trained on phantoms drawn from the experiment's phantom family
    GmmFitOptions fit;
    std::size_t training_images = 400;
    std::uint64_t training_seed = 1000;
    /// Overrides the prior's own scale for the unconditional initial draw.
    std::optional<double> scale;
};

struct ExperimentConfig {
    PhantomSpec phantom;
    std::size_t images = 1;
    std::optional<std::filesystem::path> input;
    std::size_t factor = 4;
    double sigma_y = 0.03;
    bool decimate = false;
    PriorSpec prior;
    std::vector<std::string> methods{"bicubic", "pnpdm_edm", "pnpdm_vp", "pnpdm_ve"};
    AnnealingSchedule annealing;
    std::size_t iterations = 100;
    std::size_t burn_in = 50;
    std::size_t chains = 1;
    ChainInit init = ChainInit::prior;
    double init_sigma_max = 80.0;
    ReverseSdeConfig sde;
    double vp_beta_min = 0.1;
    double vp_beta_max = 20.0;
    double ve_sigma_min = 1e-4;
    double ve_sigma_max = 100.0;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    bool dump_iterates = false;

    /// Strict: unknown keys and out-of-domain values throw InvalidInput.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    /// FNV-1a 64 of the canonical JSON (seed and output_dir excluded).
    std::uint64_t hash() const;
    void validate() const;
};

inline const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> names{"bicubic", "pnpdm_edm", "pnpdm_vp", "pnpdm_ve"};
    return names;
}

std::vector<std::string> parse_method_list(const std::string& comma_list);

/// Low-resolution measurement paired with its ground truth.
struct ImagePair {
    ImageGrid hr;
    MeasurementVector lr;
    std::size_t factor = 0;
    double sigma_y = 0.0;
    std::uint64_t seed = 0;
    bool decimated = false;
};

ImagePair build_pair(const ImageGrid& hr, std::size_t factor, double sigma_y, std::uint64_t seed,
                     bool decimate = false);
/// Writes hr.imgf32, lr.imgf32 and pair.json into `dir`.
void save_pair(const std::filesystem::path& dir, const ImagePair& pair);
ImagePair load_pair(const std::filesystem::path& dir);

/// The prior described by `cfg.prior` for images of the given shape.
std::shared_ptr<const AnalyticPrior> make_prior(const ExperimentConfig& cfg, std::size_t height, std::size_t width);
DiffusionSchedule make_schedule(const ExperimentConfig& cfg, ScheduleKind kind);

/// Reconstructs one measurement with `method`; x_lr is the measurement as an image.
ImageGrid reconstruct(const ExperimentConfig& cfg, const std::string& method, const MeasurementVector& y,
                      std::size_t hr_height, std::size_t hr_width, const AnalyticPrior* prior, std::uint64_t seed,
                      const std::filesystem::path& dump_dir = {});

struct MetricRow {
    std::size_t image_id = 0;
    std::string method;
    std::optional<MetricReport> report;
    std::string failure;
};

struct ExperimentResult {
    std::vector<MetricRow> rows;
    std::vector<std::string> methods;
    double wall_seconds = 0.0;

    /// Mean over images of each metric for `method`; nullopt if any image failed.
    std::optional<MetricReport> mean_report(const std::string& method) const;
};

/// Full pipeline. With a non-empty output_dir writes images/, metrics.csv, table.csv and
/// manifest.json there.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::string format_metrics_csv(const std::vector<MetricRow>& rows);
std::string format_table_csv(const ExperimentResult& result);

} // namespace pnpdm
