#include "pnpdm/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pnpdm/error.hpp"
#include "pnpdm/rng.hpp"

namespace pnpdm {

std::string_view to_string(PhantomKind kind) {
    switch (kind) {
    case PhantomKind::layered_cornea: return "layered_cornea";
    case PhantomKind::gmm_field: return "gmm_field";
    case PhantomKind::flat: return "flat";
    }
    return "?";
}

PhantomKind parse_phantom_kind(std::string_view name) {
    if (name == "layered_cornea")
        return PhantomKind::layered_cornea;
    if (name == "gmm_field")
        return PhantomKind::gmm_field;
    if (name == "flat")
        return PhantomKind::flat;
    throw InvalidInput("unknown phantom kind '" + std::string(name) + "'");
}

void PhantomSpec::validate() const {
    if (height == 0 || width == 0)
        throw InvalidInput("phantom dimensions must be positive");
    if (!(value >= 0.0 && value <= 1.0))
        throw InvalidInput("flat phantom value must lie in [0,1]");
    if (!(jitter >= 0.0) || !std::isfinite(jitter))
        throw InvalidInput("phantom jitter must be finite and >= 0");
    if (!(speckle >= 0.0) || !std::isfinite(speckle))
        throw InvalidInput("phantom speckle must be finite and >= 0");
    if (!(membrane_width > 0.0) || !std::isfinite(membrane_width))
        throw InvalidInput("membrane width must be positive");
}

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
    // Half-sample symmetric extension: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
    const std::ptrdiff_t period = 2 * n;
    i %= period;
    if (i < 0)
        i += period;
    return static_cast<std::size_t>(i < n ? i : period - 1 - i);
}

std::vector<double> gaussian_blur(const std::vector<double>& img, std::size_t h, std::size_t w, double sigma) {
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
        const double t = static_cast<double>(j) / sigma;
        total += k[static_cast<std::size_t>(j + radius)] = std::exp(-0.5 * t * t);
    }
    for (auto& v : k)
        v /= total;
    const auto ih = static_cast<std::ptrdiff_t>(h), iw = static_cast<std::ptrdiff_t>(w);
    std::vector<double> tmp(h * w), out(h * w);
    for (std::ptrdiff_t r = 0; r < ih; ++r)
        for (std::ptrdiff_t c = 0; c < iw; ++c) {
            double s = 0.0;
            for (std::ptrdiff_t j = -radius; j <= radius; ++j)
                s += k[static_cast<std::size_t>(j + radius)] * img[r * iw + reflect_index(c + j, iw)];
            tmp[r * iw + c] = s;
        }
    for (std::ptrdiff_t r = 0; r < ih; ++r)
        for (std::ptrdiff_t c = 0; c < iw; ++c) {
            double s = 0.0;
            for (std::ptrdiff_t j = -radius; j <= radius; ++j)
                s += k[static_cast<std::size_t>(j + radius)] * tmp[reflect_index(r + j, ih) * iw + c];
            out[r * iw + c] = s;
        }
    return out;
}

ImageGrid layered_cornea(const PhantomSpec& spec) {
    Rng rng(spec.seed);
    const double jit = spec.jitter, mw = spec.membrane_width;
    const double x0 = 0.5 + jit * rng.uniform(-0.05, 0.05);
    const double y0 = 0.3 + jit * rng.uniform(-0.06, 0.06);
    const double curv = 1.0 + jit * rng.uniform(-0.3, 0.3);
    const double thick = 0.3 + jit * rng.uniform(-0.05, 0.05);
    const double stroma_level = rng.uniform(0.25, 0.4);
    const double front_width = mw * rng.uniform(0.8, 1.5);
    const double front_amp = rng.uniform(0.5, 0.7);
    const double back_width = mw * rng.uniform(0.8, 1.5);
    const double back_amp = rng.uniform(0.4, 0.6);

    const std::size_t h = spec.height, w = spec.width;
    std::vector<double> img(h * w);
    for (std::size_t r = 0; r < h; ++r) {
        const double yy = static_cast<double>(r) / static_cast<double>(h);
        for (std::size_t c = 0; c < w; ++c) {
            const double xx = static_cast<double>(c) / static_cast<double>(w);
            const double dx = xx - x0;
            const double front = y0 + curv * dx * dx;
            const double back = front + thick * (1.0 - 1.2 * dx * dx);
            const double tf = (yy - front) / front_width, tb = (yy - back) / back_width;
            img[r * w + c] = 0.06 + stroma_level * sigmoid((yy - front) / mw) * (1.0 - sigmoid((yy - back) / mw)) +
                             front_amp * std::exp(-0.5 * tf * tf) + back_amp * std::exp(-0.5 * tb * tb);
        }
    }

    if (spec.speckle > 0.0) {
        std::vector<double> field(h * w);
        rng.fill_normal(field);
        field = gaussian_blur(field, h, w, 0.8 * static_cast<double>(h) / 64.0);
        double sq = 0.0, mean = 0.0;
        for (double v : field)
            mean += v;
        mean /= static_cast<double>(field.size());
        for (double v : field)
            sq += (v - mean) * (v - mean);
        const double sd = std::sqrt(sq / static_cast<double>(field.size()));
        const double s = spec.speckle;
        for (std::size_t i = 0; i < img.size(); ++i)
            img[i] *= std::exp(s * field[i] / sd - 0.5 * s * s);
    }
    for (auto& v : img)
        v = std::clamp(v, 0.0, 1.0);
    return ImageGrid(h, w, std::move(img));
}

ImageGrid gmm_field(const PhantomSpec& spec) {
    Rng rng(spec.seed);
    const std::size_t h = spec.height, w = spec.width;
    std::vector<double> img(h * w, 0.1);
    for (std::size_t b = 0; b < spec.blobs; ++b) {
        const double amp = rng.uniform(0.2, 0.6);
        const double cy = rng.uniform(), cx = rng.uniform();
        const double width = rng.uniform(0.05, 0.15);
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c) {
                const double dy = (static_cast<double>(r) + 0.5) / static_cast<double>(h) - cy;
                const double dx = (static_cast<double>(c) + 0.5) / static_cast<double>(w) - cx;
                img[r * w + c] += amp * std::exp(-0.5 * (dx * dx + dy * dy) / (width * width));
            }
    }
    for (auto& v : img)
        v = std::clamp(v, 0.0, 1.0);
    return ImageGrid(h, w, std::move(img));
}

} // namespace

ImageGrid generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    switch (spec.kind) {
    case PhantomKind::layered_cornea: return layered_cornea(spec);
    case PhantomKind::gmm_field: return gmm_field(spec);
    case PhantomKind::flat: return ImageGrid(spec.height, spec.width, spec.value);
    }
    throw InvalidInput("unknown phantom kind");
}

// ---------------------------------------------------------------------------------------

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace

GmmPrior fit_gmm(std::span<const std::vector<double>> samples, const GmmFitOptions& options) {
    const std::size_t n = samples.size();
    if (n == 0)
        throw InvalidInput("fit_gmm: no training samples");
    if (options.components == 0 || options.components > n)
        throw InvalidInput("fit_gmm: need 1 <= components <= number of samples");
    if (!(options.variance_floor > 0.0))
        throw InvalidInput("fit_gmm: variance floor must be positive");
    const std::size_t dim = samples.front().size();
    for (const auto& s : samples) {
        if (s.size() != dim || dim == 0)
            throw InvalidInput("fit_gmm: samples must share a nonzero dimension");
        require_finite(s, "training sample");
    }
    const std::size_t k_count = options.components;

    // k-means++ seeding.
    Rng rng(options.seed);
    std::vector<std::vector<double>> centers;
    centers.push_back(samples[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n]);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (centers.size() < k_count) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], sq_dist(samples[i], centers.back()));
            total += nearest[i];
        }
        std::size_t pick = n - 1;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                u -= nearest[i];
                if (u < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n;
        }
        centers.push_back(samples[pick]);
    }

    std::vector<std::size_t> label(n, 0);
    for (std::size_t it = 0; it < options.iterations; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < k_count; ++k) {
                const double d = sq_dist(samples[i], centers[k]);
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            changed |= (label[i] != best) || it == 0;
            label[i] = best;
        }
        std::vector<std::vector<double>> sums(k_count, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k_count, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[label[i]];
            for (std::size_t j = 0; j < dim; ++j)
                sums[label[i]][j] += samples[i][j];
        }
        for (std::size_t k = 0; k < k_count; ++k)
            if (counts[k] > 0)
                for (std::size_t j = 0; j < dim; ++j)
                    centers[k][j] = sums[k][j] / static_cast<double>(counts[k]);
        if (!changed)
            break;
    }

    // Pooled per-coordinate variance, used for singleton clusters.
    std::vector<double> pooled_mean(dim, 0.0), pooled_var(dim, 0.0);
    for (const auto& s : samples)
        for (std::size_t j = 0; j < dim; ++j)
            pooled_mean[j] += s[j] / static_cast<double>(n);
    for (const auto& s : samples)
        for (std::size_t j = 0; j < dim; ++j)
            pooled_var[j] += (s[j] - pooled_mean[j]) * (s[j] - pooled_mean[j]) / static_cast<double>(n);

    std::vector<GmmComponent> comps;
    for (std::size_t k = 0; k < k_count; ++k) {
        std::vector<double> mean(dim, 0.0), var(dim, 0.0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (label[i] != k)
                continue;
            ++count;
            for (std::size_t j = 0; j < dim; ++j)
                mean[j] += samples[i][j];
        }
        if (count == 0)
            continue;
        for (auto& v : mean)
            v /= static_cast<double>(count);
        if (count == 1) {
            var = pooled_var;
        } else {
            for (std::size_t i = 0; i < n; ++i)
                if (label[i] == k)
                    for (std::size_t j = 0; j < dim; ++j)
                        var[j] += (samples[i][j] - mean[j]) * (samples[i][j] - mean[j]);
            for (auto& v : var)
                v /= static_cast<double>(count);
        }
        for (auto& v : var)
            v += options.variance_floor;
        comps.push_back({static_cast<double>(count) / static_cast<double>(n), std::move(mean), std::move(var)});
    }
    return GmmPrior(std::move(comps));
}

} // namespace pnpdm
