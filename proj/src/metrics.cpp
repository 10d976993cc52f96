#include "pnpdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pnpdm/error.hpp"

namespace pnpdm {

namespace {

void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
    if (!a.same_shape(b))
        throw InvalidInput(std::string(what) + ": images differ in shape (" + std::to_string(a.height()) + "x" +
                           std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                           std::to_string(b.width()) + ")");
}

// Neumaier-compensated, so that e.g. a uniform offset of 0.1 gives an MSE of exactly 0.1^2.
double mse(const ImageGrid& a, const ImageGrid& b) {
    double sum = 0.0, comp = 0.0;
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        const double term = d * d;
        const double t = sum + term;
        comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
    }
    return (sum + comp) / static_cast<double>(av.size());
}

// Correlate with a separable 1-D kernel, keeping only positions where the window fits.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
    const std::size_t n = k.size();
    const std::size_t oh = h - n + 1, ow = w - n + 1;
    std::vector<double> rows(h * ow);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += k[j] * img[r * w + c + j];
            rows[r * ow + c] = s;
        }
    std::vector<double> out(oh * ow);
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += k[j] * rows[(r + j) * ow + c];
            out[r * ow + c] = s;
        }
    return out;
}

} // namespace

double rmse(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "rmse");
    return std::sqrt(mse(a, b));
}

double psnr(const ImageGrid& a, const ImageGrid& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (!(peak > 0.0))
        throw InvalidInput("psnr: peak must be positive");
    const double e = mse(a, b);
    if (e == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / e);
}

double ssim(const ImageGrid& a, const ImageGrid& b, const SsimParams& params) {
    require_same_shape(a, b, "ssim");
    const std::size_t n = params.window;
    if (n == 0 || n % 2 == 0)
        throw InvalidInput("ssim: window size must be odd");
    if (a.height() < n || a.width() < n)
        throw InvalidInput("ssim: image smaller than the " + std::to_string(n) + "x" + std::to_string(n) +
                           " window");

    std::vector<double> k(n);
    const double half = static_cast<double>(n / 2);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (static_cast<double>(i) - half) / params.gaussian_sigma;
        k[i] = std::exp(-0.5 * t * t);
        total += k[i];
    }
    for (auto& v : k)
        v /= total;

    const std::size_t h = a.height(), w = a.width(), size = a.size();
    std::vector<double> aa(size), bb(size), ab(size);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < size; ++i) {
        aa[i] = av[i] * av[i];
        bb[i] = bv[i] * bv[i];
        ab[i] = av[i] * bv[i];
    }
    const auto mu_a = filter_valid(av, h, w, k);
    const auto mu_b = filter_valid(bv, h, w, k);
    const auto s_aa = filter_valid(aa, h, w, k);
    const auto s_bb = filter_valid(bb, h, w, k);
    const auto s_ab = filter_valid(ab, h, w, k);

    const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
    const double c2 = std::pow(params.k2 * params.dynamic_range, 2);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = s_aa[i] - ma * ma, vb = s_bb[i] - mb * mb, cov = s_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return sum / static_cast<double>(mu_a.size());
}

MetricReport evaluate(const ImageGrid& reference, const ImageGrid& estimate) {
    return {psnr(reference, estimate), ssim(reference, estimate), rmse(reference, estimate)};
}

double cubic_kernel(double t, double a) {
    t = std::abs(t);
    if (t < 1.0)
        return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0)
        return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

namespace {

struct Taps {
    std::size_t index[4];
    double weight[4];
};

std::vector<Taps> make_taps(std::size_t in, std::size_t factor) {
    std::vector<Taps> taps(in * factor);
    const auto last = static_cast<std::ptrdiff_t>(in) - 1;
    for (std::size_t o = 0; o < taps.size(); ++o) {
        const double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
        const auto base = static_cast<std::ptrdiff_t>(std::floor(src));
        for (int j = 0; j < 4; ++j) {
            const std::ptrdiff_t i = base - 1 + j;
            taps[o].index[j] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, last));
            taps[o].weight[j] = cubic_kernel(src - static_cast<double>(i));
        }
    }
    return taps;
}

} // namespace

ImageGrid bicubic_upsample(const ImageGrid& lr, std::size_t factor) {
    if (factor == 0)
        throw InvalidInput("bicubic: factor must be >= 1");
    const std::size_t h = lr.height(), w = lr.width();
    const std::size_t oh = h * factor, ow = w * factor;
    const auto tx = make_taps(w, factor);
    const auto ty = make_taps(h, factor);

    std::vector<double> rows(h * ow);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int j = 0; j < 4; ++j)
                s += tx[c].weight[j] * lr(r, tx[c].index[j]);
            rows[r * ow + c] = s;
        }
    std::vector<double> out(oh * ow);
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int j = 0; j < 4; ++j)
                s += ty[r].weight[j] * rows[ty[r].index[j] * ow + c];
            out[r * ow + c] = s;
        }
    return ImageGrid(oh, ow, std::move(out));
}

} // namespace pnpdm
