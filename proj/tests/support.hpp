#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "pnpdm/image.hpp"
#include "pnpdm/rng.hpp"

namespace testing {

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    pnpdm::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v)
        x = rng.uniform(lo, hi);
    return v;
}

inline pnpdm::ImageGrid random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    return pnpdm::ImageGrid(h, w, random_vector(h * w, seed));
}

/// Block-average matrix built entry by entry from its definition.
inline Eigen::MatrixXd dense_block_average(std::size_t f, std::size_t h, std::size_t w) {
    const std::size_t lw = w / f;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>((h / f) * lw), static_cast<Eigen::Index>(h * w));
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            p(static_cast<Eigen::Index>((r / f) * lw + c / f), static_cast<Eigen::Index>(r * w + c)) =
                1.0 / static_cast<double>(f * f);
    return p;
}

inline Eigen::VectorXd as_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace testing
