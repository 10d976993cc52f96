#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "pnpdm/error.hpp"
#include "pnpdm/kernels.hpp"
#include "support.hpp"

using namespace pnpdm;
using testing::random_vector;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

struct Inputs {
    std::vector<double> x, y, z, mean, var;
    explicit Inputs(std::size_t n, std::uint64_t seed)
        : x(random_vector(n, seed, -2, 2)), y(random_vector(n, seed + 1, -2, 2)), z(random_vector(n, seed + 2, -2, 2)),
          mean(random_vector(n, seed + 3, -1, 1)), var(random_vector(n, seed + 4, 0.01, 1)) {}
};

// Checks every kernel of `t` against straightforward loops.
void check_against_naive(const kernels::KernelTable& t, std::size_t n) {
    const Inputs in(n, 40 + n);
    std::vector<double> out(n);

    t.axpby(0.3, in.x.data(), -1.7, in.y.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(out[i] == 0.3 * in.x[i] + -1.7 * in.y[i]);

    t.axpbypcz(0.3, in.x.data(), -1.7, in.y.data(), 2.5, in.z.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(out[i] == (0.3 * in.x[i] + -1.7 * in.y[i]) + 2.5 * in.z[i]);

    t.diag_score(in.x.data(), in.mean.data(), in.var.data(), 0.04, out.data(), n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(out[i] == doctest::Approx(-(in.x[i] - in.mean[i]) / (in.var[i] + 0.04)).epsilon(1e-15));

    std::vector<double> acc = in.z;
    t.accumulate_diag_score(in.x.data(), in.mean.data(), in.var.data(), 0.04, 0.25, acc.data(), n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(acc[i] ==
              doctest::Approx(in.z[i] - 0.25 * (in.x[i] - in.mean[i]) / (in.var[i] + 0.04)).epsilon(1e-14));

    double wsd = 0, ssd = 0, dot = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = in.x[i] - in.mean[i];
        wsd += d * d / (in.var[i] + 0.04);
        ssd += (in.x[i] - in.y[i]) * (in.x[i] - in.y[i]);
        dot += in.x[i] * in.y[i];
    }
    const double tol = 1e-13 * static_cast<double>(n + 1);
    CHECK(std::abs(t.weighted_sq_dist(in.x.data(), in.mean.data(), in.var.data(), 0.04, n) - wsd) <= tol * (1 + wsd));
    CHECK(std::abs(t.sum_sq_diff(in.x.data(), in.y.data(), n) - ssd) <= tol * (1 + ssd));
    CHECK(std::abs(t.dot(in.x.data(), in.y.data(), n) - dot) <= tol * (1 + std::abs(dot)));

    t.gaussian_conditional(in.y.data(), in.x.data(), 4.0, in.var.data(), in.mean.data(), in.z.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(out[i] == (in.y[i] + in.x[i] * 4.0) * in.var[i] + in.mean[i] * in.z[i]);
}

} // namespace

TEST_CASE("scalar kernels match naive loops") {
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 17u, 64u, 101u})
        check_against_naive(kernels::scalar_table(), n);
}

TEST_CASE("AVX2 kernels match naive loops") {
    if (!kernels::available(kernels::Backend::avx2)) {
        MESSAGE("AVX2 unavailable; skipped");
        return;
    }
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 17u, 64u, 101u})
        check_against_naive(kernels::table(kernels::Backend::avx2), n);
}

TEST_CASE("AVX2 and scalar kernels are bit-identical") {
    if (!kernels::available(kernels::Backend::avx2)) {
        MESSAGE("AVX2 unavailable; skipped");
        return;
    }
    const auto& s = kernels::scalar_table();
    const auto& v = kernels::table(kernels::Backend::avx2);
    for (std::size_t n = 0; n <= 70; ++n) {
        const Inputs in(n, 1000 + n);
        std::vector<double> a(n), b(n);

        s.axpby(1.1, in.x.data(), 0.7, in.y.data(), a.data(), n);
        v.axpby(1.1, in.x.data(), 0.7, in.y.data(), b.data(), n);
        CHECK(same_bits(a, b));

        s.axpbypcz(1.1, in.x.data(), 0.7, in.y.data(), -3.0, in.z.data(), a.data(), n);
        v.axpbypcz(1.1, in.x.data(), 0.7, in.y.data(), -3.0, in.z.data(), b.data(), n);
        CHECK(same_bits(a, b));

        s.diag_score(in.x.data(), in.mean.data(), in.var.data(), 0.3, a.data(), n);
        v.diag_score(in.x.data(), in.mean.data(), in.var.data(), 0.3, b.data(), n);
        CHECK(same_bits(a, b));

        a = in.z;
        b = in.z;
        s.accumulate_diag_score(in.x.data(), in.mean.data(), in.var.data(), 0.3, 0.6, a.data(), n);
        v.accumulate_diag_score(in.x.data(), in.mean.data(), in.var.data(), 0.3, 0.6, b.data(), n);
        CHECK(same_bits(a, b));

        CHECK(same_bits(s.weighted_sq_dist(in.x.data(), in.mean.data(), in.var.data(), 0.3, n),
                        v.weighted_sq_dist(in.x.data(), in.mean.data(), in.var.data(), 0.3, n)));
        CHECK(same_bits(s.sum_sq_diff(in.x.data(), in.y.data(), n), v.sum_sq_diff(in.x.data(), in.y.data(), n)));
        CHECK(same_bits(s.dot(in.x.data(), in.y.data(), n), v.dot(in.x.data(), in.y.data(), n)));

        s.gaussian_conditional(in.y.data(), in.x.data(), 0.5, in.var.data(), in.mean.data(), in.z.data(), a.data(), n);
        v.gaussian_conditional(in.y.data(), in.x.data(), 0.5, in.var.data(), in.mean.data(), in.z.data(), b.data(), n);
        CHECK(same_bits(a, b));
    }
}

TEST_CASE("backend selection") {
    CHECK(kernels::parse_backend("scalar") == kernels::Backend::scalar);
    CHECK(kernels::parse_backend("avx2") == kernels::Backend::avx2);
    CHECK_THROWS_AS(kernels::parse_backend("sse9"), InvalidInput);

    const auto before = kernels::active().backend;
    kernels::select(kernels::Backend::scalar);
    CHECK(kernels::active().backend == kernels::Backend::scalar);
    if (kernels::available(kernels::Backend::avx2)) {
        kernels::select(kernels::Backend::avx2);
        CHECK(kernels::active().backend == kernels::Backend::avx2);
    } else {
        CHECK_THROWS_AS(kernels::select(kernels::Backend::avx2), InvalidInput);
    }
    kernels::select(before);
}
