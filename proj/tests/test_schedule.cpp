#include <doctest.h>

#include <cmath>

#include "pnpdm/error.hpp"
#include "pnpdm/reverse_sde.hpp"
#include "pnpdm/schedule.hpp"

using namespace pnpdm;

namespace {

void check_derivatives(const DiffusionSchedule& s, double t) {
    const double h = 1e-6 * std::max(1.0, t);
    const auto v = s.eval(t);
    const double ds = (s.sigma(t + h) - s.sigma(t - h)) / (2 * h);
    const double dsc = (s.scale(t + h) - s.scale(t - h)) / (2 * h);
    CHECK(v.dsigma == doctest::Approx(ds).epsilon(1e-6));
    CHECK(v.dscale == doctest::Approx(dsc).epsilon(1e-6).scale(1e-8));
}

} // namespace

TEST_CASE("EDM schedule") {
    const auto s = DiffusionSchedule::edm();
    const auto v = s.eval(2.5);
    CHECK(v.sigma == 2.5);
    CHECK(v.dsigma == 1.0);
    CHECK(v.scale == 1.0);
    CHECK(v.dscale == 0.0);
    CHECK(s.time_of_sigma(0.7) == 0.7);
    CHECK_THROWS_AS(s.eval(-0.1), InvalidInput);
}

TEST_CASE("VP schedule values") {
    const auto s = DiffusionSchedule::vp();
    for (double t : {1e-3, 0.05, 0.3, 0.7, 1.0}) {
        const double e = 0.5 * (20.0 - 0.1) * t * t + 0.1 * t;
        const auto v = s.eval(t);
        CHECK(v.sigma == doctest::Approx(std::sqrt(std::exp(e) - 1.0)).epsilon(1e-12));
        CHECK(v.scale == doctest::Approx(std::exp(-0.5 * e)).epsilon(1e-12));
        CHECK(v.scale == doctest::Approx(1.0 / std::sqrt(1.0 + v.sigma * v.sigma)).epsilon(1e-12));
    }
    for (double t : {0.01, 0.2, 0.5, 0.99})
        check_derivatives(s, t);
    CHECK_THROWS_AS(s.eval(0.0), InvalidInput);
    CHECK_THROWS_AS(s.eval(1.01), InvalidInput);
    CHECK(s.sigma_max() == doctest::Approx(s.sigma(1.0)));
    CHECK_THROWS_AS(DiffusionSchedule::vp(-1.0, 20.0), InvalidInput);
}

TEST_CASE("VE schedule values") {
    const auto s = DiffusionSchedule::ve();
    CHECK(s.sigma(4.0) == 2.0);
    CHECK(s.scale(4.0) == 1.0);
    check_derivatives(s, 0.25);
    check_derivatives(s, 100.0);
    CHECK(s.t_min() == doctest::Approx(1e-8));
    CHECK(s.t_max() == doctest::Approx(1e4));
    CHECK_THROWS_AS(s.eval(1e-9), InvalidInput);
    CHECK_THROWS_AS(s.time_of_sigma(200.0), InvalidInput);
}

TEST_CASE("time_of_sigma inverts sigma") {
    for (auto s : {DiffusionSchedule::edm(), DiffusionSchedule::vp(), DiffusionSchedule::ve(),
                   DiffusionSchedule::vp(0.5, 5.0)}) {
        for (double sigma : {1e-3, 0.01, 0.3, 1.0, 10.0, 80.0}) {
            if (sigma > s.sigma_max())
                continue;
            const double t = s.time_of_sigma(sigma);
            CHECK(s.sigma(t) == doctest::Approx(sigma).epsilon(1e-10));
        }
    }
    CHECK_THROWS_AS(DiffusionSchedule::vp().time_of_sigma(1e6), InvalidInput);
    CHECK_THROWS_AS(DiffusionSchedule::edm().time_of_sigma(-1.0), InvalidInput);
}

TEST_CASE("schedule names") {
    CHECK(parse_schedule_kind("vp") == ScheduleKind::vp);
    CHECK(to_string(ScheduleKind::ve) == "ve");
    CHECK_THROWS_AS(parse_schedule_kind("ddpm"), InvalidInput);
}

TEST_CASE("noise-level grid") {
    const auto g = sigma_grid(80.0, 1e-3, 100, 7.0);
    REQUIRE(g.size() == 101);
    CHECK(g.front() == 80.0);
    CHECK(g.back() == 1e-3);
    for (std::size_t i = 1; i < g.size(); ++i)
        CHECK(g[i] < g[i - 1]);
    // interior point from the closed form
    const double a = std::pow(80.0, 1.0 / 7), b = std::pow(1e-3, 1.0 / 7);
    CHECK(g[37] == doctest::Approx(std::pow(a + 0.37 * (b - a), 7.0)).epsilon(1e-13));
    CHECK_THROWS_AS(sigma_grid(1e-3, 1.0, 10, 7.0), InvalidInput);
    CHECK_THROWS_AS(sigma_grid(1.0, 0.1, 0, 7.0), InvalidInput);

    ReverseSdeConfig cfg;
    const auto vp = DiffusionSchedule::vp();
    const auto t = time_grid(vp, 2.0, cfg);
    REQUIRE(t.size() == cfg.steps + 1);
    CHECK(vp.sigma(t.front()) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(vp.sigma(t.back()) == doctest::Approx(cfg.sigma_terminal).epsilon(1e-9));
    for (std::size_t i = 1; i < t.size(); ++i)
        CHECK(t[i] < t[i - 1]);
}
