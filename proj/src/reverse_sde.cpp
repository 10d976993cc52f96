#include "pnpdm/reverse_sde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pnpdm/error.hpp"
#include "pnpdm/kernels.hpp"

namespace pnpdm {

SdeMethod parse_sde_method(std::string_view name) {
    if (name == "euler_maruyama" || name == "euler")
        return SdeMethod::euler_maruyama;
    if (name == "heun_stochastic" || name == "heun")
        return SdeMethod::heun_stochastic;
    throw InvalidInput("unknown SDE method '" + std::string(name) + "'");
}

std::string_view to_string(SdeMethod method) {
    return method == SdeMethod::euler_maruyama ? "euler_maruyama" : "heun_stochastic";
}

void ReverseSdeConfig::validate() const {
    if (steps == 0)
        throw InvalidInput("reverse SDE needs at least one step");
    if (!(step_exponent > 0.0) || !std::isfinite(step_exponent))
        throw InvalidInput("time-grid exponent must be positive");
    if (!(sigma_terminal > 0.0) || !std::isfinite(sigma_terminal))
        throw InvalidInput("terminal noise level must be positive");
}

std::vector<double> sigma_grid(double sigma_max, double sigma_end, std::size_t steps, double exponent) {
    if (!(sigma_end > 0.0) || !(sigma_max > sigma_end) || !std::isfinite(sigma_max))
        throw InvalidInput("noise grid needs sigma_max > sigma_end > 0");
    if (steps == 0 || !(exponent > 0.0))
        throw InvalidInput("noise grid needs steps >= 1 and a positive exponent");
    const double hi = std::pow(sigma_max, 1.0 / exponent);
    const double lo = std::pow(sigma_end, 1.0 / exponent);
    std::vector<double> grid(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(steps);
        grid[i] = std::pow(hi + frac * (lo - hi), exponent);
    }
    grid.front() = sigma_max;
    grid.back() = sigma_end;
    return grid;
}

std::vector<double> time_grid(const DiffusionSchedule& sched, double sigma_max, const ReverseSdeConfig& cfg) {
    cfg.validate();
    auto grid = sigma_grid(sigma_max, cfg.sigma_terminal, cfg.steps, cfg.step_exponent);
    for (double& s : grid)
        s = sched.time_of_sigma(s);
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] < grid[i - 1]))
            throw InvalidInput("time grid is not strictly decreasing; use fewer steps or a wider noise range");
    return grid;
}

// ---------------------------------------------------------------------------------------

ReverseSdeIntegrator::ReverseSdeIntegrator(const ScoreModel& score, const DiffusionSchedule& sched,
                                           ReverseSdeConfig cfg)
    : score_(score), sched_(sched), cfg_(cfg) {
    cfg_.validate();
    const std::size_t n = score.dim();
    scaled_.resize(n);
    score_buf_.resize(n);
    drift0_.resize(n);
    drift1_.resize(n);
    predictor_.resize(n);
    noise_.resize(n);
    next_.resize(n);
}

void ReverseSdeIntegrator::drift(std::span<const double> x, const ScheduleValues& v, std::span<double> out) {
    // The score is taken w.r.t. x of log p(x / s; sigma), hence a single factor of s.
    kernels::active().axpby(1.0 / v.scale, x.data(), 0.0, x.data(), scaled_.data(), x.size());
    score_.score(scaled_, v.sigma, score_buf_);
    kernels::active().axpby(v.dscale / v.scale, x.data(), -2.0 * v.scale * v.dsigma * v.sigma, score_buf_.data(),
                            out.data(), x.size());
}

void ReverseSdeIntegrator::euler_step(std::span<const double> x, double t_from, double t_to,
                                      std::span<const double> noise, std::span<double> out) {
    if (x.size() != score_.dim() || noise.size() != x.size() || out.size() != x.size())
        throw InvalidInput("reverse SDE step: dimension mismatch");
    if (!(t_to < t_from))
        throw InvalidInput("reverse SDE step must move backward in time");
    const ScheduleValues v = sched_.eval(t_from);
    sched_.eval(t_to);
    const double dt = t_to - t_from;
    drift(x, v, drift0_);
    const double g = v.scale * std::sqrt(2.0 * v.dsigma * v.sigma) * std::sqrt(-dt);
    kernels::active().axpbypcz(1.0, x.data(), dt, drift0_.data(), g, noise.data(), out.data(), x.size());
}

void ReverseSdeIntegrator::heun_step(std::span<const double> x, double t_from, double t_to,
                                     std::span<const double> noise, std::span<double> out) {
    if (x.size() != score_.dim() || noise.size() != x.size() || out.size() != x.size())
        throw InvalidInput("reverse SDE step: dimension mismatch");
    if (!(t_to < t_from))
        throw InvalidInput("reverse SDE step must move backward in time");
    const auto& k = kernels::active();
    const std::size_t n = x.size();
    const ScheduleValues v0 = sched_.eval(t_from);
    const ScheduleValues v1 = sched_.eval(t_to);
    const double dt = t_to - t_from;
    const double sq = std::sqrt(-dt);
    const double g0 = v0.scale * std::sqrt(2.0 * v0.dsigma * v0.sigma);
    const double g1 = v1.scale * std::sqrt(2.0 * v1.dsigma * v1.sigma);

    drift(x, v0, drift0_);
    k.axpbypcz(1.0, x.data(), dt, drift0_.data(), g0 * sq, noise.data(), predictor_.data(), n);
    drift(predictor_, v1, drift1_);
    k.axpby(1.0, drift0_.data(), 1.0, drift1_.data(), drift1_.data(), n);
    k.axpbypcz(1.0, x.data(), 0.5 * dt, drift1_.data(), 0.5 * (g0 + g1) * sq, noise.data(), out.data(), n);
}

void ReverseSdeIntegrator::step(std::span<double> x, double t_from, double t_to, Rng& rng) {
    rng.fill_normal(noise_);
    if (cfg_.method == SdeMethod::euler_maruyama)
        euler_step(x, t_from, t_to, noise_, next_);
    else
        heun_step(x, t_from, t_to, noise_, next_);
    std::copy(next_.begin(), next_.end(), x.begin());
}

void ReverseSdeIntegrator::integrate(std::span<double> x, std::span<const double> times, Rng& rng,
                                     SdeTrajectory* record) {
    if (record) {
        record->states.assign(1, std::vector<double>(x.begin(), x.end()));
        record->times.assign(1, times.front());
    }
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        step(x, times[i], times[i + 1], rng);
        for (double v : x)
            if (!std::isfinite(v))
                throw Diverged(i, "non-finite state at t = " + std::to_string(times[i + 1]));
        if (record) {
            record->states.emplace_back(x.begin(), x.end());
            record->times.push_back(times[i + 1]);
        }
    }
}

void ReverseSdeIntegrator::prior_step(std::span<const double> z, double rho, Rng& rng, std::span<double> out,
                                      SdeTrajectory* record) {
    if (!(rho > cfg_.sigma_terminal) || !std::isfinite(rho))
        throw InvalidInput("prior step needs rho (" + std::to_string(rho) + ") above the terminal noise level (" +
                           std::to_string(cfg_.sigma_terminal) + ")");
    if (z.size() != score_.dim() || out.size() != z.size())
        throw InvalidInput("prior step: dimension mismatch");
    const auto times = time_grid(sched_, rho, cfg_);
    const double s_start = sched_.scale(times.front());
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = s_start * z[i];
    integrate(out, times, rng, record);
    const double s_end = sched_.scale(times.back());
    for (double& v : out)
        v /= s_end;
}

void ReverseSdeIntegrator::sample_unconditional(double sigma_max, double prior_scale, double center, Rng& rng,
                                                std::span<double> out, SdeTrajectory* record) {
    if (!(sigma_max > cfg_.sigma_terminal))
        throw InvalidInput("unconditional sampling needs sigma_max above the terminal noise level");
    if (!(prior_scale >= 0.0) || !std::isfinite(prior_scale))
        throw InvalidInput("prior scale must be finite and >= 0");
    if (out.size() != score_.dim())
        throw InvalidInput("unconditional sample: dimension mismatch");
    const auto times = time_grid(sched_, sigma_max, cfg_);
    const double s_start = sched_.scale(times.front());
    const double spread = std::sqrt(sigma_max * sigma_max + prior_scale * prior_scale);
    for (double& v : out)
        v = s_start * (center + spread * rng.normal());
    integrate(out, times, rng, record);
    const double s_end = sched_.scale(times.back());
    for (double& v : out)
        v /= s_end;
}

// ---------------------------------------------------------------------------------------

std::vector<double> reverse_sde_step(std::span<const double> x, double t_from, double t_to, const ScoreModel& score,
                                     const DiffusionSchedule& sched, Rng& rng, SdeMethod method) {
    ReverseSdeConfig cfg;
    cfg.method = method;
    ReverseSdeIntegrator integrator(score, sched, cfg);
    std::vector<double> out(x.begin(), x.end());
    integrator.step(out, t_from, t_to, rng);
    for (double v : out)
        if (!std::isfinite(v))
            throw Diverged(0, "non-finite state");
    return out;
}

std::vector<double> sample_prior_unconditional(const ScoreModel& score, const DiffusionSchedule& sched,
                                               const ReverseSdeConfig& cfg, double sigma_max, double prior_scale,
                                               Rng& rng) {
    ReverseSdeIntegrator integrator(score, sched, cfg);
    std::vector<double> out(score.dim());
    integrator.sample_unconditional(sigma_max, prior_scale, 0.0, rng, out);
    return out;
}

std::vector<double> prior_step(std::span<const double> z, double rho, const ScoreModel& score,
                               const DiffusionSchedule& sched, const ReverseSdeConfig& cfg, Rng& rng) {
    ReverseSdeIntegrator integrator(score, sched, cfg);
    std::vector<double> out(z.size());
    integrator.prior_step(z, rho, rng, out);
    return out;
}

} // namespace pnpdm
