#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pnpdm/rng.hpp"
#include "pnpdm/schedule.hpp"
#include "pnpdm/score_model.hpp"

namespace pnpdm {

enum class SdeMethod { euler_maruyama, heun_stochastic };

SdeMethod parse_sde_method(std::string_view name);
std::string_view to_string(SdeMethod method);

struct ReverseSdeConfig {
    std::size_t steps = 100;
    double step_exponent = 7.0;
    double sigma_terminal = 1e-3;
    SdeMethod method = SdeMethod::heun_stochastic;

    void validate() const;
};

struct SdeTrajectory {
    std::vector<std::vector<double>> states;
    std::vector<double> times;
    std::uint64_t seed = 0;
};

/// Noise levels sigma_i = (sigma_max^(1/k) + i/N (sigma_end^(1/k) - sigma_max^(1/k)))^k,
/// i = 0..N, with the endpoints exact.
std::vector<double> sigma_grid(double sigma_max, double sigma_end, std::size_t steps, double exponent);
/// sigma_grid mapped through t(sigma); strictly decreasing.
std::vector<double> time_grid(const DiffusionSchedule& sched, double sigma_max, const ReverseSdeConfig& cfg);

/// Reverse-time SDE
///   dx = [ s'/s x - 2 s sigma' sigma score(x/s; sigma) ] dt + s sqrt(2 sigma' sigma) dw
/// integrated from high to low noise. Holds scratch buffers; one integrator per chain.
class ReverseSdeIntegrator {
public:
    ReverseSdeIntegrator(const ScoreModel& score, const DiffusionSchedule& sched, ReverseSdeConfig cfg);

    const ReverseSdeConfig& config() const { return cfg_; }
    const DiffusionSchedule& schedule() const { return sched_; }

    /// One Euler-Maruyama step from t_from to t_to < t_from using the supplied standard
    /// normal draws.
    void euler_step(std::span<const double> x, double t_from, double t_to, std::span<const double> noise,
                    std::span<double> out);
    /// One stochastic Heun step (additive-noise predictor-corrector); same noise convention.
    void heun_step(std::span<const double> x, double t_from, double t_to, std::span<const double> noise,
                   std::span<double> out);
    /// One step with the configured method, drawing noise from `rng`.
    void step(std::span<double> x, double t_from, double t_to, Rng& rng);

    /// Integrates x (state at times.front(), already scaled by s) along `times`. Throws
    /// Diverged naming the step if the state leaves the finite range.
    void integrate(std::span<double> x, std::span<const double> times, Rng& rng, SdeTrajectory* record = nullptr);

    /// Approximate draw from p(x | z) for z = x + rho * eps: starts at noise level rho from
    /// s(t*) z and integrates down to sigma_terminal.
    void prior_step(std::span<const double> z, double rho, Rng& rng, std::span<double> out,
                    SdeTrajectory* record = nullptr);

    /// Unconditional draw: starts from s(t) (center + sqrt(sigma_max^2 + c^2) xi) at
    /// sigma_max, where c is the prior's scale.
    void sample_unconditional(double sigma_max, double prior_scale, double center, Rng& rng, std::span<double> out,
                              SdeTrajectory* record = nullptr);

private:
    void drift(std::span<const double> x, const ScheduleValues& v, std::span<double> out);

    const ScoreModel& score_;
    DiffusionSchedule sched_;
    ReverseSdeConfig cfg_;
    std::vector<double> scaled_;
    std::vector<double> score_buf_;
    std::vector<double> drift0_;
    std::vector<double> drift1_;
    std::vector<double> predictor_;
    std::vector<double> noise_;
    std::vector<double> next_;
};

/// Functional forms of the above for single use.
std::vector<double> reverse_sde_step(std::span<const double> x, double t_from, double t_to, const ScoreModel& score,
                                     const DiffusionSchedule& sched, Rng& rng,
                                     SdeMethod method = SdeMethod::euler_maruyama);
std::vector<double> sample_prior_unconditional(const ScoreModel& score, const DiffusionSchedule& sched,
                                               const ReverseSdeConfig& cfg, double sigma_max, double prior_scale,
                                               Rng& rng);
std::vector<double> prior_step(std::span<const double> z, double rho, const ScoreModel& score,
                               const DiffusionSchedule& sched, const ReverseSdeConfig& cfg, Rng& rng);

} // namespace pnpdm
