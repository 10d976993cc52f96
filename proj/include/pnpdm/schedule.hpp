#pragma once

#include <string>
#include <string_view>

namespace pnpdm {

enum class ScheduleKind { edm, vp, ve };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

struct ScheduleValues {
    double sigma;
    double dsigma;
    double scale;
    double dscale;
};

/// Noise schedule sigma(t) and scaling s(t) of the reverse-time diffusion, so that
/// x_t / s(t) ~ p(x; sigma(t)).
///
///   EDM: sigma = t, s = 1, t >= 0
///   VP:  sigma = sqrt(exp(beta_d t^2 / 2 + beta_min t) - 1), s = 1 / sqrt(1 + sigma^2), 0 < t <= 1
///   VE:  sigma = sqrt(t), s = 1, sigma_min^2 <= t <= sigma_max^2
class DiffusionSchedule {
public:
    static DiffusionSchedule edm();
    static DiffusionSchedule vp(double beta_min = 0.1, double beta_max = 20.0);
    static DiffusionSchedule ve(double sigma_min = 1e-4, double sigma_max = 100.0);

    ScheduleKind kind() const { return kind_; }

    /// Throws InvalidInput outside [t_min, t_max].
    ScheduleValues eval(double t) const;
    double sigma(double t) const { return eval(t).sigma; }
    double scale(double t) const { return eval(t).scale; }
    /// Inverse of sigma(t). Throws InvalidInput when sigma is not reachable.
    double time_of_sigma(double sigma) const;

    double t_min() const;
    double t_max() const;
    /// Largest noise level the schedule represents.
    double sigma_max() const;

    double beta_min() const { return a_; }
    double beta_max() const { return b_; }
    double ve_sigma_min() const { return a_; }
    double ve_sigma_max() const { return b_; }

private:
    DiffusionSchedule(ScheduleKind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
    void check_domain(double t) const;

    ScheduleKind kind_;
    double a_; // VP beta_min | VE sigma_min
    double b_; // VP beta_max | VE sigma_max
};

} // namespace pnpdm
