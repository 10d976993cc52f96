#include "pnpdm/schedule.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pnpdm/error.hpp"

namespace pnpdm {

std::string_view to_string(ScheduleKind kind) {
    switch (kind) {
    case ScheduleKind::edm:
        return "edm";
    case ScheduleKind::vp:
        return "vp";
    case ScheduleKind::ve:
        return "ve";
    }
    return "?";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
    if (name == "edm")
        return ScheduleKind::edm;
    if (name == "vp")
        return ScheduleKind::vp;
    if (name == "ve")
        return ScheduleKind::ve;
    throw InvalidInput("unknown schedule '" + std::string(name) + "'");
}

DiffusionSchedule DiffusionSchedule::edm() { return DiffusionSchedule(ScheduleKind::edm, 0.0, 0.0); }

DiffusionSchedule DiffusionSchedule::vp(double beta_min, double beta_max) {
    if (!(beta_min > 0.0) || !(beta_max >= beta_min) || !std::isfinite(beta_max))
        throw InvalidInput("VP schedule needs 0 < beta_min <= beta_max");
    return DiffusionSchedule(ScheduleKind::vp, beta_min, beta_max);
}

DiffusionSchedule DiffusionSchedule::ve(double sigma_min, double sigma_max) {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max))
        throw InvalidInput("VE schedule needs 0 < sigma_min < sigma_max");
    return DiffusionSchedule(ScheduleKind::ve, sigma_min, sigma_max);
}

double DiffusionSchedule::t_min() const {
    switch (kind_) {
    case ScheduleKind::edm:
        return 0.0;
    case ScheduleKind::vp:
        return std::numeric_limits<double>::min(); // open at 0
    case ScheduleKind::ve:
        return a_ * a_;
    }
    return 0.0;
}

double DiffusionSchedule::t_max() const {
    switch (kind_) {
    case ScheduleKind::edm:
        return std::numeric_limits<double>::max();
    case ScheduleKind::vp:
        return 1.0;
    case ScheduleKind::ve:
        return b_ * b_;
    }
    return 0.0;
}

double DiffusionSchedule::sigma_max() const {
    switch (kind_) {
    case ScheduleKind::edm:
        return std::numeric_limits<double>::infinity();
    case ScheduleKind::vp:
        return eval(1.0).sigma;
    case ScheduleKind::ve:
        return b_;
    }
    return 0.0;
}

void DiffusionSchedule::check_domain(double t) const {
    if (!std::isfinite(t) || t < t_min() || t > t_max())
        throw InvalidInput("time " + std::to_string(t) + " outside the " + std::string(to_string(kind_)) +
                           " schedule domain");
}

ScheduleValues DiffusionSchedule::eval(double t) const {
    check_domain(t);
    switch (kind_) {
    case ScheduleKind::edm:
        return {t, 1.0, 1.0, 0.0};
    case ScheduleKind::vp: {
        const double beta_d = b_ - a_;
        const double exponent = 0.5 * beta_d * t * t + a_ * t;
        const double beta = beta_d * t + a_;
        const double sigma = std::sqrt(std::expm1(exponent));
        const double scale = std::exp(-0.5 * exponent);
        return {sigma, std::exp(exponent) * beta / (2.0 * sigma), scale, -0.5 * beta * scale};
    }
    case ScheduleKind::ve: {
        const double sigma = std::sqrt(t);
        return {sigma, 0.5 / sigma, 1.0, 0.0};
    }
    }
    return {};
}

double DiffusionSchedule::time_of_sigma(double sigma) const {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw InvalidInput("noise level must be positive and finite");
    double t = 0.0;
    switch (kind_) {
    case ScheduleKind::edm:
        t = sigma;
        break;
    case ScheduleKind::vp: {
        // Positive root of beta_d/2 t^2 + beta_min t = log(1 + sigma^2), cancellation-free.
        const double target = std::log1p(sigma * sigma);
        const double beta_d = b_ - a_;
        t = 2.0 * target / (a_ + std::sqrt(a_ * a_ + 2.0 * beta_d * target));
        break;
    }
    case ScheduleKind::ve:
        t = sigma * sigma;
        break;
    }
    if (t < t_min() || t > t_max())
        throw InvalidInput("noise level " + std::to_string(sigma) + " outside the " + std::string(to_string(kind_)) +
                           " schedule range");
    return t;
}

} // namespace pnpdm
