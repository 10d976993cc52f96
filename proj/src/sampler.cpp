#include "pnpdm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "pnpdm/error.hpp"
#include "pnpdm/kernels.hpp"

namespace pnpdm {

void AnnealingSchedule::validate() const {
    if (!(rho0 > 0.0) || !std::isfinite(rho0))
        throw InvalidInput("annealing: rho0 must be positive");
    if (!(rho_min > 0.0) || rho_min > rho0)
        throw InvalidInput("annealing: need 0 < rho_min <= rho0");
    if (!(alpha > 0.0) || alpha > 1.0)
        throw InvalidInput("annealing: decay rate must lie in (0, 1]");
}

double AnnealingSchedule::rho(std::size_t q) const {
    return std::max(rho_min, rho0 * std::pow(alpha, static_cast<double>(q)));
}

double anneal_rho(const AnnealingSchedule& sched, std::size_t q) { return sched.rho(q); }

// ---------------------------------------------------------------------------------------

LikelihoodStep::LikelihoodStep(const LinearOperatorSVD& op, std::span<const double> y, double sigma_y)
    : op_(op), sigma_y_(sigma_y) {
    if (!(sigma_y > 0.0) || !std::isfinite(sigma_y))
        throw InvalidInput("likelihood step needs sigma_y > 0 (noiseless data is not supported)");
    if (y.size() != op.output_dim())
        throw InvalidInput("likelihood step: measurement length " + std::to_string(y.size()) + " != " +
                           std::to_string(op.output_dim()));
    require_finite(y, "measurement");
    const std::size_t n = op.input_dim(), m = op.output_dim();
    const auto d = op.singular_values();
    std::vector<double> uty(m);
    op.to_u(y, uty);
    const double inv_var = 1.0 / (sigma_y * sigma_y);
    data_v_.assign(n, 0.0);
    d2_.assign(n, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        data_v_[i] = d[i] * uty[i] * inv_var;
        d2_[i] = d[i] * d[i] * inv_var;
    }
    inv_precision_.resize(n);
    stddev_.resize(n);
    x_v_.resize(n);
    out_v_.resize(n);
    noise_.resize(n);
}

void LikelihoodStep::prepare(double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho))
        throw InvalidInput("likelihood step needs rho > 0");
    if (rho == prepared_rho_)
        return;
    const double inv_rho2 = 1.0 / (rho * rho);
    for (std::size_t i = 0; i < d2_.size(); ++i) {
        inv_precision_[i] = 1.0 / (d2_[i] + inv_rho2);
        stddev_[i] = std::sqrt(inv_precision_[i]);
    }
    prepared_rho_ = rho;
}

std::vector<double> LikelihoodStep::precision_v(double rho) const {
    std::vector<double> out(d2_.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = d2_[i] + 1.0 / (rho * rho);
    return out;
}

void LikelihoodStep::draw(std::span<const double> x, double rho, Rng& rng, std::span<double> out) {
    if (x.size() != dim() || out.size() != dim())
        throw InvalidInput("likelihood step: dimension mismatch");
    prepare(rho);
    op_.to_v(x, x_v_);
    rng.fill_normal(noise_);
    kernels::active().gaussian_conditional(data_v_.data(), x_v_.data(), 1.0 / (rho * rho), inv_precision_.data(),
                                           stddev_.data(), noise_.data(), out_v_.data(), dim());
    op_.from_v(out_v_, out);
    for (double v : out)
        if (!std::isfinite(v))
            throw NumericFailure("likelihood step produced a non-finite value");
}

std::vector<double> LikelihoodStep::draw(std::span<const double> x, double rho, Rng& rng) {
    std::vector<double> out(dim());
    draw(x, rho, rng, out);
    return out;
}

std::vector<double> LikelihoodStep::mean(std::span<const double> x, double rho) {
    if (x.size() != dim())
        throw InvalidInput("likelihood step: dimension mismatch");
    prepare(rho);
    op_.to_v(x, x_v_);
    std::fill(noise_.begin(), noise_.end(), 0.0);
    kernels::active().gaussian_conditional(data_v_.data(), x_v_.data(), 1.0 / (rho * rho), inv_precision_.data(),
                                           stddev_.data(), noise_.data(), out_v_.data(), dim());
    std::vector<double> out(dim());
    op_.from_v(out_v_, out);
    return out;
}

std::vector<double> likelihood_step(std::span<const double> x, std::span<const double> y, const LinearOperatorSVD& op,
                                    double sigma_y, double rho, Rng& rng) {
    LikelihoodStep step(op, y, sigma_y);
    return step.draw(x, rho, rng);
}

// ---------------------------------------------------------------------------------------

void ChainStats::add(std::span<const double> x) {
    if (count_ == 0 && mean_.empty()) {
        mean_.assign(x.size(), 0.0);
        m2_.assign(x.size(), 0.0);
    }
    if (x.size() != mean_.size())
        throw InvalidInput("chain stats: dimension mismatch");
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double delta = x[i] - mean_[i];
        mean_[i] += delta * inv;
        m2_[i] += delta * (x[i] - mean_[i]);
    }
}

void ChainStats::merge(const ChainStats& other) {
    if (other.count_ == 0)
        return;
    if (count_ == 0) {
        *this = other;
        return;
    }
    if (other.dim() != dim())
        throw InvalidInput("chain stats: dimension mismatch");
    const double na = static_cast<double>(count_), nb = static_cast<double>(other.count_);
    const double total = na + nb;
    for (std::size_t i = 0; i < dim(); ++i) {
        const double delta = other.mean_[i] - mean_[i];
        mean_[i] += delta * (nb / total);
        m2_[i] += other.m2_[i] + delta * delta * (na * nb / total);
    }
    count_ += other.count_;
}

std::vector<double> ChainStats::variance() const {
    std::vector<double> out(dim(), 0.0);
    if (count_ < 2)
        return out;
    for (std::size_t i = 0; i < dim(); ++i)
        out[i] = m2_[i] / static_cast<double>(count_ - 1);
    return out;
}

ImageGrid posterior_mean_estimate(const ChainStats& stats, std::size_t height, std::size_t width) {
    if (stats.count() == 0)
        throw InvalidInput("posterior mean of an empty chain");
    if (height * width != stats.dim())
        throw InvalidInput("posterior mean: shape does not match the chain dimension");
    return ImageGrid(height, width, stats.running_mean());
}

// ---------------------------------------------------------------------------------------

void SamplerOptions::validate(std::size_t dim) const {
    if (!(iterations > burn_in))
        throw InvalidInput("sampler needs iterations > burn_in");
    if (init == ChainInit::given) {
        if (initial_state.size() != dim)
            throw InvalidInput("initial state has the wrong dimension");
        require_finite(initial_state, "initial state");
    }
    if (init == ChainInit::prior && (!(init_sigma_max > 0.0) || !std::isfinite(init_sigma_max)))
        throw InvalidInput("initial noise level must be positive");
    if (!(prior_scale >= 0.0) || !std::isfinite(prior_scale))
        throw InvalidInput("prior scale must be finite and >= 0");
}

PnpDmSampler::PnpDmSampler(const LinearOperatorSVD& op, std::span<const double> y, const NoiseModel& noise,
                           const ScoreModel& score, const DiffusionSchedule& sched, AnnealingSchedule anneal,
                           ReverseSdeConfig sde_cfg, SamplerOptions options)
    : op_(op), y_(y.begin(), y.end()), noise_(noise), score_(score), sched_(sched), anneal_(anneal),
      sde_cfg_(sde_cfg), options_(std::move(options)) {
    if (score.dim() != op.input_dim())
        throw InvalidInput("prior dimension " + std::to_string(score.dim()) + " != operator input dimension " +
                           std::to_string(op.input_dim()));
    anneal_.validate();
    sde_cfg_.validate();
    options_.validate(op.input_dim());
    if (!(anneal_.rho_min > sde_cfg_.sigma_terminal))
        throw InvalidInput("rho_min must exceed the terminal noise level of the prior step");
    // Fail on the measurement/noise before any chain starts.
    LikelihoodStep(op_, y_, noise_.sigma_y);
}

ChainResult PnpDmSampler::run(std::uint64_t seed, const IterateCallback& on_iterate) const {
    const std::size_t n = op_.input_dim();
    Rng rng(seed);
    LikelihoodStep likelihood(op_, y_, noise_.sigma_y);
    ReverseSdeIntegrator integrator(score_, sched_, sde_cfg_);

    std::vector<double> x(n), z(n);
    if (options_.init == ChainInit::given)
        x = options_.initial_state;
    else
        integrator.sample_unconditional(options_.init_sigma_max, options_.prior_scale, 0.0, rng, x);

    ChainResult result;
    result.stats = ChainStats(n);
    for (std::size_t q = 0; q < options_.iterations; ++q) {
        const double rho = anneal_.rho(q);
        const std::string where = "iteration " + std::to_string(q) + ": ";
        try {
            likelihood.draw(x, rho, rng, z);
            integrator.prior_step(z, rho, rng, x);
        } catch (const Diverged& e) {
            throw Diverged(e.step(), where + e.what());
        } catch (const NumericFailure& e) {
            throw NumericFailure(where + e.what());
        } catch (const InvalidInput& e) {
            throw InvalidInput(where + e.what());
        }
        if (q >= options_.burn_in) {
            result.stats.add(x);
            if (options_.keep_samples)
                result.samples.push_back(x);
        }
        if (on_iterate)
            on_iterate(SamplerState{q, rho, x, z});
    }
    return result;
}

ChainResult PnpDmSampler::run_chains(std::size_t chains, std::uint64_t seed, std::size_t threads) const {
    if (chains == 0)
        throw InvalidInput("need at least one chain");
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, chains);

    std::vector<ChainResult> results(chains);
    std::vector<std::exception_ptr> errors(chains);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t c = next++; c < chains; c = next++) {
            try {
                results[c] = run(derive_seed(seed, c));
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    ChainResult merged;
    merged.stats = ChainStats(op_.input_dim());
    for (auto& r : results) {
        merged.stats.merge(r.stats);
        for (auto& s : r.samples)
            merged.samples.push_back(std::move(s));
    }
    return merged;
}

ChainResult pnp_dm_run(std::span<const double> y, const LinearOperatorSVD& op, const NoiseModel& noise,
                       const ScoreModel& score, const DiffusionSchedule& sched, const AnnealingSchedule& anneal,
                       const ReverseSdeConfig& sde_cfg, const SamplerOptions& options, std::uint64_t seed) {
    return PnpDmSampler(op, y, noise, score, sched, anneal, sde_cfg, options).run(seed);
}

} // namespace pnpdm
