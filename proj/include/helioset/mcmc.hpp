#ifndef HELIOSET_MCMC_HPP
#define HELIOSET_MCMC_HPP

// Data-misfit potential and the preconditioned Crank-Nicolson kernel
//
//   proposal    y' = sqrt(1 - beta^2) y + beta xi,   xi ~ prior
//   acceptance  min{1, exp(Phi(y) - Phi(y'))}
//
// for a chain over nodal Matern fields or over RBF coefficient vectors. The
// two parameterizations differ only in the prior adapter, which draws xi and
// maps the chain parameter to a nodal level-set field.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "helioset/common.hpp"
#include "helioset/forward.hpp"
#include "helioset/levelset.hpp"
#include "helioset/prior_matern.hpp"
#include "helioset/prior_rbf.hpp"

namespace helioset {

// ---------------------------------------------------------------------------
// Prior adapters

/// Chain parameter = nodal values; xi is a fresh SPDE sample.
class MaternPrior {
public:
    explicit MaternPrior(const MaternSampler& sampler) : sampler_(&sampler) {}

    Eigen::VectorXd draw(Rng& rng) const { return sampler_->sample(rng).values; }
    NodalField field(const Eigen::VectorXd& param) const { return {param}; }
    Eigen::Index dimension() const { return static_cast<Eigen::Index>(sampler_->node_count()); }

private:
    const MaternSampler* sampler_;
};

/// Chain parameter = RBF coefficients; xi ~ N(0, I_J).
class RbfPrior {
public:
    explicit RbfPrior(const RbfBasis& basis) : basis_(&basis) {}

    Eigen::VectorXd draw(Rng& rng) const { return sample_coefficients(basis_->size(), rng).a; }
    NodalField field(const Eigen::VectorXd& param) const { return rbf_eval(*basis_, {param}); }
    Eigen::Index dimension() const { return static_cast<Eigen::Index>(basis_->size()); }

private:
    const RbfBasis* basis_;
};

template <class P>
concept PriorAdapter = requires(const P& p, Rng& rng, const Eigen::VectorXd& v) {
    { p.draw(rng) } -> std::convertible_to<Eigen::VectorXd>;
    { p.field(v) } -> std::convertible_to<NodalField>;
    { p.dimension() } -> std::convertible_to<Eigen::Index>;
};

// ---------------------------------------------------------------------------
// Potential

struct Evaluation {
    double potential = 0.0;  // |K(phi) - b|^2 / (2 delta^2)
    double misfit = 0.0;     // |K(phi) - b|
};

/// Phi(phi) = |H G(phi) - b|^2 / (2 delta^2) over the stacked real and
/// imaginary parts of the N*M complex residual.
class Potential {
public:
    Potential(const ForwardSystem& forward, const DataVector& data, double delta, const LevelSetMap& map)
        : forward_(&forward), map_(&map), data_(stack(data)), delta_(delta) {
        if (!(delta > 0.0)) throw InvalidParameter("potential: delta must be positive");
        if (data.receivers != forward.receivers() || data.blocks != forward.blocks()) {
            throw DimensionMismatch("potential: data shape does not match the forward system");
        }
        if (map.quadrature_size() != static_cast<Eigen::Index>(forward.quadrature_size())) {
            throw DimensionMismatch("potential: level-set map and forward system use different quadrature");
        }
    }

    double delta() const { return delta_; }
    const LevelSetMap& level_set() const { return *map_; }
    const ForwardSystem& forward() const { return *forward_; }

    Eigen::VectorXd residual_of_source(const Eigen::VectorXd& source) const {
        return forward_->apply_stacked(source) - data_;
    }

    Evaluation evaluate_source(const Eigen::VectorXd& source) const {
        const double sq = residual_of_source(source).squaredNorm();
        return {sq / (2.0 * delta_ * delta_), std::sqrt(sq)};
    }

    Evaluation evaluate(const NodalField& phi) const { return evaluate_source((*map_)(phi)); }

    double operator()(const NodalField& phi) const { return evaluate(phi).potential; }

private:
    const ForwardSystem* forward_;
    const LevelSetMap* map_;
    Eigen::VectorXd data_;
    double delta_;
};

/// Potential that ignores the data; the chain then targets the prior.
struct FlatPotential {
    double level = 0.0;
    Evaluation evaluate(const NodalField&) const { return {level, 0.0}; }
};

template <class T>
concept PotentialLike = requires(const T& p, const NodalField& f) {
    { p.evaluate(f) } -> std::convertible_to<Evaluation>;
};

// ---------------------------------------------------------------------------
// Chain

struct ChainState {
    Eigen::VectorXd current;
    double potential = 0.0;
    double misfit = 0.0;
    std::uint64_t step = 0;
    std::uint64_t accepted = 0;
    double last_alpha = 1.0;
    Rng rng;
};

template <PriorAdapter Prior, PotentialLike Pot>
ChainState initial_state(const Prior& prior, const Pot& potential, bool from_prior, std::uint64_t seed) {
    ChainState s;
    s.rng = make_rng(seed);
    s.current = from_prior ? prior.draw(s.rng) : Eigen::VectorXd::Zero(prior.dimension());
    const auto e = potential.evaluate(prior.field(s.current));
    s.potential = e.potential;
    s.misfit = e.misfit;
    return s;
}

/// One pCN Metropolis-Hastings step. Returns true on acceptance.
template <PriorAdapter Prior, PotentialLike Pot>
bool pcn_step(ChainState& state, double beta, const Prior& prior, const Pot& potential) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InvalidParameter("pcn_step: beta must lie in (0, 1]");
    const Eigen::VectorXd xi = prior.draw(state.rng);
    const double keep = std::sqrt(1.0 - beta * beta);
    Eigen::VectorXd proposal = keep * state.current + beta * xi;
    const auto e = potential.evaluate(prior.field(proposal));
    // log-space ratio; never exponentiates a positive number
    const double log_ratio = state.potential - e.potential;
    state.last_alpha = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(state.rng);
    ++state.step;
    if (state.last_alpha > u) {
        state.current = std::move(proposal);
        state.potential = e.potential;
        state.misfit = e.misfit;
        ++state.accepted;
        return true;
    }
    return false;
}

struct ChainConfig {
    std::int64_t n_steps = 0;
    double beta = 0.01;
    std::int64_t burn_in = 0;
    std::int64_t thin = 10;
    bool init_from_prior = true;

    void validate() const {
        if (n_steps < 0) throw InvalidParameter("chain: steps must be >= 0");
        if (!(beta > 0.0 && beta <= 1.0)) throw InvalidParameter("chain: beta must lie in (0, 1]");
        if (thin < 1) throw InvalidParameter("chain: thin must be >= 1");
        if (burn_in < 0) throw InvalidParameter("chain: burn_in must be >= 0");
        if (n_steps > 0 && thin >= n_steps) throw InvalidParameter("chain: thin must be < steps");
        if (n_steps > 0 && burn_in >= n_steps) throw InvalidParameter("chain: burn_in must be < steps");
    }

    /// Retained samples: steps i in (burn_in, n_steps] with (i - burn_in) % thin == 0.
    std::int64_t retained() const { return n_steps > burn_in ? (n_steps - burn_in) / thin : 0; }
};

struct TraceRow {
    std::uint64_t step = 0;
    bool accepted = false;
    double potential = 0.0;
    double misfit = 0.0;
};

struct ChainDiagnostics {
    std::vector<TraceRow> trace;  // row 0 is the initial state
    std::uint64_t steps = 0;
    std::uint64_t accepted = 0;

    double acceptance_rate() const {
        return steps == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(steps);
    }
};

using SampleSink = std::function<void(const Eigen::VectorXd& param, std::uint64_t step)>;

template <PriorAdapter Prior, PotentialLike Pot>
ChainDiagnostics run_chain(const ChainConfig& config, const Prior& prior, const Pot& potential,
                           std::uint64_t seed, const SampleSink& sink) {
    config.validate();
    ChainState state = initial_state(prior, potential, config.init_from_prior, seed);
    ChainDiagnostics diag;
    diag.trace.reserve(static_cast<std::size_t>(config.n_steps) + 1);
    diag.trace.push_back({0, false, state.potential, state.misfit});
    for (std::int64_t i = 1; i <= config.n_steps; ++i) {
        const bool acc = pcn_step(state, config.beta, prior, potential);
        diag.trace.push_back({state.step, acc, state.potential, state.misfit});
        if (i > config.burn_in && (i - config.burn_in) % config.thin == 0 && sink) {
            sink(state.current, state.step);
        }
    }
    diag.steps = state.step;
    diag.accepted = state.accepted;
    return diag;
}

/// Collecting variant: returns the thinned post-burn-in samples.
template <PriorAdapter Prior, PotentialLike Pot>
std::pair<std::vector<Eigen::VectorXd>, ChainDiagnostics> run_chain(const ChainConfig& config,
                                                                    const Prior& prior,
                                                                    const Pot& potential,
                                                                    std::uint64_t seed) {
    std::vector<Eigen::VectorXd> samples;
    auto diag = run_chain(config, prior, potential, seed,
                          [&](const Eigen::VectorXd& p, std::uint64_t) { samples.push_back(p); });
    return {std::move(samples), std::move(diag)};
}

}  // namespace helioset

#endif  // HELIOSET_MCMC_HPP
