#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "geocover/location_space.hpp"
#include "geocover/rng.hpp"

namespace geocover {

enum class Execution { serial, parallel };

/// Distribution over the location universe (sums to 1 within 1e-9).
class PriorDistribution {
public:
    explicit PriorDistribution(std::vector<double> probs);

    static PriorDistribution uniform(std::size_t n);
    /// Scales non-negative weights to sum 1.
    static PriorDistribution normalized(std::vector<double> weights);

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](LocationId l) const noexcept { return probs_[l]; }
    std::span<const double> probs() const noexcept { return probs_; }

private:
    std::vector<double> probs_;
};

/// Row-stochastic matrix; entry (l, l*) is the probability of reporting l*
/// when the true frequent location is l. `epsilon` is the budget the policy
/// claims, in 1/km.
class ObfuscationPolicy {
public:
    ObfuscationPolicy(std::size_t n, std::vector<double> row_major, double epsilon);

    std::size_t size() const noexcept { return n_; }
    double epsilon() const noexcept { return epsilon_; }
    double operator()(LocationId l, LocationId reported) const noexcept { return p_[l * n_ + reported]; }
    std::span<const double> row(LocationId l) const noexcept { return {p_.data() + l * n_, n_}; }
    std::span<const double> data() const noexcept { return p_; }

private:
    std::size_t n_;
    std::vector<double> p_;
    double epsilon_;
};

/// `id,prob` CSV with dense ids; probabilities must already sum to 1.
PriorDistribution load_prior(const std::filesystem::path& path, std::size_t num_locations);
void save_prior(const PriorDistribution& prior, const std::filesystem::path& path);

void save_policy(const ObfuscationPolicy& policy, const std::filesystem::path& path);
ObfuscationPolicy load_policy(const std::filesystem::path& path);

struct DPReport {
    double max_violation = 0.0;                 // max P(l*|l1) / (e^{eps d} P(l*|l2)) - 1
    std::array<LocationId, 3> worst_triple{};   // (l1, l2, l*)
    bool certified = false;                     // max_violation <= tol
    bool exhaustive = true;
    std::uint64_t triples_checked = 0;
};

struct VerifyOptions {
    double tol = 1e-8;
    Execution execution = Execution::parallel;
    /// Above this size, a fixed-seed random sample of triples is checked.
    std::size_t exhaustive_limit = 64;
    std::uint64_t sample_triples = 1'000'000;
    std::uint64_t sample_seed = 0x5eed;
};

/// Checks P(l*|l1) <= e^{eps d(l1,l2)} P(l*|l2) for every triple. The worst
/// triple is the first maximum in (l*, l1, l2) order, independent of the
/// execution mode.
DPReport verify_geo_dp(const ObfuscationPolicy& policy, const LocationSet& ls, double epsilon,
                       const VerifyOptions& opts = {});

/// Bayes posterior over the true location after observing `observed`.
/// Throws DegenerateObservation when the observation has zero probability.
PriorDistribution posterior(const PriorDistribution& prior, const ObfuscationPolicy& policy, LocationId observed);

/// Posterior mass on the targets after observing `observed`.
double coverage_score(const PriorDistribution& prior, const ObfuscationPolicy& policy, LocationId observed,
                      const TargetSet& targets);

/// Discretized Laplace mechanism: entry (l, l*) proportional to
/// exp(-kernel_scale * eps * d(l, l*)), rows normalized. With the default
/// scale of 0.5 the normalization cannot push any ratio past e^{eps d}.
ObfuscationPolicy laplace_policy(const LocationSet& ls, double epsilon, double kernel_scale = 0.5);

/// Samples a reported location from row `actual`.
LocationId obfuscate(const ObfuscationPolicy& policy, LocationId actual, Rng& rng);

struct BoundValue {
    double value = 0.0;
    bool zero_prior = false;  // the target has no prior mass; value forced to 0
};

/// Best coverage any eps-geo-DP policy can reach for a single target:
/// pi(t) / sum_l pi(l) e^{-eps d(l,t)}.
BoundValue slcp_upper_bound(const PriorDistribution& prior, const LocationSet& ls, LocationId target,
                            double epsilon);

/// Largest theta for which the closed-form single-target policy stays
/// eps-geo-DP; +infinity for a single location. Pairs whose denominator is
/// not positive impose no constraint on theta and are skipped.
double compute_tau(const LocationSet& ls, LocationId target, double epsilon);

/// Closed-form optimum for one target: column `report` is
/// theta * e^{-eps d(l,t)}, the remaining row mass is spread evenly over the
/// other columns. theta defaults to tau.
ObfuscationPolicy slcp_analytic_policy(const LocationSet& ls, LocationId target, double epsilon, LocationId report,
                                       std::optional<double> theta = std::nullopt);

/// Upper bound on multi-target coverage:
/// (1 + sum_{l not in T} pi(l) / sum_{t in T} pi(t) e^{eps d(l,t)})^{-1}.
/// Throws DegenerateObservation if a target has zero prior mass.
double mlcp_upper_bound(const PriorDistribution& prior, const LocationSet& ls, const TargetSet& targets,
                        double epsilon);

/// The separable closed form
/// (1 + sum_{l not in T} sum_{t in T} pi(l)/pi(t) e^{-eps d(l,t)})^{-1}.
/// Equals mlcp_upper_bound for one target and is strictly smaller for more,
/// where it no longer bounds the optimum. Kept for comparison.
double mlcp_upper_bound_separable(const PriorDistribution& prior, const LocationSet& ls, const TargetSet& targets,
                                  double epsilon);

/// Necessary condition for the multi-target bound to be attainable: the
/// distance difference to any two targets is the same from every non-target.
bool mlcp_bound_feasible(const LocationSet& ls, const TargetSet& targets, double tol = 1e-9);

}  // namespace geocover
