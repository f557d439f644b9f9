#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geocover/location_space.hpp"
#include "geocover/mobility.hpp"
#include "geocover/privacy.hpp"
#include "geocover/rng.hpp"

namespace geocover {

/// The server's only view of a user. Implementations keep the mobility
/// profile private and hand back a single (obfuscated) location or NULL.
class Client {
public:
    virtual ~Client() = default;
    virtual const UserId& id() const = 0;
    /// Picks one frequent location (probability > delta) and obfuscates it
    /// with `policy`; nullopt means the user uploads NULL.
    virtual std::optional<LocationId> upload(const ObfuscationPolicy& policy, double delta, Rng& rng) = 0;
    /// Same pick without obfuscation (no-obfuscation baseline only).
    virtual std::optional<LocationId> upload_plain(double delta, Rng& rng) = 0;
};

/// Client backed by a locally computed mobility profile.
class ProfileClient final : public Client {
public:
    explicit ProfileClient(MobilityProfile profile) : profile_(std::move(profile)) {}
    const UserId& id() const override { return profile_.user; }
    std::optional<LocationId> upload(const ObfuscationPolicy& policy, double delta, Rng& rng) override;
    std::optional<LocationId> upload_plain(double delta, Rng& rng) override;

private:
    MobilityProfile profile_;
};

/// Random partition of `count` items into k groups whose sizes differ by at
/// most one. Throws InvalidArgument if k is 0 or exceeds count.
std::vector<std::vector<std::size_t>> split_groups(std::size_t count, std::size_t k, Rng& rng);

/// Single-upload Bayes update; same contract as posterior().
PriorDistribution bayes_update(const PriorDistribution& prior, const ObfuscationPolicy& policy, LocationId observed);

struct MeanPosterior {
    std::optional<PriorDistribution> mean;  // empty when nothing could be averaged
    std::size_t skipped = 0;                // observations with zero marginal probability
};

/// Mean of per-upload posteriors. The serial path follows the per-user loop;
/// the parallel path computes one posterior per distinct observed location
/// (OpenMP over locations) and weights by counts.
MeanPosterior mean_posterior(const PriorDistribution& prior, const ObfuscationPolicy& policy,
                             std::span<const LocationId> observed, Execution execution = Execution::parallel);

/// sum p ln(p/q); +infinity if q vanishes where p does not.
double kl_divergence(const PriorDistribution& p, const PriorDistribution& q);

/// beta for the remaining pool after discounting the estimated NULL share.
/// Throws SynthesisInfeasible when fewer than alpha uploaders remain.
double adjust_beta_for_null(std::size_t n_remaining, double null_fraction, std::size_t alpha, double rho);

enum class Mechanism {
    optimal,  // coverage LP per group
    laplace,  // fixed Laplace policy, best column under the current estimate
};

/// Population size each group's beta is designed against.
enum class BetaPool {
    population,  // all N users, as in the single-shot design; matches from every group are pooled
    remaining,   // users that have not uploaded yet (groups i..k)
};

struct SelectionParams {
    double epsilon = 1.3862943611198906;  // ln 4
    double delta = 0.7;
    std::size_t k = 6;
    std::size_t alpha = 1;
    double rho = 0.95;
    LocationId report = 0;
    double p_min = 1e-9;
    Mechanism mechanism = Mechanism::optimal;
    double laplace_kernel_scale = 0.5;
    std::optional<PriorDistribution> initial_prior;  // uniform when empty
    std::optional<PriorDistribution> truth;          // enables the KL trajectory
    Execution execution = Execution::parallel;
    BetaPool beta_pool = BetaPool::population;
};

struct GroupStats {
    std::size_t size = 0;
    std::size_t nulls = 0;
    std::size_t skipped = 0;  // uploads left out of the prior update
    double null_fraction = 0.0;
    LocationId report = 0;
    double beta = 0.0;        // beta used for synthesis (0 for Laplace)
    double objective = 0.0;   // expected coverage of a user reporting `report`
    std::size_t matches = 0;  // users whose upload equals `report`
    std::size_t selected = 0;
};

struct SelectionResult {
    std::vector<UserId> selected;
    std::vector<std::size_t> selected_group;  // group of each selected user
    PriorDistribution final_prior;
    std::vector<GroupStats> groups;
    std::vector<double> kl_trajectory;  // KL(estimate || truth) before and after each group
    std::size_t oracle_calls = 0;
};

/// Group-by-group upload, prior refinement and biased selection: later
/// groups are scanned first when picking the alpha users.
SelectionResult run_selection(std::span<Client* const> clients, const LocationSet& ls, const TargetSet& targets,
                              const SelectionParams& params, Rng& rng);

}  // namespace geocover
