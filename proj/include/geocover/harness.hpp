#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "geocover/location_space.hpp"
#include "geocover/mobility.hpp"
#include "geocover/privacy.hpp"
#include "geocover/rng.hpp"
#include "geocover/selection.hpp"

namespace geocover {

enum class PriorShape { uniform, hotspot };

/// Synthetic world: a grid, a home distribution and Poisson visit counts.
struct WorldConfig {
    std::size_t rows = 5;
    std::size_t cols = 5;
    double cell_km = 1.0;
    std::size_t n_users = 600;
    PriorShape prior = PriorShape::hotspot;
    double hotspot_scale_km = 1.5;  // home weight exp(-d(l, center) / scale)
    double lambda_home = 2.0;       // mean visits per period at home
    double home_rate_spread = 0.5;  // per-user home rate ~ lambda_home * U[1-s, 1+s]
    double lambda_bg = 0.2;         // mean visits per period at every other location
    double bg_shape = 0.5;          // > 0: per user-location rate ~ Gamma(shape, lambda_bg/shape); 0: constant
    std::size_t train_periods = 28;
    std::size_t test_periods = 1;
    Period period = Period::daily;
    std::uint64_t seed = 1;

    void validate() const;
};

struct World {
    LocationSet locations;
    TraceSet traces;
    PriorDistribution truth;          // home distribution
    std::vector<LocationId> homes;    // per user, in traces.users() order
};

/// Each user draws a home from the truth prior; per period and location the
/// visit count is Poisson(lambda_home_u) at home and Poisson of a per
/// user-location background rate elsewhere, timestamps uniform inside the period.
World generate_world(const WorldConfig& config);

/// Home distribution implied by the config, without generating traces.
PriorDistribution world_prior(const WorldConfig& config, const LocationSet& ls);

/// Share of selected users with at least one test-period event at a target.
/// Throws UndefinedMetric for an empty selection.
double evaluate_coverage(std::span<const UserId> selected, const TraceSet& traces, const TargetSet& targets);

/// Users upload a true frequent location; up to alpha of those landing in
/// the targets are picked in random order.
std::vector<UserId> run_baseline_no(std::span<Client* const> clients, double delta, const TargetSet& targets,
                                    std::size_t alpha, Rng& rng);
/// Uniform random alpha-subset (all users if alpha >= count).
std::vector<UserId> run_baseline_random(std::span<const UserId> users, std::size_t alpha, Rng& rng);
/// The grouped selection pipeline with the Laplace mechanism in every group.
SelectionResult run_baseline_laplace(std::span<Client* const> clients, const LocationSet& ls,
                                     const TargetSet& targets, const SelectionParams& params, Rng& rng);

/// "ln4", "ln(4)" or a plain real.
double parse_epsilon(const std::string& text);
std::string format_epsilon(double epsilon);

enum class Method { ours, laplace, no, random };
std::string to_string(Method m);
Method parse_method(const std::string& s);

struct ExperimentConfig {
    WorldConfig world;
    std::vector<double> epsilons{1.3862943611198906};
    std::vector<double> deltas{0.7};
    std::vector<std::size_t> target_counts{1};
    std::vector<LocationId> targets;  // fixed targets; overrides target_counts
    double alpha_frac = 0.05;
    double rho = 0.95;
    std::size_t k = 6;
    double p_min = 1e-9;
    double laplace_kernel_scale = 0.5;
    ProfileMethod profiler = ProfileMethod::poisson;
    BetaPool beta_pool = BetaPool::population;
    std::vector<Method> methods{Method::ours, Method::laplace, Method::no, Method::random};
    std::size_t trials = 50;
    std::uint64_t seed = 1;

    std::size_t alpha() const;
    void validate() const;
};

/// Flat `key = value` file; '#' starts a comment. Unknown keys throw
/// ParseError. Lists are comma-separated.
ExperimentConfig load_config(const std::filesystem::path& path);
void apply_config_entry(ExperimentConfig& config, const std::string& key, const std::string& value);

struct ReportRow {
    Method method = Method::ours;
    double epsilon = 0.0;
    double delta = 0.0;
    std::size_t n_targets = 0;
    std::size_t trial = 0;
    std::optional<double> coverage;
    std::size_t selected = 0;
    std::optional<double> kl_final;
    std::string error;
};

struct Summary {
    Method method = Method::ours;
    double epsilon = 0.0;
    double delta = 0.0;
    std::size_t n_targets = 0;
    std::size_t ok = 0;
    std::size_t failed = 0;
    double coverage_mean = 0.0;
    double coverage_stderr = 0.0;
    double selected_mean = 0.0;
    std::optional<double> kl_mean;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<ReportRow> rows;  // ordered by trial, then epsilon, delta, targets, method
    std::vector<Summary> summaries;
    std::vector<std::vector<double>> kl_trajectories;  // ours, first setting, one per trial

    const Summary* find(Method m, double epsilon, double delta, std::size_t n_targets) const;
};

/// Runs every (epsilon, delta, target count, method) combination on a fresh
/// world per trial. Trials run in parallel with seeds mix_seed(seed, trial);
/// the report does not depend on the thread count.
ExperimentReport run_experiment(const ExperimentConfig& config);

void write_report_csv(const ExperimentReport& report, std::ostream& out);
void write_report_json(const ExperimentReport& report, std::ostream& out);

/// Clients for every user of a trace set, profiled with `method`.
std::vector<std::unique_ptr<Client>> make_clients(const TraceSet& traces, ProfileMethod method);

}  // namespace geocover
