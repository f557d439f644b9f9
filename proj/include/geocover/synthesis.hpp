#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "geocover/location_space.hpp"
#include "geocover/lp.hpp"
#include "geocover/privacy.hpp"

namespace geocover {

/// Which linear program synthesize() solves.
enum class LpFormulation {
    /// Only the reported column as unknowns, with the DP constraints of the
    /// column and of its complement 1 - column; the other columns are filled
    /// with an even split of the complement. Same optimum as the full
    /// program, n variables instead of n^2.
    column,
    /// Every policy entry is a variable and every (l1, l2, l*) triple a row.
    full,
};

struct SynthesisConfig {
    double epsilon = std::log(4.0);
    TargetSet targets;
    std::size_t n_users = 0;
    std::size_t alpha = 0;
    double rho = 0.95;
    LocationId report = 0;  // designated reported location
    double p_min = 1e-9;    // floor on every policy entry
    LpFormulation formulation = LpFormulation::column;
    lp::SolverOptions solver{};

    /// Throws InvalidArgument unless 0 < alpha <= n_users, 0 < rho < 1,
    /// epsilon > 0 and p_min is small enough for the location count.
    void validate(const LocationSet& ls) const;
};

struct SynthesisResult {
    ObfuscationPolicy policy;
    LocationId report = 0;
    double beta = 0.0;
    double objective = 0.0;  // sum_t pi(t) P(report|t) / beta
    std::size_t lp_iterations = 0;
};

/// Pr(X >= alpha) for X ~ Binomial(n, p), summed in log space.
double binomial_tail(std::size_t n, std::size_t alpha, double p);

/// Smallest beta in (0,1] with Pr(X >= alpha) >= rho, X ~ Binomial(n, beta),
/// by bisection to 1e-12.
double beta_from_binomial(std::size_t n, std::size_t alpha, double rho);

/// Full-matrix program: variable l*n + c is P(c|l). Rows: n^2 (n-1)
/// nontrivial DP inequalities grouped by column, then n row-sum equalities
/// and the beta equality last.
lp::LinearProgram build_mlcp_lp(const PriorDistribution& prior, const LocationSet& ls, const SynthesisConfig& config,
                                double beta);

/// Reduced program over the reported column only (see LpFormulation).
lp::LinearProgram build_column_lp(const PriorDistribution& prior, const LocationSet& ls,
                                  const SynthesisConfig& config, double beta);

/// Picks beta with beta_from_binomial and solves the coverage program once.
/// Throws SynthesisInfeasible when the program has no feasible point.
SynthesisResult synthesize(const PriorDistribution& prior, const LocationSet& ls, const SynthesisConfig& config);
SynthesisResult synthesize_with_beta(const PriorDistribution& prior, const LocationSet& ls,
                                     const SynthesisConfig& config, double beta);

struct SweepEntry {
    double beta = 0.0;
    std::optional<double> objective;  // empty when infeasible
    std::string error;
};

/// Solves once per beta. `nonincreasing` reports whether the feasible
/// objectives never rise by more than `tol` as beta grows.
struct SweepResult {
    std::vector<SweepEntry> entries;
    bool nonincreasing = true;
};
SweepResult beta_sweep(const PriorDistribution& prior, const LocationSet& ls, const SynthesisConfig& config,
                       const std::vector<double>& betas, double tol = 1e-8);

}  // namespace geocover
