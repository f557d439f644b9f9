#include "geocover/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geocover/errors.hpp"

namespace geocover {

void SynthesisConfig::validate(const LocationSet& ls) const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be positive");
    if (alpha == 0 || alpha > n_users) throw InvalidArgument("need 0 < alpha <= N");
    if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in (0,1)");
    if (!ls.contains(report)) throw InvalidArgument("report location out of range");
    for (auto t : targets.ids())
        if (!ls.contains(t)) throw InvalidArgument("target out of range");
    if (!(p_min > 0.0) || p_min * static_cast<double>(ls.size()) >= 1.0)
        throw InvalidArgument("p_min must be positive and below 1/|L|");
}

double binomial_tail(std::size_t n, std::size_t alpha, double p) {
    if (alpha == 0) return 1.0;
    if (alpha > n) return 0.0;
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    const double lp = std::log(p), lq = std::log1p(-p);
    const double nn = static_cast<double>(n);
    const double lgn = std::lgamma(nn + 1.0);
    std::vector<double> terms;
    terms.reserve(n - alpha + 1);
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t m = alpha; m <= n; ++m) {
        const double mm = static_cast<double>(m);
        const double t = lgn - std::lgamma(mm + 1.0) - std::lgamma(nn - mm + 1.0) + mm * lp + (nn - mm) * lq;
        terms.push_back(t);
        hi = std::max(hi, t);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - hi);
    return std::min(1.0, std::exp(hi + std::log(s)));
}

double beta_from_binomial(std::size_t n, std::size_t alpha, double rho) {
    if (alpha == 0) throw InvalidArgument("alpha must be at least 1");
    if (alpha > n) throw InvalidArgument("alpha exceeds the number of users");
    if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in (0,1)");
    double lo = 1e-12, hi = 1.0;
    if (binomial_tail(n, alpha, lo) >= rho) return lo;
    // Pr(X >= alpha) is nondecreasing in beta: keep tail(lo) < rho <= tail(hi).
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (binomial_tail(n, alpha, mid) >= rho ? hi : lo) = mid;
    }
    return hi;
}

lp::LinearProgram build_mlcp_lp(const PriorDistribution& prior, const LocationSet& ls, const SynthesisConfig& config,
                                double beta) {
    config.validate(ls);
    const std::size_t n = ls.size();
    if (prior.size() != n) throw InvalidArgument("prior size does not match location set");
    lp::LinearProgram prog(n * n);
    auto var = [n](LocationId l, LocationId c) { return l * n + c; };

    for (auto t : config.targets.ids()) prog.objective()[var(t, config.report)] = prior[t] / beta;
    std::fill(prog.lower().begin(), prog.lower().end(), config.p_min);

    std::vector<double> row(n * n, 0.0);
    for (LocationId c = 0; c < n; ++c) {
        for (LocationId a = 0; a < n; ++a) {
            for (LocationId b = 0; b < n; ++b) {
                if (a == b) continue;
                row[var(a, c)] = 1.0;
                row[var(b, c)] = -std::exp(config.epsilon * ls.dist(a, b));
                prog.add_inequality(row, 0.0);
                row[var(a, c)] = row[var(b, c)] = 0.0;
            }
        }
    }
    for (LocationId l = 0; l < n; ++l) {
        for (LocationId c = 0; c < n; ++c) row[var(l, c)] = 1.0;
        prog.add_equality(row, 1.0);
        for (LocationId c = 0; c < n; ++c) row[var(l, c)] = 0.0;
    }
    for (LocationId l = 0; l < n; ++l) row[var(l, config.report)] = prior[l];
    prog.add_equality(row, beta);
    return prog;
}

lp::LinearProgram build_column_lp(const PriorDistribution& prior, const LocationSet& ls,
                                  const SynthesisConfig& config, double beta) {
    config.validate(ls);
    const std::size_t n = ls.size();
    if (prior.size() != n) throw InvalidArgument("prior size does not match location set");
    lp::LinearProgram prog(n);
    for (auto t : config.targets.ids()) prog.objective()[t] = prior[t] / beta;
    std::fill(prog.lower().begin(), prog.lower().end(), config.p_min);
    // every other column keeps at least p_min
    std::fill(prog.upper().begin(), prog.upper().end(), 1.0 - static_cast<double>(n - 1) * config.p_min);

    std::vector<double> row(n, 0.0);
    for (LocationId a = 0; a < n; ++a) {
        for (LocationId b = 0; b < n; ++b) {
            if (a == b) continue;
            const double e = std::exp(config.epsilon * ls.dist(a, b));
            // v(a) <= e v(b)
            row[a] = 1.0;
            row[b] = -e;
            prog.add_inequality(row, 0.0);
            // 1 - v(a) <= e (1 - v(b))
            row[a] = -1.0;
            row[b] = e;
            prog.add_inequality(row, e - 1.0);
            row[a] = row[b] = 0.0;
        }
    }
    for (LocationId l = 0; l < n; ++l) row[l] = prior[l];
    prog.add_equality(row, beta);
    return prog;
}

namespace {

// Lowers each entry to min_m e^{eps d(l,m)} v(m). Because d is a metric the
// result satisfies the column DP constraints exactly (up to rounding) and
// moves the LP solution by at most its residual.
void tighten_column(std::vector<double>& v, const LocationSet& ls, double epsilon) {
    const std::size_t n = v.size();
    std::vector<double> out(v);
    for (LocationId l = 0; l < n; ++l)
        for (LocationId m = 0; m < n; ++m) out[l] = std::min(out[l], std::exp(epsilon * ls.dist(l, m)) * v[m]);
    v = std::move(out);
}

}  // namespace

SynthesisResult synthesize_with_beta(const PriorDistribution& prior, const LocationSet& ls,
                                     const SynthesisConfig& config, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("beta must lie in (0,1]");
    const std::size_t n = ls.size();
    const bool full = config.formulation == LpFormulation::full;
    auto prog = full ? build_mlcp_lp(prior, ls, config, beta) : build_column_lp(prior, ls, config, beta);
    auto sol = lp::solve(prog, config.solver);
    if (sol.status != lp::Status::optimal)
        throw SynthesisInfeasible("coverage program is " + lp::to_string(sol.status) + " at beta " +
                                      std::to_string(beta),
                                  beta);

    std::vector<double> p(n * n);
    if (full) {
        for (LocationId l = 0; l < n; ++l) {
            double s = 0.0;
            for (LocationId c = 0; c < n; ++c) s += sol.x[l * n + c];
            for (LocationId c = 0; c < n; ++c) p[l * n + c] = sol.x[l * n + c] / s;
        }
    } else {
        std::vector<double> v = sol.x;
        tighten_column(v, ls, config.epsilon);
        for (LocationId l = 0; l < n; ++l) {
            const double rest = n > 1 ? (1.0 - v[l]) / static_cast<double>(n - 1) : 0.0;
            for (LocationId c = 0; c < n; ++c) p[l * n + c] = c == config.report ? (n > 1 ? v[l] : 1.0) : rest;
        }
    }
    ObfuscationPolicy policy(n, std::move(p), config.epsilon);
    double covered = 0.0;
    for (auto t : config.targets.ids()) covered += prior[t] * policy(t, config.report);
    return {std::move(policy), config.report, beta, covered / beta, sol.iterations};
}

SynthesisResult synthesize(const PriorDistribution& prior, const LocationSet& ls, const SynthesisConfig& config) {
    config.validate(ls);
    return synthesize_with_beta(prior, ls, config, beta_from_binomial(config.n_users, config.alpha, config.rho));
}

SweepResult beta_sweep(const PriorDistribution& prior, const LocationSet& ls, const SynthesisConfig& config,
                       const std::vector<double>& betas, double tol) {
    if (!std::is_sorted(betas.begin(), betas.end())) throw InvalidArgument("betas must be sorted ascending");
    SweepResult out;
    std::optional<double> prev;
    for (double b : betas) {
        SweepEntry e{b, std::nullopt, {}};
        try {
            e.objective = synthesize_with_beta(prior, ls, config, b).objective;
        } catch (const SynthesisInfeasible& err) {
            e.error = err.what();
        }
        if (e.objective) {
            if (prev && *e.objective > *prev + tol) out.nonincreasing = false;
            prev = e.objective;
        }
        out.entries.push_back(std::move(e));
    }
    return out;
}

}  // namespace geocover
