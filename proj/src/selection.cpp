#include "geocover/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geocover/errors.hpp"
#include "geocover/synthesis.hpp"

namespace geocover {

std::optional<LocationId> ProfileClient::upload(const ObfuscationPolicy& policy, double delta, Rng& rng) {
    auto l = pick_frequent_location(profile_, delta, rng);
    if (!l) return std::nullopt;
    return obfuscate(policy, *l, rng);
}

std::optional<LocationId> ProfileClient::upload_plain(double delta, Rng& rng) {
    return pick_frequent_location(profile_, delta, rng);
}

std::vector<std::vector<std::size_t>> split_groups(std::size_t count, std::size_t k, Rng& rng) {
    if (k == 0) throw InvalidArgument("need at least one group");
    if (k > count) throw InvalidArgument("more groups than users");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> groups(k);
    const std::size_t base = count / k, extra = count % k;
    auto it = order.begin();
    for (std::size_t g = 0; g < k; ++g) {
        const auto len = static_cast<std::ptrdiff_t>(base + (g < extra ? 1 : 0));
        groups[g].assign(it, it + len);
        it += len;
    }
    return groups;
}

PriorDistribution bayes_update(const PriorDistribution& prior, const ObfuscationPolicy& policy, LocationId observed) {
    return posterior(prior, policy, observed);
}

MeanPosterior mean_posterior(const PriorDistribution& prior, const ObfuscationPolicy& policy,
                             std::span<const LocationId> observed, Execution execution) {
    const std::size_t n = policy.size();
    if (prior.size() != n) throw InvalidArgument("prior size does not match policy");
    MeanPosterior out;
    std::vector<double> acc(n, 0.0);
    std::size_t used = 0;

    if (execution == Execution::serial) {
        for (auto o : observed) {
            try {
                auto post = bayes_update(prior, policy, o);
                for (LocationId l = 0; l < n; ++l) acc[l] += post[l];
                ++used;
            } catch (const DegenerateObservation&) {
                ++out.skipped;
            }
        }
    } else {
        std::vector<std::size_t> counts(n, 0);
        for (auto o : observed) {
            if (o >= n) throw InvalidArgument("observed location out of range");
            ++counts[o];
        }
        std::vector<double> posts(n * n, 0.0);
        std::vector<char> degenerate(n, 0);
        const auto cols = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
        for (std::int64_t c = 0; c < cols; ++c) {
            if (counts[c] == 0) continue;
            double denom = 0.0;
            for (LocationId l = 0; l < n; ++l) denom += posts[c * n + l] = prior[l] * policy(l, c);
            if (!(denom > 0.0)) {
                degenerate[c] = 1;
                continue;
            }
            for (LocationId l = 0; l < n; ++l) posts[c * n + l] /= denom;
        }
        for (LocationId c = 0; c < n; ++c) {
            if (counts[c] == 0) continue;
            if (degenerate[c]) {
                out.skipped += counts[c];
                continue;
            }
            const double w = static_cast<double>(counts[c]);
            for (LocationId l = 0; l < n; ++l) acc[l] += w * posts[c * n + l];
            used += counts[c];
        }
    }
    if (used > 0) out.mean = PriorDistribution::normalized(std::move(acc));
    return out;
}

double kl_divergence(const PriorDistribution& p, const PriorDistribution& q) {
    if (p.size() != q.size()) throw InvalidArgument("distributions differ in size");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(0.0, kl);
}

double adjust_beta_for_null(std::size_t n_remaining, double null_fraction, std::size_t alpha, double rho) {
    if (!(null_fraction >= 0.0 && null_fraction < 1.0)) throw InvalidArgument("null fraction must lie in [0,1)");
    const auto effective =
        static_cast<std::size_t>(std::llround(static_cast<double>(n_remaining) * (1.0 - null_fraction)));
    if (effective < alpha)
        throw SynthesisInfeasible("only " + std::to_string(effective) + " expected uploaders for alpha " +
                                      std::to_string(alpha),
                                  std::numeric_limits<double>::quiet_NaN());
    return beta_from_binomial(effective, alpha, rho);
}

SelectionResult run_selection(std::span<Client* const> clients, const LocationSet& ls, const TargetSet& targets,
                              const SelectionParams& params, Rng& rng) {
    const std::size_t n = ls.size();
    if (params.alpha == 0) throw InvalidArgument("alpha must be at least 1");
    PriorDistribution estimate = params.initial_prior.value_or(PriorDistribution::uniform(n));
    if (estimate.size() != n) throw InvalidArgument("initial prior size does not match location set");

    auto groups = split_groups(clients.size(), params.k, rng);
    std::vector<std::optional<LocationId>> uploads(clients.size());
    SelectionResult result{{}, {}, estimate, {}, {}, 0};
    if (params.truth) result.kl_trajectory.push_back(kl_divergence(estimate, *params.truth));

    std::size_t seen = 0, seen_null = 0, remaining = clients.size();
    std::optional<ObfuscationPolicy> laplace;
    if (params.mechanism == Mechanism::laplace)
        laplace = laplace_policy(ls, params.epsilon, params.laplace_kernel_scale);

    for (const auto& group : groups) {
        GroupStats stats;
        stats.size = group.size();

        std::optional<ObfuscationPolicy> synthesized;
        const ObfuscationPolicy* policy = nullptr;
        if (params.mechanism == Mechanism::optimal) {
            const double null_est = seen ? static_cast<double>(seen_null) / static_cast<double>(seen) : 0.0;
            const std::size_t pool = params.beta_pool == BetaPool::population ? clients.size() : remaining;
            stats.beta = adjust_beta_for_null(pool, null_est, params.alpha, params.rho);
            SynthesisConfig cfg{params.epsilon, targets, pool, params.alpha, params.rho, params.report,
                                params.p_min};
            auto syn = synthesize_with_beta(estimate, ls, cfg, stats.beta);
            stats.report = syn.report;
            stats.objective = syn.objective;
            synthesized.emplace(std::move(syn.policy));
            policy = &*synthesized;
        } else {
            policy = &*laplace;
            double best = -1.0;
            for (LocationId c = 0; c < n; ++c) {
                const double s = coverage_score(estimate, *policy, c, targets);
                if (s > best) {
                    best = s;
                    stats.report = c;
                }
            }
            stats.objective = best;
        }

        std::vector<LocationId> observed;
        observed.reserve(group.size());
        for (auto u : group) {
            uploads[u] = clients[u]->upload(*policy, params.delta, rng);
            ++result.oracle_calls;
            if (uploads[u]) {
                observed.push_back(*uploads[u]);
                if (*uploads[u] == stats.report) ++stats.matches;
            } else {
                ++stats.nulls;
            }
        }
        stats.null_fraction = group.empty() ? 0.0 : static_cast<double>(stats.nulls) / static_cast<double>(group.size());

        auto mean = mean_posterior(estimate, *policy, observed, params.execution);
        stats.skipped = mean.skipped;
        if (mean.mean) estimate = std::move(*mean.mean);
        if (params.truth) result.kl_trajectory.push_back(kl_divergence(estimate, *params.truth));

        seen += group.size();
        seen_null += stats.nulls;
        remaining -= group.size();
        result.groups.push_back(stats);
    }

    for (std::size_t j = groups.size(); j-- > 0 && result.selected.size() < params.alpha;) {
        for (auto u : groups[j]) {
            if (uploads[u] && *uploads[u] == result.groups[j].report) {
                result.selected.push_back(clients[u]->id());
                result.selected_group.push_back(j);
                ++result.groups[j].selected;
                if (result.selected.size() == params.alpha) break;
            }
        }
    }
    result.final_prior = std::move(estimate);
    return result;
}

}  // namespace geocover
