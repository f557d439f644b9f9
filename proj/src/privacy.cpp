#include "geocover/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <string>

#include <json.hpp>

#include "csv.hpp"
#include "geocover/errors.hpp"

namespace geocover {
namespace {

constexpr double kSumTol = 1e-9;

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void check_prior_size(const PriorDistribution& prior, std::size_t n) {
    if (prior.size() != n)
        throw InvalidArgument("prior has " + std::to_string(prior.size()) + " entries, expected " + std::to_string(n));
}

}  // namespace

PriorDistribution::PriorDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InvalidArgument("prior must not be empty");
    for (double p : probs_)
        if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("prior entries must be finite and non-negative");
    if (std::abs(sum(probs_) - 1.0) > kSumTol) throw InvalidArgument("prior does not sum to 1");
}

PriorDistribution PriorDistribution::uniform(std::size_t n) {
    if (n == 0) throw InvalidArgument("prior must not be empty");
    return PriorDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

PriorDistribution PriorDistribution::normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be finite and non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidArgument("weights sum to zero");
    for (double& w : weights) w /= total;
    return PriorDistribution(std::move(weights));
}

ObfuscationPolicy::ObfuscationPolicy(std::size_t n, std::vector<double> row_major, double epsilon)
    : n_(n), p_(std::move(row_major)), epsilon_(epsilon) {
    if (n_ == 0 || p_.size() != n_ * n_) throw InvalidArgument("policy matrix must be n x n with n >= 1");
    if (!(epsilon_ >= 0.0) || !std::isfinite(epsilon_)) throw InvalidArgument("policy epsilon must be non-negative");
    for (std::size_t l = 0; l < n_; ++l) {
        auto r = row(l);
        for (double v : r)
            if (!(v > 0.0) || !std::isfinite(v))
                throw InvalidArgument("policy entries must be positive (row " + std::to_string(l) + ")");
        if (std::abs(sum(r) - 1.0) > kSumTol)
            throw InvalidArgument("policy row " + std::to_string(l) + " does not sum to 1");
    }
}

PriorDistribution load_prior(const std::filesystem::path& path, std::size_t num_locations) {
    std::vector<double> probs(num_locations, 0.0);
    std::vector<std::size_t> seen(num_locations, 0);
    csv::for_each_row(path.string(), {"id", "prob"}, [&](const auto& f, std::size_t line) {
        auto id = csv::parse_int(f[0], line, "id");
        if (id < 0 || static_cast<std::size_t>(id) >= num_locations)
            throw ParseError("id " + std::string(f[0]) + " outside the location set", line);
        if (seen[id]) throw ParseError("duplicate id " + std::string(f[0]), line);
        seen[id] = line;
        probs[id] = csv::parse_double(f[1], line, "prob");
    });
    for (std::size_t l = 0; l < num_locations; ++l)
        if (!seen[l]) throw ParseError(path.string() + ": missing id " + std::to_string(l));
    try {
        return PriorDistribution(std::move(probs));
    } catch (const InvalidArgument& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_prior(const PriorDistribution& prior, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "id,prob\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t l = 0; l < prior.size(); ++l) out << l << ',' << prior[l] << '\n';
}

void save_policy(const ObfuscationPolicy& policy, const std::filesystem::path& path) {
    nlohmann::json j;
    j["epsilon"] = policy.epsilon();
    j["locations"] = policy.size();
    auto& rows = j["rows"] = nlohmann::json::array();
    for (std::size_t l = 0; l < policy.size(); ++l) {
        auto r = policy.row(l);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump() << '\n';
}

ObfuscationPolicy load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        auto j = nlohmann::json::parse(in);
        const auto n = j.at("locations").get<std::size_t>();
        const auto& rows = j.at("rows");
        if (rows.size() != n) throw ParseError("policy has " + std::to_string(rows.size()) + " rows, expected " +
                                               std::to_string(n));
        std::vector<double> flat;
        flat.reserve(n * n);
        for (const auto& r : rows) {
            if (r.size() != n) throw ParseError("policy row of wrong length");
            for (const auto& v : r) flat.push_back(v.get<double>());
        }
        return ObfuscationPolicy(n, std::move(flat), j.at("epsilon").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

namespace {

struct ColumnWorst {
    double violation = -std::numeric_limits<double>::infinity();
    LocationId l1 = 0, l2 = 0;
};

// Worst ratio within one reported column; scans (l1, l2) in row-major order
// and keeps the first maximum.
ColumnWorst column_worst(const ObfuscationPolicy& policy, std::span<const double> budget, LocationId col) {
    const std::size_t n = policy.size();
    ColumnWorst w;
    for (LocationId l1 = 0; l1 < n; ++l1) {
        const double p1 = policy(l1, col);
        for (LocationId l2 = 0; l2 < n; ++l2) {
            const double v = p1 / (budget[l1 * n + l2] * policy(l2, col)) - 1.0;
            if (v > w.violation) w = {v, l1, l2};
        }
    }
    return w;
}

}  // namespace

DPReport verify_geo_dp(const ObfuscationPolicy& policy, const LocationSet& ls, double epsilon,
                       const VerifyOptions& opts) {
    const std::size_t n = policy.size();
    if (ls.size() != n) throw InvalidArgument("policy and location set differ in size");
    std::vector<double> budget(n * n);
    for (std::size_t i = 0; i < n * n; ++i) budget[i] = std::exp(epsilon * ls.dist(i / n, i % n));

    DPReport report;
    report.max_violation = -std::numeric_limits<double>::infinity();

    if (n <= opts.exhaustive_limit) {
        std::vector<ColumnWorst> cols(n);
        if (opts.execution == Execution::parallel) {
            const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
            for (std::int64_t c = 0; c < count; ++c) cols[c] = column_worst(policy, budget, c);
        } else {
            for (LocationId c = 0; c < n; ++c) cols[c] = column_worst(policy, budget, c);
        }
        for (LocationId c = 0; c < n; ++c) {
            if (cols[c].violation > report.max_violation) {
                report.max_violation = cols[c].violation;
                report.worst_triple = {cols[c].l1, cols[c].l2, c};
            }
        }
        report.triples_checked = static_cast<std::uint64_t>(n) * n * n;
    } else {
        report.exhaustive = false;
        Rng rng(opts.sample_seed);
        std::uniform_int_distribution<LocationId> pick(0, n - 1);
        for (std::uint64_t s = 0; s < opts.sample_triples; ++s) {
            const LocationId l1 = pick(rng), l2 = pick(rng), c = pick(rng);
            const double v = policy(l1, c) / (budget[l1 * n + l2] * policy(l2, c)) - 1.0;
            if (v > report.max_violation) {
                report.max_violation = v;
                report.worst_triple = {l1, l2, c};
            }
        }
        report.triples_checked = opts.sample_triples;
    }
    report.certified = report.max_violation <= opts.tol;
    return report;
}

PriorDistribution posterior(const PriorDistribution& prior, const ObfuscationPolicy& policy, LocationId observed) {
    const std::size_t n = policy.size();
    check_prior_size(prior, n);
    if (observed >= n) throw InvalidArgument("observed location out of range");
    std::vector<double> post(n);
    double denom = 0.0;
    for (LocationId l = 0; l < n; ++l) {
        post[l] = prior[l] * policy(l, observed);
        denom += post[l];
    }
    if (!(denom > 0.0))
        throw DegenerateObservation("location " + std::to_string(observed) + " has zero marginal probability");
    for (double& p : post) p /= denom;
    return PriorDistribution(std::move(post));
}

double coverage_score(const PriorDistribution& prior, const ObfuscationPolicy& policy, LocationId observed,
                      const TargetSet& targets) {
    const std::size_t n = policy.size();
    check_prior_size(prior, n);
    if (observed >= n) throw InvalidArgument("observed location out of range");
    double num = 0.0, denom = 0.0;
    for (LocationId l = 0; l < n; ++l) {
        const double m = prior[l] * policy(l, observed);
        denom += m;
        if (targets.contains(l)) num += m;
    }
    if (!(denom > 0.0))
        throw DegenerateObservation("location " + std::to_string(observed) + " has zero marginal probability");
    return std::min(1.0, num / denom);
}

ObfuscationPolicy laplace_policy(const LocationSet& ls, double epsilon, double kernel_scale) {
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (!(kernel_scale > 0.0)) throw InvalidArgument("kernel scale must be positive");
    const std::size_t n = ls.size();
    std::vector<double> p(n * n);
    for (LocationId l = 0; l < n; ++l) {
        double z = 0.0;
        for (LocationId c = 0; c < n; ++c) z += p[l * n + c] = std::exp(-kernel_scale * epsilon * ls.dist(l, c));
        for (LocationId c = 0; c < n; ++c) p[l * n + c] /= z;
    }
    return ObfuscationPolicy(n, std::move(p), epsilon);
}

LocationId obfuscate(const ObfuscationPolicy& policy, LocationId actual, Rng& rng) {
    if (actual >= policy.size()) throw InvalidArgument("location out of range");
    auto row = policy.row(actual);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng);
    for (LocationId c = 0; c + 1 < row.size(); ++c) {
        x -= row[c];
        if (x < 0.0) return c;
    }
    return row.size() - 1;
}

BoundValue slcp_upper_bound(const PriorDistribution& prior, const LocationSet& ls, LocationId target, double epsilon) {
    check_prior_size(prior, ls.size());
    if (!ls.contains(target)) throw InvalidArgument("target out of range");
    if (prior[target] == 0.0) return {0.0, true};
    double denom = 0.0;
    for (LocationId l = 0; l < ls.size(); ++l) denom += prior[l] * std::exp(-epsilon * ls.dist(l, target));
    return {std::min(1.0, prior[target] / denom), false};
}

double compute_tau(const LocationSet& ls, LocationId target, double epsilon) {
    if (!ls.contains(target)) throw InvalidArgument("target out of range");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    const std::size_t n = ls.size();
    double tau = std::numeric_limits<double>::infinity();
    for (LocationId a = 0; a < n; ++a) {
        for (LocationId b = 0; b < n; ++b) {
            if (a == b) continue;
            const double dab = ls.dist(a, b);
            const double num = std::expm1(epsilon * dab);
            const double den = std::exp(-epsilon * (ls.dist(b, target) - dab)) - std::exp(-epsilon * ls.dist(a, target));
            if (den > 0.0) tau = std::min(tau, num / den);
        }
    }
    return tau;
}

ObfuscationPolicy slcp_analytic_policy(const LocationSet& ls, LocationId target, double epsilon, LocationId report,
                                       std::optional<double> theta) {
    if (!ls.contains(target) || !ls.contains(report)) throw InvalidArgument("location out of range");
    const std::size_t n = ls.size();
    if (n == 1) return ObfuscationPolicy(1, {1.0}, epsilon);
    const double tau = compute_tau(ls, target, epsilon);
    const double th = theta.value_or(tau);
    if (!(th > 0.0)) throw InvalidArgument("theta must be positive");
    if (th > tau) throw InfeasibleTheta("theta " + std::to_string(th) + " exceeds tau " + std::to_string(tau));

    std::vector<double> p(n * n);
    for (LocationId l = 0; l < n; ++l) {
        const double col = th * std::exp(-epsilon * ls.dist(l, target));
        const double rest = (1.0 - col) / static_cast<double>(n - 1);
        for (LocationId c = 0; c < n; ++c) p[l * n + c] = c == report ? col : rest;
    }
    return ObfuscationPolicy(n, std::move(p), epsilon);
}

double mlcp_upper_bound(const PriorDistribution& prior, const LocationSet& ls, const TargetSet& targets,
                        double epsilon) {
    check_prior_size(prior, ls.size());
    for (auto t : targets.ids())
        if (prior[t] == 0.0) throw DegenerateObservation("target " + std::to_string(t) + " has zero prior mass");
    double outer = 0.0;
    for (LocationId l = 0; l < ls.size(); ++l) {
        if (targets.contains(l)) continue;
        double inner = 0.0;
        for (auto t : targets.ids()) inner += prior[t] * std::exp(epsilon * ls.dist(l, t));
        outer += prior[l] / inner;
    }
    return 1.0 / (1.0 + outer);
}

double mlcp_upper_bound_separable(const PriorDistribution& prior, const LocationSet& ls, const TargetSet& targets,
                                  double epsilon) {
    check_prior_size(prior, ls.size());
    for (auto t : targets.ids())
        if (prior[t] == 0.0) throw DegenerateObservation("target " + std::to_string(t) + " has zero prior mass");
    double outer = 0.0;
    for (LocationId l = 0; l < ls.size(); ++l) {
        if (targets.contains(l)) continue;
        for (auto t : targets.ids()) outer += prior[l] / prior[t] * std::exp(-epsilon * ls.dist(l, t));
    }
    return 1.0 / (1.0 + outer);
}

bool mlcp_bound_feasible(const LocationSet& ls, const TargetSet& targets, double tol) {
    const auto t = targets.ids();
    if (t.size() < 2) return true;
    std::vector<LocationId> others;
    for (LocationId l = 0; l < ls.size(); ++l)
        if (!targets.contains(l)) others.push_back(l);
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = i + 1; j < t.size(); ++j)
            for (std::size_t a = 0; a < others.size(); ++a)
                for (std::size_t b = a + 1; b < others.size(); ++b) {
                    const double da = ls.dist(others[a], t[i]) - ls.dist(others[a], t[j]);
                    const double db = ls.dist(others[b], t[i]) - ls.dist(others[b], t[j]);
                    if (std::abs(da - db) > tol) return false;
                }
    return true;
}

}  // namespace geocover
