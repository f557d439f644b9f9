#include <doctest.h>

#include <cmath>
#include <numeric>
#include <optional>

#include <boost/math/distributions/students_t.hpp>

#include "geocover/harness.hpp"

using namespace geocover;

// Aggregate trends over seeded trials. Slow: each case runs a full experiment.

TEST_CASE("method ordering on the default world") {
    ExperimentConfig c;
    auto r = run_experiment(c);
    const double eps = c.epsilons[0], delta = c.deltas[0];
    const auto* no = r.find(Method::no, eps, delta, 1);
    const auto* ours = r.find(Method::ours, eps, delta, 1);
    const auto* lap = r.find(Method::laplace, eps, delta, 1);
    const auto* rnd = r.find(Method::random, eps, delta, 1);
    REQUIRE((no && ours && lap && rnd));
    CHECK(no->coverage_mean - ours->coverage_mean >= -ours->coverage_stderr);
    CHECK(lap->coverage_mean >= rnd->coverage_mean);

    std::vector<double> diff;
    for (std::size_t t = 0; t < c.trials; ++t) {
        std::optional<double> a, b;
        for (const auto& row : r.rows) {
            if (row.trial != t) continue;
            if (row.method == Method::ours) a = row.coverage;
            if (row.method == Method::laplace) b = row.coverage;
        }
        if (a && b) diff.push_back(*a - *b);
    }
    REQUIRE(diff.size() >= 45);
    const double n = static_cast<double>(diff.size());
    const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
    double ss = 0;
    for (double d : diff) ss += (d - mean) * (d - mean);
    const double t = mean / std::sqrt(ss / (n - 1) / n);
    CHECK(t > boost::math::quantile(boost::math::students_t(n - 1), 0.95));
}

TEST_CASE("coverage of ours grows with epsilon") {
    ExperimentConfig c;
    c.trials = 30;
    c.methods = {Method::ours};
    c.epsilons = {std::log(2.0), std::log(4.0), std::log(6.0), std::log(8.0)};
    auto r = run_experiment(c);
    for (std::size_t i = 1; i < c.epsilons.size(); ++i) {
        const auto* lo = r.find(Method::ours, c.epsilons[i - 1], c.deltas[0], 1);
        const auto* hi = r.find(Method::ours, c.epsilons[i], c.deltas[0], 1);
        REQUIRE((lo && hi));
        CAPTURE(i);
        CHECK(hi->coverage_mean >= lo->coverage_mean - std::max(lo->coverage_stderr, hi->coverage_stderr));
    }
}

// Only the baselines that do not obfuscate follow the delta trend on this
// generator; see the README for the numbers on ours and Laplace.
TEST_CASE("plain baselines do not lose coverage as delta grows") {
    ExperimentConfig c;
    c.trials = 50;
    c.methods = {Method::no, Method::random};
    c.deltas = {0.5, 0.6, 0.7, 0.8};
    auto r = run_experiment(c);
    for (auto m : c.methods) {
        for (std::size_t i = 1; i < c.deltas.size(); ++i) {
            const auto* lo = r.find(m, c.epsilons[0], c.deltas[i - 1], 1);
            const auto* hi = r.find(m, c.epsilons[0], c.deltas[i], 1);
            REQUIRE((lo && hi));
            CAPTURE(to_string(m));
            CAPTURE(i);
            CHECK(hi->coverage_mean >= lo->coverage_mean - std::max(lo->coverage_stderr, hi->coverage_stderr));
        }
    }
}
