#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "geocover/errors.hpp"
#include "geocover/harness.hpp"
#include "geocover/selection.hpp"
#include "geocover/synthesis.hpp"
#include "oracles.hpp"
#include "scripted_client.hpp"

using namespace geocover;

namespace {

const double kLn4 = std::log(4.0), kLn8 = std::log(8.0);

Crowd crowd_from(const PriorDistribution& pi, std::size_t n, double null_share, std::uint64_t seed) {
    Crowd c;
    Rng rng(seed);
    std::discrete_distribution<LocationId> home(pi.probs().begin(), pi.probs().end());
    std::bernoulli_distribution null(null_share);
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<LocationId> h;
        if (!null(rng)) h = home(rng);
        c.add(std::make_unique<ScriptedClient>("u" + std::to_string(i), h));
    }
    return c;
}

PriorDistribution hotspot(const LocationSet& ls) {
    std::vector<double> w(ls.size());
    for (LocationId l = 0; l < ls.size(); ++l) w[l] = std::exp(-ls.dist(l, ls.size() / 2));
    return PriorDistribution::normalized(w);
}

}  // namespace

TEST_CASE("split_groups") {
    Rng rng(1);
    auto g = split_groups(12, 6, rng);
    REQUIRE(g.size() == 6);
    for (const auto& x : g) CHECK(x.size() == 2);

    auto one = split_groups(7, 1, rng);
    REQUIRE(one.size() == 1);
    CHECK(one[0].size() == 7);

    auto odd = split_groups(13, 6, rng);
    std::multiset<std::size_t> sizes;
    std::set<std::size_t> all;
    for (const auto& x : odd) {
        sizes.insert(x.size());
        all.insert(x.begin(), x.end());
    }
    CHECK(sizes == std::multiset<std::size_t>{2, 2, 2, 2, 2, 3});
    CHECK(all.size() == 13);
    CHECK(*all.rbegin() == 12);

    CHECK_THROWS_AS(split_groups(3, 4, rng), InvalidArgument);
    CHECK_THROWS_AS(split_groups(3, 0, rng), InvalidArgument);
}

TEST_CASE("bayes_update and mean_posterior") {
    auto g = build_grid(3, 3, 1.0);
    std::mt19937_64 mt(2);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> w(9);
    for (auto& x : w) x = u(mt);
    auto pi = PriorDistribution::normalized(w);
    ObfuscationPolicy flat(9, std::vector<double>(81, 1.0 / 9), 1.0);
    auto same = bayes_update(pi, flat, 4);
    for (LocationId l = 0; l < 9; ++l) CHECK(same[l] == doctest::Approx(pi[l]));

    auto lap = laplace_policy(g, kLn4);
    std::vector<LocationId> obs(17, 3);
    for (auto ex : {Execution::serial, Execution::parallel}) {
        auto m = mean_posterior(pi, lap, obs, ex);
        REQUIRE(m.mean.has_value());
        auto single = posterior(pi, lap, 3);
        for (LocationId l = 0; l < 9; ++l) CHECK((*m.mean)[l] == doctest::Approx(single[l]).epsilon(1e-13));
    }
    CHECK_FALSE(mean_posterior(pi, lap, {}, Execution::serial).mean.has_value());
    CHECK_FALSE(mean_posterior(pi, lap, {}, Execution::parallel).mean.has_value());
}

TEST_CASE("mean_posterior serial and parallel agree") {
    auto g = build_grid(5, 5, 1.0);
    auto pi = hotspot(g);
    auto lap = laplace_policy(g, kLn8);
    Rng rng(3);
    std::uniform_int_distribution<LocationId> loc(0, 24);
    for (std::size_t size : {1, 10, 100, 1000}) {
        std::vector<LocationId> obs(size);
        for (auto& o : obs) o = loc(rng);
        auto a = mean_posterior(pi, lap, obs, Execution::serial);
        auto b = mean_posterior(pi, lap, obs, Execution::parallel);
        REQUIRE(a.mean.has_value());
        REQUIRE(b.mean.has_value());
        double s = 0;
        for (LocationId l = 0; l < 25; ++l) {
            CHECK((*a.mean)[l] == doctest::Approx((*b.mean)[l]).epsilon(1e-12));
            s += (*b.mean)[l];
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("group mean moves toward the truth under a sharp policy") {
    auto g = build_grid(5, 5, 1.0);
    auto truth = hotspot(g);
    auto sharp = laplace_policy(g, kLn8, 1.0);
    Rng rng(4);
    std::discrete_distribution<LocationId> draw(truth.probs().begin(), truth.probs().end());
    std::vector<LocationId> obs;
    for (int i = 0; i < 600; ++i) obs.push_back(obfuscate(sharp, draw(rng), rng));
    auto start = PriorDistribution::uniform(25);
    auto m = mean_posterior(start, sharp, obs);
    CHECK(kl_divergence(*m.mean, truth) < kl_divergence(start, truth));
}

TEST_CASE("kl_divergence") {
    PriorDistribution p({0.2, 0.3, 0.5});
    CHECK(kl_divergence(p, p) == 0.0);
    CHECK(kl_divergence(PriorDistribution({1.0, 0.0}), PriorDistribution({0.5, 0.5})) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(std::isinf(kl_divergence(PriorDistribution({0.5, 0.5}), PriorDistribution({1.0, 0.0}))));
    CHECK_THROWS_AS(kl_divergence(p, PriorDistribution::uniform(2)), InvalidArgument);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> a(6), b(6);
        for (auto& x : a) x = u(rng);
        for (auto& x : b) x = u(rng) + 1e-3;
        CHECK(kl_divergence(PriorDistribution::normalized(a), PriorDistribution::normalized(b)) >= 0.0);
    }
}

TEST_CASE("adjust_beta_for_null") {
    CHECK(adjust_beta_for_null(300, 0.0, 10, 0.95) == beta_from_binomial(300, 10, 0.95));
    CHECK(adjust_beta_for_null(200, 0.5, 5, 0.9) == beta_from_binomial(100, 5, 0.9));
    CHECK_THROWS_AS(adjust_beta_for_null(20, 0.9, 5, 0.9), SynthesisInfeasible);
    CHECK_THROWS_AS(adjust_beta_for_null(20, 1.0, 5, 0.9), InvalidArgument);
    CHECK_THROWS_AS(adjust_beta_for_null(20, -0.1, 5, 0.9), InvalidArgument);
}

TEST_CASE("fixed reporters fill from a single group") {
    auto g = build_grid(3, 3, 1.0);
    Crowd c;
    for (int i = 0; i < 40; ++i) c.add(std::make_unique<ScriptedClient>("u" + std::to_string(i), 4, 0));
    SelectionParams sp;
    sp.k = 1;
    sp.alpha = 10;
    Rng rng(6);
    auto r = run_selection(c.view, g, TargetSet(g, {4}), sp, rng);
    CHECK(r.selected.size() == 10);
    for (auto gi : r.selected_group) CHECK(gi == 0);
}

TEST_CASE("privacy contract, NULL users and scan order") {
    auto g = build_grid(4, 4, 1.0);
    auto pi = hotspot(g);
    Crowd c = crowd_from(pi, 300, 0.2, 7);
    SelectionParams sp;
    sp.k = 5;
    sp.alpha = 15;
    sp.truth = pi;
    Rng rng(8);
    auto r = run_selection(c.view, g, TargetSet(g, {5, 10}), sp, rng);

    for (auto& cl : c.owned) {
        CHECK(cl->calls == 1);
        CHECK(cl->plain_calls == 0);
    }
    std::size_t null_total = 0;
    for (const auto& gs : r.groups) null_total += gs.nulls;
    CHECK(null_total > 0);

    // selected users reported their group's l*, never NULL
    REQUIRE(r.selected.size() == r.selected_group.size());
    CHECK(r.selected.size() <= sp.alpha);
    for (std::size_t i = 1; i < r.selected_group.size(); ++i) CHECK(r.selected_group[i] <= r.selected_group[i - 1]);
    std::vector<std::size_t> per_group(sp.k, 0);
    for (auto gi : r.selected_group) ++per_group[gi];
    if (!r.selected_group.empty()) {
        const auto lowest = r.selected_group.back();
        for (std::size_t j = lowest + 1; j < sp.k; ++j) CHECK(per_group[j] == r.groups[j].matches);
    }
    CHECK(r.kl_trajectory.size() == sp.k + 1);
    double s = 0;
    for (double v : r.final_prior.probs()) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("short supply returns everyone found") {
    auto g = build_grid(3, 3, 1.0);
    Crowd c;
    for (int i = 0; i < 30; ++i) c.add(std::make_unique<ScriptedClient>("n" + std::to_string(i), std::nullopt));
    for (int i = 0; i < 3; ++i) c.add(std::make_unique<ScriptedClient>("h" + std::to_string(i), 4, 0));
    SelectionParams sp;
    sp.k = 3;
    sp.alpha = 2;
    Rng rng(9);
    auto r = run_selection(c.view, g, TargetSet(g, {4}), sp, rng);
    CHECK(r.selected.size() == 2);
    for (const auto& u : r.selected) CHECK(u[0] == 'h');

    sp.alpha = 5;
    Rng rng2(9);
    auto all = run_selection(c.view, g, TargetSet(g, {4}), sp, rng2);
    CHECK(all.selected.size() == 3);
}

TEST_CASE("run_selection is deterministic for a seed") {
    WorldConfig wc;
    wc.n_users = 200;
    auto w = generate_world(wc);
    auto owned = make_clients(w.traces, ProfileMethod::poisson);
    std::vector<Client*> view;
    for (auto& c : owned) view.push_back(c.get());
    SelectionParams sp;
    sp.alpha = 10;
    Rng a(10), b(10);
    auto ra = run_selection(view, w.locations, TargetSet(w.locations, {12}), sp, a);
    auto rb = run_selection(view, w.locations, TargetSet(w.locations, {12}), sp, b);
    CHECK(ra.selected == rb.selected);
    CHECK(ra.final_prior.probs()[3] == rb.final_prior.probs()[3]);
}

TEST_CASE("serial and parallel updates select the same users") {
    WorldConfig wc;
    wc.n_users = 240;
    auto w = generate_world(wc);
    auto owned = make_clients(w.traces, ProfileMethod::poisson);
    std::vector<Client*> view;
    for (auto& c : owned) view.push_back(c.get());
    SelectionParams sp;
    sp.alpha = 12;
    sp.truth = w.truth;
    sp.execution = Execution::serial;
    Rng a(11), b(11);
    auto ra = run_selection(view, w.locations, TargetSet(w.locations, {7, 12}), sp, a);
    sp.execution = Execution::parallel;
    auto rb = run_selection(view, w.locations, TargetSet(w.locations, {7, 12}), sp, b);
    CHECK(ra.selected == rb.selected);
    for (std::size_t i = 0; i < ra.kl_trajectory.size(); ++i)
        CHECK(ra.kl_trajectory[i] == doctest::Approx(rb.kl_trajectory[i]).epsilon(1e-9));
}

TEST_CASE("first-group NULL estimate tracks the true NULL share") {
    int close = 0;
    for (int t = 0; t < 10; ++t) {
        WorldConfig wc;
        wc.seed = mix_seed(12, t);
        auto w = generate_world(wc);
        auto owned = make_clients(w.traces, ProfileMethod::poisson);
        std::vector<Client*> view;
        std::size_t truly_null = 0;
        for (auto& c : owned) view.push_back(c.get());
        for (const auto& p : profile_all(w.traces, ProfileMethod::poisson)) truly_null += frequent_locations(p, 0.7).empty();
        SelectionParams sp;
        sp.alpha = 30;
        Rng rng(mix_seed(13, t));
        auto r = run_selection(view, w.locations, TargetSet(w.locations, {12}), sp, rng);
        const double share = static_cast<double>(truly_null) / static_cast<double>(owned.size());
        close += std::abs(r.groups[0].null_fraction - share) <= 0.05;
    }
    CHECK(close >= 8);
}

TEST_CASE("Laplace mechanism reports the best column") {
    auto g = build_grid(4, 4, 1.0);
    auto pi = hotspot(g);
    Crowd c = crowd_from(pi, 120, 0.1, 14);
    SelectionParams sp;
    sp.k = 1;
    sp.alpha = 5;
    sp.mechanism = Mechanism::laplace;
    Rng rng(15);
    TargetSet targets(g, {3});
    auto r = run_selection(c.view, g, targets, sp, rng);
    auto lap = laplace_policy(g, sp.epsilon);
    auto uni = PriorDistribution::uniform(16);
    double best = -1;
    for (LocationId col = 0; col < 16; ++col) best = std::max(best, coverage_score(uni, lap, col, targets));
    CHECK(r.groups[0].objective == doctest::Approx(best));
    CHECK(coverage_score(uni, lap, r.groups[0].report, targets) == doctest::Approx(best));
    CHECK(r.groups[0].beta == 0.0);
}

TEST_CASE("remaining-pool beta grows as groups are used up") {
    auto g = build_grid(3, 3, 1.0);
    Crowd c = crowd_from(PriorDistribution::uniform(9), 300, 0.0, 16);
    SelectionParams sp;
    sp.k = 3;
    sp.alpha = 10;
    sp.beta_pool = BetaPool::remaining;
    Rng rng(17);
    auto r = run_selection(c.view, g, TargetSet(g, {4}), sp, rng);
    CHECK(r.groups[0].beta == doctest::Approx(beta_from_binomial(300, 10, 0.95)));
    CHECK(r.groups[2].beta == doctest::Approx(beta_from_binomial(100, 10, 0.95)));
    sp.beta_pool = BetaPool::population;
    Rng rng2(17);
    auto p = run_selection(c.view, g, TargetSet(g, {4}), sp, rng2);
    for (const auto& gs : p.groups) CHECK(gs.beta == doctest::Approx(beta_from_binomial(300, 10, 0.95)));
}

TEST_CASE("alpha zero is rejected") {
    auto g = build_grid(2, 2, 1.0);
    Crowd c = crowd_from(PriorDistribution::uniform(4), 10, 0.0, 18);
    SelectionParams sp;
    sp.alpha = 0;
    sp.k = 2;
    Rng rng(19);
    CHECK_THROWS_AS(run_selection(c.view, g, TargetSet(g, {0}), sp, rng), InvalidArgument);
}
