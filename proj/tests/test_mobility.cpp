#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "geocover/errors.hpp"
#include "geocover/harness.hpp"
#include "geocover/mobility.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace geocover;

namespace {

constexpr std::int64_t kDay = 86400;
constexpr std::int64_t kMonday = 19359 * kDay;  // 2023-01-02

// 7 training days starting on a Monday, test day 8.
TraceSet week(std::vector<TraceEvent> ev, std::size_t n = 3, Period p = Period::daily) {
    const std::int64_t len = p == Period::daily ? kDay : 7 * kDay;
    return TraceSet(std::move(ev), p, kMonday + 7 * len, n, kMonday, kMonday + 8 * len);
}

TraceEvent at(const char* user, std::int64_t day, LocationId l, std::int64_t sec = 3600) {
    return {user, kMonday + day * kDay + sec, l};
}

}  // namespace

TEST_CASE("profile_frequency: 5 of 7 days") {
    std::vector<TraceEvent> ev;
    for (int d : {0, 1, 2, 4, 6}) {
        ev.push_back(at("a", d, 1));
        ev.push_back(at("a", d, 1, 7200));  // same bucket counts once
    }
    ev.push_back(at("a", 7, 0));
    auto ts = week(ev);
    CHECK(ts.train_periods() == 7);
    CHECK(ts.test_periods() == 1);
    auto p = profile_frequency(ts, "a");
    CHECK(p.probs[1] == doctest::Approx(5.0 / 7.0).epsilon(1e-15));
    CHECK(p.probs[0] == 0.0);  // test-period visit is not training data
    CHECK(p.probs[2] == 0.0);
}

TEST_CASE("profile_poisson: 14 visits over 7 days") {
    std::vector<TraceEvent> ev;
    for (int d = 0; d < 7; ++d)
        for (int k = 0; k < 2; ++k) ev.push_back(at("a", d, 2, 100 + k));
    ev.push_back(at("a", 7, 0));
    auto p = profile_poisson(week(ev), "a");
    CHECK(p.probs[2] == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-15));
    CHECK(p.probs[2] == doctest::Approx(0.8647).epsilon(1e-4));
    CHECK(p.probs[0] == 0.0);
}

TEST_CASE("profile_poisson: fractional rate") {
    // 5 visits in 7 days: lambda = 5/7; lambda = ln 2 gives exactly one half
    std::vector<TraceEvent> ev;
    for (int d : {0, 0, 3, 5, 6}) ev.push_back(at("a", d, 1));
    ev.push_back(at("a", 7, 1));
    auto p = profile_poisson(week(ev), "a");
    CHECK(p.probs[1] == doctest::Approx(-std::expm1(-5.0 / 7.0)));
    CHECK(-std::expm1(-std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("profiles agree at the extremes") {
    std::vector<TraceEvent> ev;
    for (int d = 0; d < 7; ++d) ev.push_back(at("a", d, 0));
    ev.push_back(at("a", 7, 0));
    auto ts = week(ev);
    auto f = profile_frequency(ts, "a");
    auto q = profile_poisson(ts, "a");
    CHECK(f.probs[0] == 1.0);
    CHECK(q.probs[0] >= 1.0 - std::exp(-1.0) - 1e-15);
    CHECK(f.probs[1] == 0.0);
    CHECK(q.probs[1] == 0.0);
}

TEST_CASE("profiling an unknown user") {
    auto ts = week({at("a", 0, 0), at("a", 7, 0)});
    CHECK_THROWS_AS(profile_frequency(ts, "zz"), NotFound);
    CHECK_THROWS_AS(profile_poisson(ts, "zz"), NotFound);
}

TEST_CASE("weekly buckets start on Monday") {
    // Sunday 23:59 and Monday 00:00 fall in different ISO weeks
    auto ts = week({at("a", 0, 0), at("a", 6, 1, kDay - 1), at("a", 7, 2, 0), at("a", 50, 0)}, 3, Period::weekly);
    CHECK(ts.bucket(kMonday + 6 * kDay + kDay - 1) + 1 == ts.bucket(kMonday + 7 * kDay));
    CHECK(ts.bucket(kMonday) == ts.bucket(kMonday + 6 * kDay));
    CHECK(ts.train_periods() == 7);
    auto p = profile_frequency(ts, "a");
    CHECK(p.probs[0] == doctest::Approx(1.0 / 7.0));
    CHECK(p.probs[2] == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("trace set validation") {
    CHECK_THROWS_AS(week({at("a", 0, 5)}), InvalidArgument);
    CHECK_THROWS_AS(TraceSet({at("a", 0, 0)}, Period::daily, kMonday, 3), InvalidArgument);  // no training period
    CHECK_THROWS_AS(TraceSet({{"a", -5, 0}}, Period::daily, 0, 3, -10), InvalidArgument);
}

TEST_CASE("users in first-appearance order") {
    auto ts = week({at("b", 1, 0), at("a", 2, 0), at("b", 3, 1), at("c", 7, 0)});
    REQUIRE(ts.users().size() == 3);
    CHECK(ts.users()[0] == "b");
    CHECK(ts.users()[1] == "a");
    CHECK(ts.users()[2] == "c");
}

TEST_CASE("frequent_locations") {
    MobilityProfile zero{"u", {0.0, 0.0, 0.0}};
    CHECK(frequent_locations(zero, 0.5).empty());
    MobilityProfile p{"u", {0.9, 0.5, 0.7}};
    CHECK(frequent_locations(p, 0.7) == std::vector<LocationId>{0});  // strictly greater
    auto hi = frequent_locations(p, 0.8), lo = frequent_locations(p, 0.5);
    for (auto l : hi) CHECK(std::find(lo.begin(), lo.end(), l) != lo.end());
    CHECK_THROWS_AS(frequent_locations(p, 0.0), InvalidArgument);
    CHECK_THROWS_AS(frequent_locations(p, 1.0), InvalidArgument);
    CHECK_THROWS_AS(frequent_locations(p, -0.1), InvalidArgument);
}

TEST_CASE("pick_frequent_location") {
    Rng rng(3);
    MobilityProfile none{"u", {0.1, 0.2}};
    CHECK_FALSE(pick_frequent_location(none, 0.5, rng).has_value());
    MobilityProfile one{"u", {0.1, 0.9, 0.3}};
    for (int i = 0; i < 100; ++i) CHECK(pick_frequent_location(one, 0.5, rng) == std::optional<LocationId>(1));

    MobilityProfile two{"u", {0.8, 0.1, 0.95}};
    int zeros = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto l = pick_frequent_location(two, 0.7, rng);
        REQUIRE(l.has_value());
        CHECK(two.probs[*l] > 0.7);
        zeros += *l == 0;
    }
    CHECK(std::abs(zeros / static_cast<double>(draws) - 0.5) < 0.02);
}

TEST_CASE("roc_auc examples") {
    std::vector<double> s{0.9, 0.8, 0.2, 0.1};
    std::vector<int> y{1, 1, 0, 0};
    CHECK(roc_auc(s, y).auc == 1.0);
    std::vector<double> flat(6, 0.3);
    std::vector<int> y6{1, 0, 1, 0, 0, 1};
    CHECK(roc_auc(flat, y6).auc == doctest::Approx(0.5));

    std::vector<double> toy{0.4, 0.7, 0.4, 0.1};
    std::vector<int> ty{1, 0, 0, 1};
    CHECK(roc_auc(toy, ty).auc == doctest::Approx(oracle::pairwise_auc(toy, ty)).epsilon(1e-15));

    auto r = roc_auc(s, y);
    CHECK(r.curve.front() == std::pair{0.0, 0.0});
    CHECK(r.curve.back() == std::pair{1.0, 1.0});
}

TEST_CASE("roc_auc matches pair counting on random data with ties") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> level(0, 6);
    std::bernoulli_distribution coin(0.4);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> s;
        std::vector<int> y;
        for (int i = 0; i < 40; ++i) {
            s.push_back(level(rng) / 6.0);
            y.push_back(coin(rng));
        }
        if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) continue;
        CHECK(roc_auc(s, y).auc == doctest::Approx(oracle::pairwise_auc(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc needs both classes") {
    std::vector<double> s{0.1, 0.2};
    std::vector<int> pos{1, 1}, neg{0, 0};
    CHECK_THROWS_AS(roc_auc(s, pos), UndefinedMetric);
    CHECK_THROWS_AS(roc_auc(s, neg), UndefinedMetric);
}

TEST_CASE("roc_auc map overload") {
    std::map<UserLocation, double> s{{{"a", 0}, 0.9}, {{"a", 1}, 0.1}, {{"b", 0}, 0.5}};
    std::map<UserLocation, int> y{{{"a", 0}, 1}, {{"a", 1}, 0}, {{"b", 0}, 0}};
    CHECK(roc_auc(s, y).auc == 1.0);
}

TEST_CASE("trace CSV round trip and errors") {
    TempDir dir;
    std::vector<TraceEvent> ev{at("x", 0, 1), at("y", 1, 2)};
    save_trace_events(ev, dir.path("t.csv"));
    auto back = load_trace_events(dir.path("t.csv"), 3);
    REQUIRE(back.size() == 2);
    CHECK(back[1].user == "y");
    CHECK(back[1].time == ev[1].time);
    CHECK(back[1].location == 2);
    CHECK_THROWS_AS(load_trace_events(dir.path("t.csv"), 2), ParseError);
    CHECK_THROWS_AS(load_trace_events(dir.file("b.csv", "user,timestamp,loc_id\nu,12x,0\n"), 3), ParseError);
    CHECK_THROWS_AS(load_trace_events(dir.file("c.csv", "user,time,loc\n"), 3), ParseError);
}

TEST_CASE("profile_all matches per-user profiling") {
    WorldConfig wc;
    wc.n_users = 80;
    wc.seed = 5;
    auto w = generate_world(wc);
    for (auto m : {ProfileMethod::frequency, ProfileMethod::poisson}) {
        auto all = profile_all(w.traces, m);
        REQUIRE(all.size() == w.traces.users().size());
        for (std::size_t i = 0; i < all.size(); ++i) {
            auto one = profile(w.traces, w.traces.users()[i], m);
            CHECK(all[i].user == one.user);
            CHECK(all[i].probs == one.probs);
            for (double p : one.probs) CHECK((p >= 0.0 && p <= 1.0));
        }
    }
}

TEST_CASE("Poisson profiler beats Frequency on a Poisson world") {
    int wins = 0;
    for (int t = 0; t < 10; ++t) {
        WorldConfig wc;
        wc.n_users = 200;
        wc.seed = mix_seed(77, t);
        auto w = generate_world(wc);
        wins += profiling_roc(w.traces, ProfileMethod::poisson).auc >=
                profiling_roc(w.traces, ProfileMethod::frequency).auc;
    }
    CHECK(wins >= 8);
}
