#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "geocover/errors.hpp"
#include "geocover/lp.hpp"
#include "oracles.hpp"
#include "random_lp.hpp"

using namespace geocover;
using namespace geocover::lp;

namespace {

oracle::LpOutcome as_outcome(Status s) {
    switch (s) {
        case Status::optimal: return oracle::LpOutcome::optimal;
        case Status::infeasible: return oracle::LpOutcome::infeasible;
        case Status::unbounded: return oracle::LpOutcome::unbounded;
    }
    return oracle::LpOutcome::infeasible;
}

bool feasible(const LinearProgram& lp, const std::vector<double>& x, double tol) {
    for (std::size_t j = 0; j < lp.num_vars(); ++j)
        if (x[j] < lp.lower()[j] - tol || x[j] > lp.upper()[j] + tol) return false;
    for (std::size_t i = 0; i < lp.num_inequalities(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < lp.num_vars(); ++j) s += lp.inequality_row(i)[j] * x[j];
        if (s > lp.inequality_rhs(i) + tol) return false;
    }
    for (std::size_t i = 0; i < lp.num_equalities(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < lp.num_vars(); ++j) s += lp.equality_row(i)[j] * x[j];
        if (std::abs(s - lp.equality_rhs(i)) > tol) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("single variable") {
    LinearProgram lp(1);
    lp.objective() = {1.0};
    lp.add_inequality(std::vector<double>{1.0}, 1.0);
    auto s = solve(lp);
    REQUIRE(s.status == Status::optimal);
    CHECK(s.x[0] == doctest::Approx(1.0));
    CHECK(s.objective_value == doctest::Approx(1.0));
}

TEST_CASE("degenerate facet optimum") {
    LinearProgram lp(2);
    lp.objective() = {1.0, 1.0};
    lp.add_inequality(std::vector<double>{1.0, 1.0}, 1.0);
    auto s = solve(lp);
    REQUIRE(s.status == Status::optimal);
    CHECK(s.objective_value == doctest::Approx(1.0));
    // a vertex: one coordinate at a bound
    CHECK((std::abs(s.x[0]) < 1e-12 || std::abs(s.x[1]) < 1e-12));
}

TEST_CASE("infeasible and unbounded") {
    LinearProgram lp(1);
    lp.objective() = {1.0};
    lp.add_inequality(std::vector<double>{-1.0}, -2.0);  // x >= 2
    lp.add_inequality(std::vector<double>{1.0}, 1.0);    // x <= 1
    CHECK(solve(lp).status == Status::infeasible);

    LinearProgram un(2);
    un.objective() = {1.0, 0.0};
    un.add_inequality(std::vector<double>{-1.0, 1.0}, 1.0);
    CHECK(solve(un).status == Status::unbounded);

    LinearProgram bounds(1);
    bounds.lower() = {3.0};
    bounds.upper() = {2.0};
    CHECK(solve(bounds).status == Status::infeasible);
}

TEST_CASE("equalities, negative rhs and shifted bounds") {
    // max 2x + 3y, x + y = 4, x - y >= -1 (i.e. -x + y <= 1), 1 <= x <= 5
    LinearProgram lp(2);
    lp.objective() = {2.0, 3.0};
    lp.add_equality(std::vector<double>{1.0, 1.0}, 4.0);
    lp.add_inequality(std::vector<double>{-1.0, 1.0}, 1.0);
    lp.lower() = {1.0, 0.0};
    lp.upper() = {5.0, kInf};
    auto s = solve(lp);
    REQUIRE(s.status == Status::optimal);
    CHECK(s.x[0] == doctest::Approx(1.5));
    CHECK(s.x[1] == doctest::Approx(2.5));
    CHECK(s.objective_value == doctest::Approx(10.5));
    CHECK(s.max_residual <= 1e-9);
}

TEST_CASE("Beale's cycling example terminates under both rules") {
    LinearProgram lp(4);
    lp.objective() = {0.75, -20.0, 0.5, -6.0};
    lp.add_inequality(std::vector<double>{0.25, -8.0, -1.0, 9.0}, 0.0);
    lp.add_inequality(std::vector<double>{0.5, -12.0, -0.5, 3.0}, 0.0);
    lp.add_inequality(std::vector<double>{0.0, 0.0, 1.0, 0.0}, 1.0);
    for (auto rule : {PivotRule::bland, PivotRule::dantzig}) {
        SolverOptions o;
        o.rule = rule;
        auto s = solve(lp, o);
        REQUIRE(s.status == Status::optimal);
        CHECK(s.objective_value == doctest::Approx(1.25));
    }
}

TEST_CASE("validation") {
    LinearProgram lp(2);
    CHECK_THROWS_AS(lp.add_inequality(std::vector<double>{1.0}, 1.0), InvalidArgument);
    LinearProgram nan(2);
    nan.add_equality(std::vector<double>{1.0, NAN}, 1.0);
    CHECK_THROWS_AS(solve(nan), InvalidArgument);
    lp.lower()[0] = -kInf;
    CHECK_THROWS_AS(solve(lp), InvalidArgument);
    LinearProgram bad(2);
    bad.objective().push_back(1.0);
    CHECK_THROWS_AS(solve(bad), InvalidArgument);
}

TEST_CASE("iteration cap raises NumericalFailure") {
    LinearProgram lp(3);
    lp.objective() = {1.0, 1.0, 1.0};
    for (int j = 0; j < 3; ++j) {
        std::vector<double> a(3, 0.0);
        a[j] = 1.0;
        lp.add_inequality(a, 1.0);
    }
    SolverOptions o;
    o.max_iterations = 1;
    CHECK_THROWS_AS(solve(lp, o), NumericalFailure);
}

TEST_CASE("random programs match vertex enumeration") {
    std::mt19937_64 rng(2024);
    int counts[3] = {0, 0, 0};
    for (int rep = 0; rep < 150; ++rep) {
        auto lp = oracle::random_lp(rng);
        auto truth = oracle::enumerate_vertices(lp);
        auto s = solve(lp);
        CAPTURE(rep);
        REQUIRE(as_outcome(s.status) == truth.outcome);
        ++counts[static_cast<int>(truth.outcome)];
        if (s.status == Status::optimal) {
            CHECK(s.objective_value == doctest::Approx(truth.objective).epsilon(1e-8).scale(1.0));
            CHECK(feasible(lp, s.x, 1e-8));
            CHECK(s.max_residual <= 1e-9);
        }
    }
    // the generator must exercise every status
    CHECK(counts[0] > 10);
    CHECK(counts[1] > 10);
    CHECK(counts[2] > 5);
}

TEST_CASE("weak duality spot check against sampled feasible points") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 6.0);
    for (int rep = 0; rep < 60; ++rep) {
        auto lp = oracle::random_lp(rng);
        if (lp.num_equalities() > 0) continue;  // random points never hit an equality
        auto s = solve(lp);
        if (s.status != Status::optimal) continue;
        for (int k = 0; k < 500; ++k) {
            std::vector<double> x(lp.num_vars());
            for (auto& v : x) v = u(rng);
            if (!feasible(lp, x, 0.0)) continue;
            double obj = 0;
            for (std::size_t j = 0; j < x.size(); ++j) obj += lp.objective()[j] * x[j];
            CHECK(obj <= s.objective_value + 1e-9);
        }
    }
}

TEST_CASE("determinism and objective scaling") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 40; ++rep) {
        auto lp = oracle::random_lp(rng);
        auto a = solve(lp), b = solve(lp);
        CHECK(a.status == b.status);
        CHECK(a.x == b.x);
        CHECK(a.objective_value == b.objective_value);
        if (a.status != Status::optimal) continue;
        auto scaled = lp;
        for (auto& c : scaled.objective()) c *= 3.0;
        auto c = solve(scaled);
        REQUIRE(c.status == Status::optimal);
        CHECK(c.objective_value == doctest::Approx(3.0 * a.objective_value).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("dump writes every row") {
    LinearProgram lp(2);
    lp.objective() = {1.0, 2.0};
    lp.add_inequality(std::vector<double>{1.0, 1.0}, 3.0);
    lp.add_equality(std::vector<double>{1.0, -1.0}, 0.0);
    std::ostringstream out;
    dump(lp, out);
    const auto text = out.str();
    CHECK(text.find("<=") != std::string::npos);
    CHECK(text.find("=") != std::string::npos);
    CHECK(to_string(Status::unbounded) == "unbounded");
}
