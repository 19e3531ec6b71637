#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "nhkl/geometry.hpp"
#include "nhkl/util.hpp"

using namespace nhkl;
using namespace nhkl::geo;

namespace {

// Independent arc-length oracle: polyline length of the boundary curve
// between two arc-length coordinates, refined until stable.
double polyline_arc_length(const Domain& d, double s0, double s1, int n) {
    double len = 0.0;
    auto prev = d.boundary_point(s0).xy;
    for (int i = 1; i <= n; ++i) {
        auto p = d.boundary_point(s0 + (s1 - s0) * i / n).xy;
        len += std::hypot(p[0] - prev[0], p[1] - prev[1]);
        prev = p;
    }
    return len;
}

}  // namespace

TEST_CASE("closed-form domain measures") {
    auto b2 = Domain::box(1.0, 1.0);
    CHECK(b2.volume() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b2.boundary_measure() == doctest::Approx(4.0).epsilon(1e-12));

    auto b2r = Domain::box(2.0, 0.5);
    CHECK(b2r.volume() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b2r.boundary_measure() == doctest::Approx(5.0).epsilon(1e-12));

    auto b3 = Domain::box(1.0, 1.0, 1.0);
    CHECK(b3.volume() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b3.boundary_measure() == doctest::Approx(6.0).epsilon(1e-12));

    auto dk = Domain::disk();
    CHECK(dk.volume() == doctest::Approx(std::numbers::pi).epsilon(1e-14));
    CHECK(dk.boundary_measure() ==
          doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("boundary walk visits the four box edges in order") {
    auto d = Domain::box(1.0, 1.0);
    auto p0 = d.boundary_point(0.5);
    CHECK(p0.xy[0] == doctest::Approx(0.5));
    CHECK(p0.xy[1] == doctest::Approx(0.0));
    CHECK(p0.outward_normal[1] == doctest::Approx(-1.0));
    CHECK(p0.edge == 0);

    auto p1 = d.boundary_point(1.5);
    CHECK(p1.xy[0] == doctest::Approx(1.0));
    CHECK(p1.xy[1] == doctest::Approx(0.5));
    CHECK(p1.edge == 1);

    auto p2 = d.boundary_point(2.5);
    CHECK(p2.xy[0] == doctest::Approx(0.5));
    CHECK(p2.xy[1] == doctest::Approx(1.0));
    CHECK(p2.edge == 2);

    auto p3 = d.boundary_point(3.5);
    CHECK(p3.xy[0] == doctest::Approx(0.0));
    CHECK(p3.xy[1] == doctest::Approx(0.5));
    CHECK(p3.edge == 3);

    auto top = Domain::disk().boundary_point(0.5 * std::numbers::pi);
    CHECK(top.xy[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(top.xy[1] == doctest::Approx(1.0));
}

TEST_CASE("constant profile keeps the area fixed") {
    auto sched = make_schedule(Domain::box(1.0, 1.0), 0.1,
                               DecayProfile::constant());
    for (double t : {0.0, 0.3, 2.0, 50.0}) {
        CHECK(sched.area_at(t) == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(sched.arc_at(t).measure() ==
              doctest::Approx(0.1).epsilon(1e-12));
    }
}

TEST_CASE("polynomial profile example value") {
    auto sched = make_schedule(Domain::box(1.0, 1.0), 0.1,
                               DecayProfile::polynomial(1.0, 2.0));
    CHECK(sched.area_at(1.0) == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(sched.arc_at(1.0).measure() ==
          doctest::Approx(0.025).epsilon(1e-12));
}

TEST_CASE("measure ratio reproduces the profile") {
    auto profile = DecayProfile::exponential(0.7);
    auto sched = make_schedule(Domain::box(2.0, 1.0), 0.5, profile);
    for (double t : {0.0, 0.1, 0.91, 3.7, 12.0}) {
        double ratio = sched.arc_at(t).measure() / sched.arc_at(0.0).measure();
        CHECK(std::abs(ratio - profile(t)) <= 1e-12);
    }
}

TEST_CASE("regions nest as time advances") {
    for (auto anchor : {Anchor::center, Anchor::left_end}) {
        auto sched = make_schedule(Domain::box(1.0, 1.0), 1.7,
                                   DecayProfile::polynomial(2.0, 1.5), anchor);
        Rng rng(20260815u);
        for (int i = 0; i < 200; ++i) {
            double s = rng.uniform(0.0, 5.0);
            double t = s + rng.uniform(0.0, 5.0);
            auto late = sched.arc_at(t);
            auto early = sched.arc_at(s);
            CHECK(late.start >= early.start - 1e-13);
            CHECK(late.end <= early.end + 1e-13);
        }
    }
}

TEST_CASE("3D schedule produces nested centred square patches") {
    auto sched = make_schedule(Domain::box(1.0, 1.0, 1.0), 0.25,
                               DecayProfile::polynomial(1.0, 2.0));
    auto p0 = sched.patch_at(0.0);
    CHECK(p0.measure() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p0.u0 == doctest::Approx(0.25));
    CHECK(p0.v1 == doctest::Approx(0.75));
    auto p1 = sched.patch_at(1.0);
    CHECK(p1.measure() == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(p1.u0 >= p0.u0);
    CHECK(p1.u1 <= p0.u1);
    CHECK(p1.v0 >= p0.v0);
    CHECK(p1.v1 <= p0.v1);
}

TEST_CASE("disk cap table profile matches its arc-length oracle") {
    // Cap whose arc length is 2*asin(exp(-t)): encode the area fraction as
    // a dense table and compare the scheduled arc against a polyline
    // length oracle on the circle.
    std::vector<std::pair<double, double>> tab;
    for (int i = 0; i <= 400; ++i) {
        double t = 3.0 * i / 400;
        tab.emplace_back(t, std::asin(std::exp(-t)) / std::asin(1.0));
    }
    auto profile = DecayProfile::table(tab);
    auto sched =
        make_schedule(Domain::disk(), std::numbers::pi, profile);
    for (double t : {0.25, 0.5, 1.0, 2.0}) {
        double expected = 2.0 * std::asin(std::exp(-t));
        auto arc = sched.arc_at(t);
        // Table interpolation, not the profile formula, sets the accuracy.
        CHECK(arc.measure() == doctest::Approx(expected).epsilon(5e-5));
        double oracle = polyline_arc_length(sched.domain(), arc.start,
                                            arc.end, 4000);
        CHECK(std::abs(oracle - arc.measure()) <= 1e-6);
    }
    // At t = 0 the cap is the upper half circle, centred on (0,1).
    auto arc0 = sched.arc_at(0.0);
    CHECK(arc0.start == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(arc0.end == doctest::Approx(std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("arc spanning a box corner stays on the closed curve") {
    auto sched = make_schedule(Domain::box(1.0, 1.0), 3.0,
                               DecayProfile::constant());
    auto arc = sched.arc_at(0.0);
    CHECK(arc.measure() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(arc.start >= 0.0);
    CHECK(arc.end <= sched.domain().boundary_measure());
    // Both endpoints land on distinct edges of the walk.
    auto d = sched.domain();
    CHECK(d.boundary_point(arc.start).edge !=
          d.boundary_point(arc.end).edge);
}

TEST_CASE("table profile holds its last value") {
    auto p = DecayProfile::table({{0.0, 1.0}, {1.0, 0.5}, {2.0, 0.25}});
    CHECK(p(0.5) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(p(1.5) == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(p(7.0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("invalid inputs are rejected") {
    auto box = Domain::box(1.0, 1.0);
    CHECK_THROWS_AS(make_schedule(box, 0.0, DecayProfile::constant()),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(box, 4.0, DecayProfile::constant()),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(box, -0.1, DecayProfile::constant()),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        make_schedule(Domain::box(1.0, 1.0, 1.0), 1.0,
                      DecayProfile::constant()),
        std::invalid_argument);

    CHECK_THROWS_AS(DecayProfile::table({{0.0, 0.9}, {1.0, 0.5}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DecayProfile::table({{0.0, 1.0}, {1.0, 1.2}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DecayProfile::table({{0.0, 1.0}, {1.0, 0.5}, {0.5, 0.4}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DecayProfile::polynomial(-1.0, 2.0),
                    std::invalid_argument);

    auto profile = DecayProfile::constant();
    CHECK_THROWS_AS(profile(-0.1), std::domain_error);

    auto sched = make_schedule(box, 0.1, DecayProfile::constant());
    CHECK_THROWS_AS(sched.patch_at(0.0), std::invalid_argument);
    CHECK_THROWS_AS(box.boundary_point(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(Domain::box(1.0, 1.0, 1.0).boundary_point(0.5),
                    std::invalid_argument);
}

TEST_CASE("interval coverage fractions") {
    CHECK(interval_coverage(0.0, 1.0, 0.25, 0.75) == doctest::Approx(0.5));
    CHECK(interval_coverage(0.0, 1.0, -1.0, 2.0) == doctest::Approx(1.0));
    CHECK(interval_coverage(0.0, 1.0, 2.0, 3.0) == doctest::Approx(0.0));
    CHECK(interval_coverage(0.5, 1.0, 0.0, 0.75) == doctest::Approx(0.5));
}

TEST_CASE("least squares fits recover synthetic laws") {
    std::vector<double> x, y;
    for (int i = 1; i <= 20; ++i) {
        x.push_back(0.1 * i);
        y.push_back(3.0 * std::pow(0.1 * i, -1.5));
    }
    auto fit = log_log_fit(x, y);
    CHECK(fit.slope == doctest::Approx(-1.5).epsilon(1e-10));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-10));
}
