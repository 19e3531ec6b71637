#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "nhkl/quadrature.hpp"
#include "nhkl/schedule.hpp"
#include "nhkl/util.hpp"

using namespace nhkl;
using namespace nhkl::sched;

namespace {

constexpr double kLn2 = std::numbers::ln2;

double series_term(double lambda, double s, double m) {
    return 1.0 / ((1.0 + m) * std::exp(s * std::log1p(lambda * m)));
}

// Tail of the series beyond m = cut, bracketed by shifted integrals of the
// continuous extension.  Integration runs in u with x = cut * e^u.
double integral_tail(double lambda, double s, double from, double tol) {
    auto f = [&](double u) {
        double x = from * std::exp(u);
        return series_term(lambda, s, x) * x;
    };
    return quad::integrate_adaptive(f, 0.0, 80.0, tol);
}

// Second, cruder strategy: power-law majorant/minorant of the tail.
void power_law_tail(double lambda, double s, double cut, double& lo,
                    double& hi) {
    double pref = std::exp(-s * std::log(lambda));
    hi = pref / (s * std::pow(cut, s));
    double squeeze = std::exp(-s * std::log1p(1.0 / (lambda * cut))) *
                     (cut / (1.0 + cut));
    lo = pref * squeeze / (s * std::pow(cut + 1.0, s));
}

double direct_sum(double lambda, double s, long terms) {
    KahanSum sum;
    for (long m = 0; m <= terms; ++m)
        sum.add(series_term(lambda, s, static_cast<double>(m)));
    return sum.value();
}

PipelineInput global_input() {
    PipelineInput in;
    in.mode = Mode::global;
    in.n = 2;
    in.q = 2.0;
    in.beta = 2.0;
    in.M0 = 1.3;
    in.gamma1_area = 0.12;
    in.c_hat = 3.7;
    return in;
}

PipelineInput capped_input() {
    PipelineInput in = global_input();
    in.mode = Mode::capped;
    in.M0 = 1.0;
    in.gamma1_area = 0.1;
    in.B = 5.0;
    return in;
}

}  // namespace

TEST_CASE("exponent choices match direct substitution") {
    struct Case {
        Mode mode;
        int n;
        double beta, alpha, alpha_tilde, s;
    };
    // Two independent reductions of the same choices: the midpoint form
    // used by the library and the fully simplified rational form.
    const Case cases[] = {
        {Mode::global, 2, 2.0, 0.75, 0.125, 0.0},
        {Mode::global, 3, 3.0, 5.0 / 12.0, 1.0 / 12.0, 0.0},
        {Mode::global, 3, 4.0, 3.0 / 8.0, 1.0 / 8.0, 0.0},
        {Mode::capped, 2, 2.0, 0.875, 0.0625, 0.5},
        {Mode::capped, 3, 3.0, 11.0 / 24.0, 1.0 / 24.0, 0.25},
        {Mode::capped, 3, 4.0, 7.0 / 16.0, 1.0 / 16.0, 0.5},
    };
    for (const auto& c : cases) {
        CAPTURE(c.n);
        CAPTURE(c.beta);
        PipelineInput in;
        in.mode = c.mode;
        in.n = c.n;
        in.q = 2.0;
        in.beta = c.beta;
        in.M0 = 1.0;
        in.gamma1_area = 0.1;
        in.c_hat = 2.0;
        in.B = c.mode == Mode::capped ? 3.0 : 0.0;
        auto out = build_constants(in);
        CHECK(out.alpha == doctest::Approx(c.alpha).epsilon(1e-14));
        CHECK(out.alpha_tilde ==
              doctest::Approx(c.alpha_tilde).epsilon(1e-14));
        double nm1 = c.n - 1.0;
        if (c.mode == Mode::global) {
            double alt = 0.25 * (1.0 - nm1 / c.beta);
            CHECK(out.alpha_tilde == doctest::Approx(alt).epsilon(1e-14));
        } else {
            CHECK(out.s == doctest::Approx(c.s).epsilon(1e-14));
            double alt_a = 0.25 * (1.0 / c.beta + 3.0 / nm1);
            double alt_t = 0.125 * (1.0 - nm1 / c.beta);
            CHECK(out.alpha == doctest::Approx(alt_a).epsilon(1e-14));
            CHECK(out.alpha_tilde ==
                  doctest::Approx(alt_t).epsilon(1e-14));
            CHECK(out.alpha > (1.0 + out.s) / c.beta);
        }
        CHECK(out.alpha > 1.0 / c.beta);
        CHECK(out.alpha < 1.0 / nm1);
        CHECK(out.alpha_tilde > 0.0);
        CHECK(out.alpha_tilde < 0.25);
    }
}

TEST_CASE("constant assembly matches a direct pow-based evaluation") {
    SUBCASE("unconstrained schedule") {
        auto in = global_input();
        auto c = build_constants(in);
        double at = 0.125, ba = in.beta * 0.75;
        double c1 = std::pow(
            kLn2 / (in.c_hat * std::pow(1.0 + kLn2, in.q)), 1.0 / at);
        double c2 = c.induction_infimum / in.c_hat;
        double c3 = std::pow(c2, -1.0 / ba) *
                    std::max(1.0, std::pow(c1, at / ba - 1.0));
        double y = std::pow(in.M0, in.q - 1.0) *
                   std::pow(in.gamma1_area, 0.75);
        double tstar = std::min(1.0, c1 * std::pow(y, -1.0 / at));
        double cstar =
            c3 * std::max(std::pow(y, 1.0 / ba), std::pow(y, 1.0 / at));
        CHECK(c.C1 == doctest::Approx(c1).epsilon(1e-13));
        CHECK(c.C2 == doctest::Approx(c2).epsilon(1e-13));
        CHECK(c.C3 == doctest::Approx(c3).epsilon(1e-13));
        CHECK(c.Y == doctest::Approx(y).epsilon(1e-13));
        CHECK(c.t_star == doctest::Approx(tstar).epsilon(1e-13));
        CHECK(c.C_star == doctest::Approx(cstar).epsilon(1e-13));
    }
    SUBCASE("capped schedule") {
        auto in = capped_input();
        auto c = build_constants(in);
        double s = 0.5, at = 0.0625, ba = in.beta * 0.875;
        double lam = c.lambda_B;
        CHECK(lam > 0.0);
        double inner = std::pow(2.0, in.q - 1.0) / in.c_hat *
                       std::pow(1.0 + lam, (in.q - 1.0) * s) /
                       std::pow(1.0 + 2.0 * std::pow(1.0 + lam, s), in.q);
        double c1 = std::pow(inner, 1.0 / at);
        double c2 =
            c.induction_infimum / (in.c_hat * std::pow(1.0 + lam, s));
        double c3 = std::pow(c2, -1.0 / ba) *
                    std::max(1.0, std::pow(c1, at / ba - 1.0));
        double y = std::pow(in.M0, in.q - 1.0) *
                   std::pow(in.gamma1_area, 0.875);
        double cstar =
            c3 * std::max(std::pow(y, 1.0 / ba), std::pow(y, 1.0 / at));
        CHECK(c.C1 == doctest::Approx(c1).epsilon(1e-13));
        CHECK(c.C2 == doctest::Approx(c2).epsilon(1e-13));
        CHECK(c.C3 == doctest::Approx(c3).epsilon(1e-13));
        CHECK(c.C_star == doctest::Approx(cstar).epsilon(1e-13));
    }
}

TEST_CASE("series sum matches direct summation with bracketed tails") {
    const double pairs[][2] = {{1.0, 0.5}, {0.01, 0.5}, {100.0, 1.5}};
    for (auto [lambda, s] : pairs) {
        CAPTURE(lambda);
        CAPTURE(s);
        const double cut = 1e6;
        double head = direct_sum(lambda, s, static_cast<long>(cut));
        // The cruder power-law strategy brackets the tail and also sets
        // the absolute scale the quadrature tolerance must resolve.
        double pl_lo, pl_hi;
        power_law_tail(lambda, s, cut, pl_lo, pl_hi);
        double qtol = std::max(1e-18, 1e-6 * pl_hi);
        double int_hi = integral_tail(lambda, s, cut, qtol);
        double int_lo = integral_tail(lambda, s, cut + 1.0, qtol);
        double tail_a = 0.5 * (int_lo + int_hi);
        CHECK(int_hi - int_lo < 1e-7);
        CHECK(tail_a >= pl_lo - 2.0 * qtol);
        CHECK(tail_a <= pl_hi + 2.0 * qtol);
        if (lambda == 1.0)
            CHECK(std::abs(tail_a - 0.5 * (pl_lo + pl_hi)) < 1e-7);

        double value = g_s(lambda, s, 1e-10);
        CHECK(value == doctest::Approx(head + tail_a).epsilon(1e-9));
        CHECK(value > 1.0);
    }
    CHECK(g_s(0.5, 0.5) > g_s(0.7, 0.5));
    CHECK(g_s(1e12, 0.5) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(g_s(1e12, 0.5) > 1.0);
    CHECK(g_s_excess(1.0, 0.5) ==
          doctest::Approx(g_s(1.0, 0.5) - 1.0).epsilon(1e-12));
}

TEST_CASE("cap inversion round-trips and end limits") {
    for (double r : {1.01, 2.0, 10.0, 100.0}) {
        for (double s : {0.25, 0.5, 1.5}) {
            CAPTURE(r);
            CAPTURE(s);
            double lam = lambda_b(r, s);
            CHECK(lam > 0.0);
            CHECK(g_s(lam, s) == doctest::Approx(r).epsilon(1e-9));
        }
    }
    CHECK(lambda_b(1.0 + 1e-9, 0.5) > 1e6);
    CHECK(lambda_b(2.0, 0.5) > lambda_b(10.0, 0.5));
    CHECK(lambda_b(10.0, 0.5) > lambda_b(100.0, 0.5));
    // Caps so large that the solution is not representable flush to zero,
    // the exact limit value.
    CHECK(lambda_b(1e6, 0.5) == 0.0);
    CHECK(lambda_b(10.0, 2.0, 0.5, 1e-10) ==
          doctest::Approx(lambda_b(5.0, 0.5)).epsilon(1e-12));
    CHECK_THROWS_AS((void)lambda_b(0.99, 0.5), std::domain_error);
    CHECK_THROWS_AS((void)lambda_b(2.0, 0.0), std::domain_error);
    CHECK_THROWS_AS((void)g_s(1.0, -0.5), std::domain_error);
    CHECK_THROWS_AS((void)g_s(-1.0, 0.5), std::invalid_argument);
}

TEST_CASE("milestone sequences") {
    SUBCASE("unbounded growth schedule") {
        auto c = build_constants(global_input());
        CHECK(c.milestone(0) == doctest::Approx(c.M0).epsilon(1e-15));
        CHECK(c.milestone(1) ==
              doctest::Approx((1.0 + kLn2) * c.M0).epsilon(1e-14));
        auto seq = milestones(c, 2000);
        REQUIRE(seq.values.size() == 2001);
        for (std::size_t k = 1; k < seq.values.size(); ++k)
            CHECK(seq.values[k] > seq.values[k - 1]);
        CHECK(c.milestone(100000) > 12.0 * c.M0);
    }
    SUBCASE("capped schedule approaches the cap from below") {
        auto in = capped_input();
        auto c = build_constants(in);
        auto seq = milestones(c, 100000);
        REQUIRE(seq.values.size() == 100001);
        CHECK(seq.values[0] == doctest::Approx(c.M0).epsilon(1e-15));
        double prev_gap = in.B - seq.values[0];
        CHECK(prev_gap > 0.0);
        for (std::size_t k = 1; k < seq.values.size(); ++k) {
            double gap = in.B - seq.values[k];
            REQUIRE(gap > 0.0);
            REQUIRE(gap < prev_gap);
            prev_gap = gap;
        }
        CHECK(prev_gap / in.B < 0.05);
        for (long k : {0L, 7L, 999L})
            CHECK(c.milestone(k) ==
                  doctest::Approx(seq.values[k]).epsilon(1e-13));
    }
}

TEST_CASE("pipeline invariants across a parameter grid") {
    for (int mode_i = 0; mode_i < 2; ++mode_i) {
        for (int n : {2, 3}) {
            for (double db : {0.5, 1.5}) {
                for (double q : {1.5, 2.0, 3.0}) {
                    for (double m0 : {0.5, 2.0}) {
                        for (double area : {0.05, 0.5}) {
                            PipelineInput in;
                            in.mode = mode_i == 0 ? Mode::global
                                                  : Mode::capped;
                            in.n = n;
                            in.beta = (n - 1) + db;
                            in.q = q;
                            in.M0 = m0;
                            in.gamma1_area = area;
                            in.c_hat = 2.3;
                            in.B = 4.0 * m0;
                            CAPTURE(mode_i);
                            CAPTURE(n);
                            CAPTURE(in.beta);
                            CAPTURE(q);
                            CAPTURE(m0);
                            CAPTURE(area);
                            auto c = build_constants(in);
                            CHECK(c.t_star > 0.0);
                            CHECK(c.t_star <= 1.0);
                            for (double v : {c.Y, c.C1, c.C2, c.C3,
                                             c.C_star,
                                             c.induction_infimum}) {
                                CHECK(std::isfinite(v));
                                CHECK(v > 0.0);
                            }
                            // First induction step: the decay the
                            // schedule promises at t_star is affordable
                            // given the divergent-factor infimum.
                            double ba = in.beta * c.alpha;
                            double lhs = std::log(c.C2) +
                                         ba * (std::log(c.C_star) +
                                               std::log(c.t_star)) -
                                         std::log(c.Y);
                            double rhs =
                                c.alpha_tilde * std::log(c.t_star);
                            CHECK(lhs >= rhs - 1e-12);
                            auto prof = c.profile();
                            CHECK(prof(0.0) == 1.0);
                            CHECK(prof(1.0) < 1.0);
                            CHECK(prof(2.0) < prof(1.0));
                            CHECK(c.milestone(1) > c.milestone(0));
                            if (in.mode == Mode::capped) {
                                double z = in.c_hat *
                                           std::pow(1.0 + c.lambda_B,
                                                    c.s);
                                CHECK(c.C2 ==
                                      doctest::Approx(
                                          c.induction_infimum / z)
                                          .epsilon(1e-12));
                            }
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("unit size collapses the profile constant") {
    auto in = global_input();
    in.M0 = 1.0;
    in.gamma1_area = 1.0;
    auto c = build_constants(in);
    CHECK(c.Y == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.C_star == doctest::Approx(c.C3).epsilon(1e-14));
}

TEST_CASE("profile constant grows with the initial data") {
    auto in = global_input();
    auto base = build_constants(in);
    in.M0 *= 2.0;
    auto bigger_m0 = build_constants(in);
    CHECK(bigger_m0.Y > base.Y);
    CHECK(bigger_m0.C_star > base.C_star);
    in = global_input();
    in.gamma1_area *= 2.0;
    auto bigger_area = build_constants(in);
    CHECK(bigger_area.Y > base.Y);
    CHECK(bigger_area.C_star > base.C_star);
}

TEST_CASE("cap sweep diverges near the initial supremum and plateaus") {
    auto base = capped_input();
    std::vector<double> caps = {1.0 + 1e-6, 2.0, 10.0, 100.0,
                                1e3,        1e4, 1e5,  1e6};
    auto rep = verify_schedule_end_behavior(base, caps);
    REQUIRE(rep.points.size() == caps.size());
    CHECK(rep.points[0].c_star > 1e3 * rep.points[1].c_star);
    CHECK(rep.points[1].c_star > rep.points[2].c_star);
    CHECK(rep.plateau_ratio <= 0.01);
    CHECK(rep.divergence_ratio > 1e3);
    for (std::size_t i = 1; i < rep.points.size(); ++i)
        CHECK(rep.points[i].lambda_B <= rep.points[i - 1].lambda_B);
    auto parsed = nlohmann::json::parse(rep.to_json());
    CHECK(parsed["points"].size() == caps.size());
    CHECK(parsed["plateau_ratio"].get<double>() ==
          doctest::Approx(rep.plateau_ratio));
}

TEST_CASE("parameter validation") {
    auto in = global_input();
    in.beta = 1.0;
    CHECK_THROWS_AS((void)build_constants(in), std::invalid_argument);
    in = global_input();
    in.n = 3;
    in.beta = 2.0;
    CHECK_THROWS_AS((void)build_constants(in), std::invalid_argument);
    in = global_input();
    in.q = 1.0;
    CHECK_THROWS_AS((void)build_constants(in), std::invalid_argument);
    in = global_input();
    in.c_hat = 0.0;
    CHECK_THROWS_AS((void)build_constants(in), std::invalid_argument);
    in = global_input();
    in.alpha_override = 0.4;  // below 1/beta
    CHECK_THROWS_AS((void)build_constants(in), std::invalid_argument);
    in = global_input();
    in.alpha_override = 1.1;  // above 1/(n-1)
    CHECK_THROWS_AS((void)build_constants(in), std::invalid_argument);
    auto cap = capped_input();
    cap.B = 0.5;
    CHECK_THROWS_AS((void)build_constants(cap), std::domain_error);
    cap = capped_input();
    cap.s_override = 1.2;  // at or above beta/(n-1) - 1
    CHECK_THROWS_AS((void)build_constants(cap), std::invalid_argument);
    auto good = build_constants(capped_input());
    CHECK_THROWS_AS((void)good.milestone(-1), std::invalid_argument);
}

TEST_CASE("constants serialize with mode-dependent fields") {
    auto c = build_constants(capped_input());
    auto j = nlohmann::json::parse(c.to_json());
    CHECK(j["mode"] == "capped");
    CHECK(j["alpha"].get<double>() == doctest::Approx(c.alpha));
    CHECK(j["C_star"].get<double>() == doctest::Approx(c.C_star));
    CHECK(j["lambda_B"].get<double>() == doctest::Approx(c.lambda_B));
    auto g = nlohmann::json::parse(build_constants(global_input()).to_json());
    CHECK(g["mode"] == "global");
    CHECK(!g.contains("lambda_B"));
}
