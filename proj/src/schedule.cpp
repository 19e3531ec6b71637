#include "nhkl/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "nhkl/quadrature.hpp"
#include "nhkl/util.hpp"

namespace nhkl::sched {

namespace {

constexpr double kLn2 = std::numbers::ln2;

double log1p_exp(double z) { return z > 35.0 ? z : std::log1p(std::exp(z)); }

// log(1 + 2 e^z) without overflow.
double log1p_2exp(double z) {
    return z > 35.0 ? z + kLn2 : std::log1p(2.0 * std::exp(z));
}

double series_term(double lambda, double s, double m) {
    return 1.0 / ((1.0 + m) * std::exp(s * std::log1p(lambda * m)));
}

/// Sum over m >= head_start of the series, as head + integral tail with
/// Euler-Maclaurin endpoint corrections.  The integral runs in y = log m
/// so no intermediate overflows for any representable lambda.
double series_from(double lambda, double s, long head_start, double tol) {
    double target = 0.25 * std::clamp(tol, 1e-15, 1e-6);
    long cut = 256;
    for (;;) {
        // Correction-series remainder scale at the cut.
        double fa = series_term(lambda, s, cut);
        double scale = (3.0 + 3.0 * s) / cut;
        if (fa * scale * scale * scale / 30.0 < target || cut >= 1000000)
            break;
        cut *= 4;
    }

    KahanSum head;
    for (long m = head_start; m < cut; ++m)
        head.add(series_term(lambda, s, m));

    double a = static_cast<double>(cut);
    double log_lambda = std::log(lambda);
    // integrand of the tail in y = log x: x f(x).
    auto integrand = [&](double y) {
        return std::exp(y - log1p_exp(y) - s * log1p_exp(y + log_lambda));
    };
    double y0 = std::log(a);
    double y1 = std::max(y0, -log_lambda) + 60.0 / s + 20.0;
    int panels = static_cast<int>(std::ceil((y1 - y0) / 0.5));
    if (panels > 2000000)
        throw std::domain_error("series tail integration infeasible: s too "
                                "close to zero");
    double integral = quad::composite_gl8(integrand, y0, y1, panels);

    double fa = series_term(lambda, s, cut);
    double inv_lam = 1.0 / lambda;
    double u = 1.0 / (1.0 + a) + s / (inv_lam + a);
    double v = 1.0 / ((1.0 + a) * (1.0 + a)) +
               s / ((inv_lam + a) * (inv_lam + a));
    double w = 2.0 / std::pow(1.0 + a, 3) + 2.0 * s / std::pow(inv_lam + a, 3);
    // tail = integral + f(a)/2 - f'(a)/12 + f'''(a)/720.
    double tail = integral + fa * (0.5 + u / 12.0 -
                                   (u * u * u + 3.0 * u * v + w) / 720.0);
    return head.value() + tail;
}

void check_gs_args(double lambda, double s) {
    if (!(s > 0.0))
        throw std::domain_error("series diverges unless s > 0");
    require(lambda > 0.0, "lambda must be positive");
}

double ln_h_global(double y, double ba, double q) {
    if (y > 30.0) return ba * y - y - q * std::log1p(y);
    double j = std::exp(y);
    return ba * y + std::log(std::log1p(1.0 / (j + 1.0))) -
           q * std::log(1.0 + std::log(j + 2.0));
}

double ln_h_capped(double y, double ba, double q, double s) {
    if (y > 30.0) return ba * y - (1.0 + s) * y - q * std::log1p(y);
    double j = std::exp(y);
    return ba * y - q * std::log(1.0 + std::log(j + 2.0)) -
           (1.0 + s) * std::log(j + 2.0);
}

/// Infimum over j >= 1 of the divergent induction factor.  Integer scan
/// near the origin plus a continuous relaxation around the asymptotic
/// critical point; the continuous value can only undershoot the integer
/// infimum, which keeps the downstream constants conservative.
double induction_infimum(bool capped, double ba, double q, double s) {
    double drift = capped ? ba - 1.0 - s : ba - 1.0;
    require(drift > 0.0, "induction factor does not diverge");
    auto lnh = [&](double y) {
        return capped ? ln_h_capped(y, ba, q, s) : ln_h_global(y, ba, q);
    };
    double best = std::numeric_limits<double>::infinity();
    for (long j = 1; j <= 100000; ++j)
        best = std::min(best, lnh(std::log(static_cast<double>(j))));
    double y_star = std::max(q / drift - 1.0, 1.0);
    double hi = std::max(60.0, 4.0 * y_star);
    double step = std::max(0.25, y_star / 40.0);
    for (double y = std::log(1e5); y <= hi; y += step)
        best = std::min(best, lnh(y));
    require(best > -700.0 && best < 700.0,
            "induction infimum outside double range");
    return std::exp(best);
}

double checked_exp(double lv, const char* what) {
    if (!(lv > -700.0 && lv < 700.0))
        throw std::domain_error(std::string(what) +
                                " falls outside double range; parameters "
                                "too extreme");
    return std::exp(lv);
}

}  // namespace

double g_s_excess(double lambda, double s, double tol) {
    check_gs_args(lambda, s);
    return series_from(lambda, s, 1, tol);
}

double g_s(double lambda, double s, double tol) {
    // The m = 0 term is exactly 1.
    return 1.0 + g_s_excess(lambda, s, tol);
}

double lambda_b(double ratio, double s, double tol) {
    if (!(s > 0.0))
        throw std::domain_error("series diverges unless s > 0");
    if (!(ratio > 1.0))
        throw std::domain_error("cap ratio must exceed 1");
    double excess = ratio - 1.0;

    // Bisection in y = log(lambda); the series is decreasing in lambda.
    double y_lo = 0.0, y_hi = 0.0;
    while (g_s_excess(std::exp(y_lo), s) < excess) {
        y_lo -= 16.0;
        if (y_lo < -691.0) return 0.0;  // beyond doubles: the limit case
    }
    while (g_s_excess(std::exp(y_hi), s) > excess) {
        y_hi += 16.0;
        if (y_hi > 700.0)
            throw std::domain_error(
                "cap is too close to the initial supremum to resolve");
    }
    for (int it = 0; it < 200 && y_hi - y_lo > 1e-14 * (1.0 + std::abs(y_lo));
         ++it) {
        double mid = 0.5 * (y_lo + y_hi);
        (g_s_excess(std::exp(mid), s) > excess ? y_lo : y_hi) = mid;
    }
    double lam = std::exp(0.5 * (y_lo + y_hi));
    double resid = std::abs(g_s_excess(lam, s) - excess);
    if (resid > std::max(tol, 1e-11 * ratio))
        throw std::runtime_error("cap inversion residual above tolerance");
    return lam;
}

double lambda_b(double cap, double m0, double s, double tol) {
    require(m0 > 0.0, "initial supremum must be positive");
    if (!(cap > m0))
        throw std::domain_error("cap must exceed the initial supremum");
    return lambda_b(cap / m0, s, tol);
}

geo::DecayProfile ScheduleConstants::profile() const {
    return geo::DecayProfile::polynomial(C_star, beta);
}

double ScheduleConstants::milestone(long k) const {
    require(k >= 0, "milestone index must be nonnegative");
    if (mode == Mode::global) return M0 * (1.0 + std::log1p(double(k)));
    KahanSum sum;
    for (long m = 0; m <= k; ++m)
        sum.add(series_term(lambda_B, s, static_cast<double>(m)));
    return M0 * sum.value();
}

std::string ScheduleConstants::to_json() const {
    nlohmann::json j;
    j["mode"] = mode == Mode::global ? "global" : "capped";
    j["n"] = n;
    j["q"] = q;
    j["beta"] = beta;
    j["M0"] = M0;
    j["gamma1_area"] = gamma1_area;
    j["c_hat"] = c_hat;
    j["alpha"] = alpha;
    j["alpha_tilde"] = alpha_tilde;
    j["Y"] = Y;
    j["C1"] = C1;
    j["C2"] = C2;
    j["C3"] = C3;
    j["t_star"] = t_star;
    j["C_star"] = C_star;
    j["induction_infimum"] = induction_infimum;
    if (mode == Mode::capped) {
        j["B"] = B;
        j["s"] = s;
        j["lambda_B"] = lambda_B;
    }
    return j.dump(2);
}

ScheduleConstants build_constants(const PipelineInput& in) {
    require(in.n == 2 || in.n == 3, "dimension must be 2 or 3");
    require(in.q > 1.0, "nonlinearity exponent must exceed 1");
    require(in.M0 > 0.0 && in.gamma1_area > 0.0,
            "initial supremum and region size must be positive");
    require(in.c_hat > 0.0, "calibrated constant must be positive");
    double nm1 = in.n - 1.0;
    if (!(in.beta > nm1))
        throw std::invalid_argument(
            "decay exponent must exceed n - 1 for the construction");

    ScheduleConstants c;
    c.mode = in.mode;
    c.n = in.n;
    c.q = in.q;
    c.beta = in.beta;
    c.M0 = in.M0;
    c.gamma1_area = in.gamma1_area;
    c.c_hat = in.c_hat;

    double lnC1;
    if (in.mode == Mode::global) {
        c.alpha = in.alpha_override > 0.0
                      ? in.alpha_override
                      : 0.5 * (1.0 / in.beta + 1.0 / nm1);
        require(c.alpha > 1.0 / in.beta && c.alpha < 1.0 / nm1,
                "alpha outside (1/beta, 1/(n-1))");
        c.alpha_tilde = 0.5 * (1.0 - nm1 * c.alpha);
        lnC1 = (std::log(kLn2) - std::log(in.c_hat) -
                in.q * std::log(1.0 + kLn2)) /
               c.alpha_tilde;
        c.induction_infimum =
            induction_infimum(false, in.beta * c.alpha, in.q, 0.0);
        c.C2 = c.induction_infimum / in.c_hat;
    } else {
        if (!(in.B > in.M0))
            throw std::domain_error("cap must exceed the initial supremum");
        c.B = in.B;
        c.s = in.s_override > 0.0 ? in.s_override
                                  : 0.5 * (in.beta / nm1 - 1.0);
        require(c.s > 0.0 && c.s < in.beta / nm1 - 1.0 + 1e-15,
                "s outside (0, beta/(n-1) - 1)");
        c.alpha = in.alpha_override > 0.0
                      ? in.alpha_override
                      : 0.5 * ((1.0 + c.s) / in.beta + 1.0 / nm1);
        require(c.alpha > (1.0 + c.s) / in.beta && c.alpha < 1.0 / nm1,
                "alpha outside ((1+s)/beta, 1/(n-1))");
        c.alpha_tilde = 0.5 * (1.0 - nm1 * c.alpha);
        c.lambda_B = lambda_b(in.B / in.M0, c.s);
        double z = c.s * std::log1p(c.lambda_B);
        lnC1 = ((in.q - 1.0) * kLn2 - std::log(in.c_hat) +
                (in.q - 1.0) * z - in.q * log1p_2exp(z)) /
               c.alpha_tilde;
        c.induction_infimum =
            induction_infimum(true, in.beta * c.alpha, in.q, c.s);
        c.C2 = checked_exp(std::log(c.induction_infimum) -
                               std::log(in.c_hat) - z,
                           "C2");
    }

    double ba = in.beta * c.alpha;
    double lnY = (in.q - 1.0) * std::log(in.M0) +
                 c.alpha * std::log(in.gamma1_area);
    double ln_tstar = std::min(0.0, lnC1 - lnY / c.alpha_tilde);
    double lnC2 = std::log(c.C2);
    double lnC3 = -lnC2 / ba + std::max(0.0, (c.alpha_tilde / ba - 1.0) *
                                                 lnC1);
    double lnCstar = lnC3 + std::max(lnY / ba, lnY / c.alpha_tilde);

    c.Y = checked_exp(lnY, "Y");
    c.C1 = checked_exp(lnC1, "C1");
    c.C3 = checked_exp(lnC3, "C3");
    c.t_star = checked_exp(ln_tstar, "t_star");
    c.C_star = checked_exp(lnCstar, "C_star");
    return c;
}

MilestoneSequence milestones(const ScheduleConstants& c, long k_max) {
    require(k_max >= 0, "milestone count must be nonnegative");
    MilestoneSequence seq;
    seq.mode = c.mode;
    seq.M0 = c.M0;
    seq.lambda_B = c.lambda_B;
    seq.s = c.s;
    seq.cap = c.B;
    seq.values.reserve(k_max + 1);
    if (c.mode == Mode::global) {
        for (long k = 0; k <= k_max; ++k)
            seq.values.push_back(c.M0 * (1.0 + std::log1p(double(k))));
    } else {
        KahanSum sum;
        for (long k = 0; k <= k_max; ++k) {
            sum.add(series_term(c.lambda_B, c.s, static_cast<double>(k)));
            seq.values.push_back(c.M0 * sum.value());
        }
    }
    return seq;
}

std::string EndBehaviorReport::to_json() const {
    nlohmann::json j;
    j["divergence_ratio"] = divergence_ratio;
    j["plateau_ratio"] = plateau_ratio;
    auto& arr = j["points"] = nlohmann::json::array();
    for (const auto& p : points)
        arr.push_back({{"B", p.B},
                       {"lambda_B", p.lambda_B},
                       {"c_star", p.c_star}});
    return j.dump(2);
}

EndBehaviorReport verify_schedule_end_behavior(
    const PipelineInput& base, const std::vector<double>& caps) {
    require(caps.size() >= 3, "cap sweep needs at least three values");
    require(std::is_sorted(caps.begin(), caps.end()),
            "cap sweep must be increasing");
    EndBehaviorReport rep;
    PipelineInput in = base;
    in.mode = Mode::capped;
    for (double cap : caps) {
        in.B = cap;
        auto c = build_constants(in);
        rep.points.push_back({cap, c.lambda_B, c.C_star});
    }
    rep.divergence_ratio =
        rep.points.front().c_star / rep.points.back().c_star;
    std::size_t last = rep.points.size() - 1;
    rep.plateau_ratio = std::abs(
        rep.points[last].c_star / rep.points[last - 1].c_star - 1.0);
    return rep;
}

}  // namespace nhkl::sched
