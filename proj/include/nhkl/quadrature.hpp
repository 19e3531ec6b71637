#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>

namespace nhkl::quad {

/// 8-point Gauss-Legendre rule on [-1,1]; exact through degree 15.
inline constexpr std::array<double, 8> kGL8Nodes = {
    -0.96028985649753623168, -0.79666647741362673959,
    -0.52553240991632898582, -0.18343464249564980494,
    0.18343464249564980494,  0.52553240991632898582,
    0.79666647741362673959,  0.96028985649753623168};

inline constexpr std::array<double, 8> kGL8Weights = {
    0.10122853629037625915, 0.22238103445337447054,
    0.31370664587788728734, 0.36268378337836198297,
    0.36268378337836198297, 0.31370664587788728734,
    0.22238103445337447054, 0.10122853629037625915};

template <class F>
double gl8(F&& f, double a, double b) {
    double mid = 0.5 * (a + b);
    double half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < 8; ++i)
        s += kGL8Weights[i] * f(mid + half * kGL8Nodes[i]);
    return half * s;
}

template <class F>
double composite_gl8(F&& f, double a, double b, int panels) {
    if (panels < 1) panels = 1;
    double h = (b - a) / panels;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) s += gl8(f, a + p * h, a + (p + 1) * h);
    return s;
}

namespace detail {
template <class F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm,
                            double fb, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol,
                                depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol,
                                depth - 1);
}
}  // namespace detail

/// Adaptive Simpson; used where integrands are smooth but the needed panel
/// count is not known in advance (profile arc lengths, series tails).
template <class F>
double integrate_adaptive(F&& f, double a, double b, double tol,
                          int max_depth = 40) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol,
                                        max_depth);
}

}  // namespace nhkl::quad
