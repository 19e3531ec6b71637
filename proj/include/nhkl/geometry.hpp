#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace nhkl::geo {

enum class DomainKind { box2d, box3d, disk2d };

/// Spatial domain.  Boxes are [0,a]x[0,b] or [0,a]x[0,b]x[0,c]; the disk is
/// the unit disk centred at the origin.  The 2D boundary is addressed by a
/// single arc-length coordinate s running once around the full boundary
/// curve: boxes walk counterclockwise from the origin (bottom, right, top,
/// left edge in that order), the circle starts at (1,0).
class Domain {
public:
    static Domain box(double a, double b);
    static Domain box(double a, double b, double c);
    static Domain disk();

    DomainKind kind() const { return kind_; }
    int dimension() const { return kind_ == DomainKind::box3d ? 3 : 2; }
    double extent(int axis) const { return len_[axis]; }

    double volume() const;
    /// Total boundary measure: perimeter in 2D, surface area in 3D.
    double boundary_measure() const;

    struct CurvePoint {
        std::array<double, 2> xy;
        std::array<double, 2> outward_normal;
        int edge;  // box edge index 0..3; always 0 on the circle
    };
    /// Maps an arc-length coordinate on the 2D boundary curve to a point.
    CurvePoint boundary_point(double s) const;

    std::string describe() const;

private:
    DomainKind kind_ = DomainKind::box2d;
    std::array<double, 3> len_ = {1.0, 1.0, 1.0};
};

/// Connected sub-arc of the 2D boundary curve, in the global arc-length
/// coordinate.  Invariant: 0 <= start < end <= curve length, so an arc may
/// span box corners but never wraps through s = 0.
struct BoundaryArc {
    int edge_id = 0;
    double start = 0.0;
    double end = 0.0;
    double measure() const { return end - start; }
    bool contains(double s) const { return s >= start && s <= end; }
};

/// Axis-aligned rectangle on a 3D box face.  Only face 0 (z = 0) is used by
/// the schedules built here.
struct BoundaryPatch {
    int face_id = 0;
    double u0 = 0.0, u1 = 0.0;  // x-range on the face
    double v0 = 0.0, v1 = 0.0;  // y-range on the face
    double measure() const { return (u1 - u0) * (v1 - v0); }
};

/// Nonincreasing area fraction f with f(0) = 1 and f > 0.
class DecayProfile {
public:
    enum class Kind { constant, polynomial, exponential, table };

    static DecayProfile constant();
    /// f(t) = (1 + C t)^(-beta); requires C >= 0, beta >= 0.
    static DecayProfile polynomial(double C, double beta);
    /// f(t) = exp(-rate t); requires rate >= 0.
    static DecayProfile exponential(double rate);
    /// Piecewise-linear interpolation of (t, f) samples; the value is held
    /// constant past the last sample.  Samples must start at t = 0 with
    /// f = 1, have strictly increasing times, and be positive and
    /// nonincreasing.
    static DecayProfile table(std::vector<std::pair<double, double>> samples);

    double operator()(double t) const;
    Kind kind() const { return kind_; }
    double coefficient() const { return C_; }
    double exponent() const { return beta_; }
    double rate() const { return rate_; }
    const std::vector<std::pair<double, double>>& samples() const {
        return samples_;
    }
    std::string describe() const;

private:
    Kind kind_ = Kind::constant;
    double C_ = 0.0;
    double beta_ = 0.0;
    double rate_ = 0.0;
    std::vector<std::pair<double, double>> samples_;
};

enum class Anchor { center, left_end };

/// Time-dependent radiating boundary portion.  The region at time t has
/// measure gamma1_area * f(t); shrinkage keeps later regions nested inside
/// earlier ones (anchor = center shrinks symmetrically, left_end keeps the
/// low-coordinate end fixed).
class BoundarySchedule {
public:
    const Domain& domain() const { return domain_; }
    double initial_area() const { return area0_; }
    const DecayProfile& profile() const { return profile_; }
    Anchor anchor() const { return anchor_; }

    double area_at(double t) const;
    /// 2D only: the radiating arc at time t.
    BoundaryArc arc_at(double t) const;
    /// 3D only: the radiating square patch on face z = 0 at time t.
    BoundaryPatch patch_at(double t) const;

    std::string describe() const;

private:
    friend BoundarySchedule make_schedule(const Domain&, double,
                                          const DecayProfile&, Anchor);
    Domain domain_;
    double area0_ = 0.0;
    DecayProfile profile_ = DecayProfile::constant();
    Anchor anchor_ = Anchor::center;
    double center_ = 0.0;          // 2D: arc-length centre of the region
    double left_ = 0.0;            // 2D left_end anchor position
    std::array<double, 2> patch_center_ = {0.0, 0.0};
    std::array<double, 2> patch_corner_ = {0.0, 0.0};
};

/// Builds a schedule with the region placed on its natural site: centred on
/// the bottom edge for 2D boxes (falling back to the midpoint of the
/// boundary walk when the region is too long to fit without wrapping), at
/// the top of the circle for the disk, centred on face z = 0 for 3D boxes.
/// Requires 0 < gamma1_area < total boundary measure; for 3D the initial
/// square patch must fit strictly inside the face.
BoundarySchedule make_schedule(const Domain& domain, double gamma1_area,
                               const DecayProfile& profile,
                               Anchor anchor = Anchor::center);

/// Fraction of the interval [lo, hi] covered by [a, b].
double interval_coverage(double lo, double hi, double a, double b);

}  // namespace nhkl::geo
