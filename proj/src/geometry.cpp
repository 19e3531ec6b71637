#include "nhkl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "nhkl/util.hpp"

namespace nhkl::geo {

Domain Domain::box(double a, double b) {
    require(a > 0.0 && b > 0.0, "box sides must be positive");
    Domain d;
    d.kind_ = DomainKind::box2d;
    d.len_ = {a, b, 0.0};
    return d;
}

Domain Domain::box(double a, double b, double c) {
    require(a > 0.0 && b > 0.0 && c > 0.0, "box sides must be positive");
    Domain d;
    d.kind_ = DomainKind::box3d;
    d.len_ = {a, b, c};
    return d;
}

Domain Domain::disk() {
    Domain d;
    d.kind_ = DomainKind::disk2d;
    d.len_ = {1.0, 1.0, 0.0};
    return d;
}

double Domain::volume() const {
    switch (kind_) {
        case DomainKind::box2d: return len_[0] * len_[1];
        case DomainKind::box3d: return len_[0] * len_[1] * len_[2];
        case DomainKind::disk2d: return std::numbers::pi;
    }
    return 0.0;
}

double Domain::boundary_measure() const {
    switch (kind_) {
        case DomainKind::box2d: return 2.0 * (len_[0] + len_[1]);
        case DomainKind::box3d:
            return 2.0 * (len_[0] * len_[1] + len_[0] * len_[2] +
                          len_[1] * len_[2]);
        case DomainKind::disk2d: return 2.0 * std::numbers::pi;
    }
    return 0.0;
}

Domain::CurvePoint Domain::boundary_point(double s) const {
    require(kind_ != DomainKind::box3d,
            "boundary_point addresses the 2D boundary curve");
    double per = boundary_measure();
    require(s >= 0.0 && s <= per, "arc-length coordinate out of range");
    if (kind_ == DomainKind::disk2d) {
        return {{std::cos(s), std::sin(s)}, {std::cos(s), std::sin(s)}, 0};
    }
    double a = len_[0], b = len_[1];
    if (s <= a) return {{s, 0.0}, {0.0, -1.0}, 0};
    if (s <= a + b) return {{a, s - a}, {1.0, 0.0}, 1};
    if (s <= 2.0 * a + b) return {{a - (s - a - b), b}, {0.0, 1.0}, 2};
    return {{0.0, b - (s - 2.0 * a - b)}, {-1.0, 0.0}, 3};
}

std::string Domain::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case DomainKind::box2d:
            os << "box2d(" << len_[0] << "," << len_[1] << ")";
            break;
        case DomainKind::box3d:
            os << "box3d(" << len_[0] << "," << len_[1] << "," << len_[2]
               << ")";
            break;
        case DomainKind::disk2d: os << "disk2d"; break;
    }
    return os.str();
}

DecayProfile DecayProfile::constant() { return DecayProfile{}; }

DecayProfile DecayProfile::polynomial(double C, double beta) {
    require(C >= 0.0 && beta >= 0.0,
            "polynomial profile needs C >= 0 and beta >= 0");
    DecayProfile p;
    p.kind_ = Kind::polynomial;
    p.C_ = C;
    p.beta_ = beta;
    return p;
}

DecayProfile DecayProfile::exponential(double rate) {
    require(rate >= 0.0, "exponential profile needs rate >= 0");
    DecayProfile p;
    p.kind_ = Kind::exponential;
    p.rate_ = rate;
    return p;
}

DecayProfile DecayProfile::table(
    std::vector<std::pair<double, double>> samples) {
    require(!samples.empty(), "profile table is empty");
    require(samples.front().first == 0.0, "profile table must start at t = 0");
    require(std::abs(samples.front().second - 1.0) <= 1e-12,
            "profile table must start at f = 1");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        require(samples[i].second > 0.0, "profile values must stay positive");
        if (i > 0) {
            require(samples[i].first > samples[i - 1].first,
                    "profile times must be strictly increasing");
            require(samples[i].second <= samples[i - 1].second + 1e-15,
                    "profile values must be nonincreasing");
        }
    }
    DecayProfile p;
    p.kind_ = Kind::table;
    p.samples_ = std::move(samples);
    return p;
}

double DecayProfile::operator()(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("profile evaluated at t < 0");
    switch (kind_) {
        case Kind::constant: return 1.0;
        case Kind::polynomial: return std::pow(1.0 + C_ * t, -beta_);
        case Kind::exponential: return std::exp(-rate_ * t);
        case Kind::table: {
            if (t >= samples_.back().first) return samples_.back().second;
            auto it = std::upper_bound(
                samples_.begin(), samples_.end(), t,
                [](double v, const auto& s) { return v < s.first; });
            auto hi = *it;
            auto lo = *(it - 1);
            double w = (t - lo.first) / (hi.first - lo.first);
            return lo.second + w * (hi.second - lo.second);
        }
    }
    return 1.0;
}

std::string DecayProfile::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::constant: os << "constant"; break;
        case Kind::polynomial:
            os << "polynomial(C=" << C_ << ",beta=" << beta_ << ")";
            break;
        case Kind::exponential: os << "exponential(rate=" << rate_ << ")";
            break;
        case Kind::table: os << "table[" << samples_.size() << "]"; break;
    }
    return os.str();
}

double BoundarySchedule::area_at(double t) const {
    return area0_ * profile_(t);
}

BoundaryArc BoundarySchedule::arc_at(double t) const {
    require(domain_.dimension() == 2, "arc_at is for 2D domains");
    double m = area_at(t);
    double per = domain_.boundary_measure();
    BoundaryArc arc;
    if (anchor_ == Anchor::center) {
        arc.start = center_ - 0.5 * m;
        arc.end = center_ + 0.5 * m;
    } else {
        arc.start = left_;
        arc.end = left_ + m;
    }
    // Guard the closed-curve invariant against roundoff at full size.
    arc.start = std::max(arc.start, 0.0);
    arc.end = std::min(arc.end, per);
    return arc;
}

BoundaryPatch BoundarySchedule::patch_at(double t) const {
    require(domain_.dimension() == 3, "patch_at is for 3D domains");
    double side = std::sqrt(area_at(t));
    BoundaryPatch p;
    p.face_id = 0;
    if (anchor_ == Anchor::center) {
        p.u0 = patch_center_[0] - 0.5 * side;
        p.u1 = patch_center_[0] + 0.5 * side;
        p.v0 = patch_center_[1] - 0.5 * side;
        p.v1 = patch_center_[1] + 0.5 * side;
    } else {
        p.u0 = patch_corner_[0];
        p.u1 = patch_corner_[0] + side;
        p.v0 = patch_corner_[1];
        p.v1 = patch_corner_[1] + side;
    }
    return p;
}

std::string BoundarySchedule::describe() const {
    std::ostringstream os;
    os << domain_.describe() << " area0=" << area0_ << " profile="
       << profile_.describe()
       << (anchor_ == Anchor::center ? " anchor=center" : " anchor=left_end");
    return os.str();
}

BoundarySchedule make_schedule(const Domain& domain, double gamma1_area,
                               const DecayProfile& profile, Anchor anchor) {
    double total = domain.boundary_measure();
    require(gamma1_area > 0.0 && gamma1_area < total,
            "gamma1_area must lie strictly between 0 and the boundary "
            "measure");
    BoundarySchedule s;
    s.domain_ = domain;
    s.area0_ = gamma1_area;
    s.profile_ = profile;
    s.anchor_ = anchor;
    if (domain.dimension() == 2) {
        double natural = domain.kind() == DomainKind::disk2d
                             ? 0.5 * std::numbers::pi
                             : 0.5 * domain.extent(0);
        bool fits = gamma1_area <= 2.0 * natural &&
                    gamma1_area <= 2.0 * (total - natural);
        s.center_ = fits ? natural : 0.5 * total;
        s.left_ = s.center_ - 0.5 * gamma1_area;
    } else {
        double side = std::sqrt(gamma1_area);
        require(side < std::min(domain.extent(0), domain.extent(1)),
                "initial square patch does not fit strictly inside the "
                "z = 0 face; reduce gamma1_area");
        s.patch_center_ = {0.5 * domain.extent(0), 0.5 * domain.extent(1)};
        s.patch_corner_ = {s.patch_center_[0] - 0.5 * side,
                           s.patch_center_[1] - 0.5 * side};
    }
    return s;
}

double interval_coverage(double lo, double hi, double a, double b) {
    if (!(hi > lo)) return 0.0;
    double overlap = std::min(hi, b) - std::max(lo, a);
    return std::max(overlap, 0.0) / (hi - lo);
}

}  // namespace nhkl::geo
