#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "parmp/rng.hpp"

namespace parmp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Tolerances. Unit-norm and lexicographic ties live at the double noise
// floor; on-boundary tests are three orders looser because boundary points
// are usually produced by arithmetic (projections, ray casts).
inline constexpr double kUnitNormTol = 1e-12;
inline constexpr double kMembershipTol = 1e-12;
inline constexpr double kBoundaryTol = 1e-9;
inline constexpr double kLexTol = 1e-12;

class GeometryError : public std::domain_error {
public:
    GeometryError(std::string message, std::string constraint)
        : std::domain_error(std::move(message)), constraint_(std::move(constraint)) {}

    // Human-readable description of the violated constraint.
    const std::string& constraint() const { return constraint_; }

private:
    std::string constraint_;
};

// ell(z) = grad . (z - touch) with |grad| = 1; nonnegative on the body,
// zero at the touch point.
struct SupportingFunctional {
    Vec touch;
    Vec grad;

    double operator()(const Vec& z) const { return grad.dot(z - touch); }
};

inline double functional_value(const SupportingFunctional& ell, const Vec& z) {
    return ell(z);
}

// Halfspace {z : normal . z >= offset} with |normal| = 1 (inward-normal form).
struct Halfspace {
    Vec normal;
    double offset = 0.0;
};

namespace geom_detail {

inline std::string point_str(const Vec& z) {
    std::ostringstream os;
    os << "(";
    for (int i = 0; i < z.size(); ++i) {
        if (i) os << ", ";
        os << z[i];
    }
    os << ")";
    return os.str();
}

// a <_lex b with per-component equality slack.
inline bool lex_less(const Vec& a, const Vec& b, double tol = kLexTol) {
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] < b[i] - tol) return true;
        if (a[i] > b[i] + tol) return false;
    }
    return false;
}

struct LinearCon {
    Vec normal;
    double offset;
};
struct BallCon {
    Vec center;
    double radius;
};

// Cyclic projection onto the margin-shrunk constraint set. Returns a point
// with slack >= margin on every constraint, or nullopt if the sweep cap is
// reached (treated as infeasible at this margin).
inline std::optional<Vec> find_point_with_margin(const std::vector<LinearCon>& lin,
                                                 const std::vector<BallCon>& balls,
                                                 int dim, double margin,
                                                 int max_sweeps = 20000) {
    for (const auto& b : balls) {
        if (b.radius - margin <= 0.0) return std::nullopt;
    }
    Vec z = Vec::Zero(dim);
    if (!balls.empty()) {
        z.setZero();
        for (const auto& b : balls) z += b.center;
        z /= static_cast<double>(balls.size());
    }
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool ok = true;
        for (const auto& c : lin) {
            const double s = c.normal.dot(z) - c.offset - margin;
            if (s < 0.0) {
                z -= s * c.normal;
                ok = false;
            }
        }
        for (const auto& b : balls) {
            const double r = b.radius - margin;
            const double d = (z - b.center).norm();
            if (d > r) {
                if (d < 1e-300) return std::nullopt;
                z = b.center + (r / d) * (z - b.center);
                ok = false;
            }
        }
        if (ok) return z;
    }
    return std::nullopt;
}

}  // namespace geom_detail

// Closed convex subset of R^k: an H-polytope, a closed ball, or a finite
// intersection of such bodies. Validated at construction to be nonempty
// with nonempty interior.
class ConvexBody {
public:
    enum class Kind { HPolytope, Ball, Intersection };

    static ConvexBody polytope(std::vector<Halfspace> facets) {
        if (facets.empty()) throw std::invalid_argument("polytope: no facets");
        const int dim = static_cast<int>(facets.front().normal.size());
        for (const auto& f : facets) {
            if (static_cast<int>(f.normal.size()) != dim) {
                throw std::invalid_argument("polytope: inconsistent facet dimensions");
            }
            if (std::fabs(f.normal.norm() - 1.0) > kUnitNormTol) {
                throw std::invalid_argument("polytope: facet normal is not unit length");
            }
        }
        ConvexBody body;
        body.kind_ = Kind::HPolytope;
        body.dim_ = dim;
        body.facets_ = std::move(facets);
        body.validate_interior();
        return body;
    }

    // {z : lo <= z <= hi} as an H-polytope, facets ordered
    // (+e1, -e1, +e2, -e2, ...).
    static ConvexBody box(const Vec& lo, const Vec& hi) {
        if (lo.size() != hi.size()) throw std::invalid_argument("box: lo/hi size mismatch");
        const int dim = static_cast<int>(lo.size());
        std::vector<Halfspace> facets;
        facets.reserve(2 * dim);
        for (int j = 0; j < dim; ++j) {
            if (!(hi[j] > lo[j])) throw std::invalid_argument("box: hi must exceed lo");
            Vec plus = Vec::Zero(dim);
            plus[j] = 1.0;
            facets.push_back({plus, lo[j]});
            Vec minus = Vec::Zero(dim);
            minus[j] = -1.0;
            facets.push_back({minus, -hi[j]});
        }
        return polytope(std::move(facets));
    }

    static ConvexBody ball(Vec center, double radius) {
        if (!(radius > 0.0)) throw std::invalid_argument("ball: radius must be positive");
        ConvexBody body;
        body.kind_ = Kind::Ball;
        body.dim_ = static_cast<int>(center.size());
        body.center_ = std::move(center);
        body.radius_ = radius;
        body.interior_ = body.center_;
        return body;
    }

    static ConvexBody intersection(std::vector<ConvexBody> members) {
        if (members.empty()) throw std::invalid_argument("intersection: no members");
        const int dim = members.front().dim();
        for (const auto& m : members) {
            if (m.dim() != dim) {
                throw std::invalid_argument("intersection: member dimension mismatch");
            }
        }
        ConvexBody body;
        body.kind_ = Kind::Intersection;
        body.dim_ = dim;
        body.members_ = std::move(members);
        body.validate_interior();
        return body;
    }

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    const std::vector<Halfspace>& facets() const { return facets_; }
    const Vec& center() const { return center_; }
    double radius() const { return radius_; }
    const std::vector<ConvexBody>& members() const { return members_; }
    const Vec& interior_point() const { return interior_; }

    // min facet slack / (R - |z-c|) / min over members. Coincides with the
    // distance to the boundary for z inside; negative outside, where it
    // quantifies the violation (HPolytope: worst facet deficit).
    double signed_boundary_value(const Vec& z) const {
        switch (kind_) {
            case Kind::HPolytope: {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& f : facets_) {
                    best = std::min(best, f.normal.dot(z) - f.offset);
                }
                return best;
            }
            case Kind::Ball:
                return radius_ - (z - center_).norm();
            case Kind::Intersection: {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& m : members_) {
                    best = std::min(best, m.signed_boundary_value(z));
                }
                return best;
            }
        }
        return 0.0;
    }

    bool contains(const Vec& z, double tol = kMembershipTol) const {
        return signed_boundary_value(z) >= -tol;
    }

    // Description of the most-violated constraint at z, for error reporting.
    std::string violated_constraint(const Vec& z) const {
        switch (kind_) {
            case Kind::HPolytope: {
                int worst = 0;
                double val = std::numeric_limits<double>::infinity();
                for (int i = 0; i < static_cast<int>(facets_.size()); ++i) {
                    const double s = facets_[i].normal.dot(z) - facets_[i].offset;
                    if (s < val) {
                        val = s;
                        worst = i;
                    }
                }
                std::ostringstream os;
                os << "halfspace " << worst << ": n.z - b = " << val << " with n = "
                   << geom_detail::point_str(facets_[worst].normal)
                   << ", b = " << facets_[worst].offset;
                return os.str();
            }
            case Kind::Ball: {
                std::ostringstream os;
                os << "ball: |z - c| = " << (z - center_).norm() << " > R = " << radius_;
                return os.str();
            }
            case Kind::Intersection: {
                double val = std::numeric_limits<double>::infinity();
                const ConvexBody* worst = &members_.front();
                for (const auto& m : members_) {
                    const double s = m.signed_boundary_value(z);
                    if (s < val) {
                        val = s;
                        worst = &m;
                    }
                }
                return "intersection member: " + worst->violated_constraint(z);
            }
        }
        return "";
    }

    // Upper estimate of diam(K); +inf when a recession direction is detected
    // or vertex enumeration is not practical.
    double diameter_estimate() const;

private:
    friend struct BodyOps;

    void validate_interior() {
        std::vector<geom_detail::LinearCon> lin;
        std::vector<geom_detail::BallCon> balls;
        collect_constraints(lin, balls);
        for (const double margin : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8}) {
            auto p = geom_detail::find_point_with_margin(lin, balls, dim_, margin);
            if (p) {
                interior_ = *p;
                return;
            }
        }
        throw std::invalid_argument(
            "convex body is empty or has empty interior (no point clears all "
            "constraints by more than 1e-9)");
    }

    void collect_constraints(std::vector<geom_detail::LinearCon>& lin,
                             std::vector<geom_detail::BallCon>& balls) const {
        switch (kind_) {
            case Kind::HPolytope:
                for (const auto& f : facets_) lin.push_back({f.normal, f.offset});
                break;
            case Kind::Ball:
                balls.push_back({center_, radius_});
                break;
            case Kind::Intersection:
                for (const auto& m : members_) m.collect_constraints(lin, balls);
                break;
        }
    }

    Kind kind_ = Kind::Ball;
    int dim_ = 0;
    std::vector<Halfspace> facets_;
    Vec center_;
    double radius_ = 0.0;
    std::vector<ConvexBody> members_;
    Vec interior_;
};

namespace geom_detail {

// Vertices of an H-polytope by enumerating dim-subsets of facet hyperplanes.
// Bails out (empty result) past the combination cap.
inline std::vector<Vec> polytope_vertices(const std::vector<Halfspace>& facets, int dim,
                                          long cap = 200000) {
    const int m = static_cast<int>(facets.size());
    if (m < dim) return {};
    long combos = 1;
    for (int i = 0; i < dim; ++i) {
        combos = combos * (m - i) / (i + 1);
        if (combos > cap) return {};
    }
    std::vector<Vec> vertices;
    std::vector<int> pick(dim);
    for (int i = 0; i < dim; ++i) pick[i] = i;
    Mat A(dim, dim);
    Vec b(dim);
    for (;;) {
        for (int r = 0; r < dim; ++r) {
            A.row(r) = facets[pick[r]].normal.transpose();
            b[r] = facets[pick[r]].offset;
        }
        Eigen::FullPivLU<Mat> lu(A);
        if (lu.isInvertible()) {
            Vec v = lu.solve(b);
            bool member = true;
            for (const auto& f : facets) {
                if (f.normal.dot(v) - f.offset < -kBoundaryTol) {
                    member = false;
                    break;
                }
            }
            if (member) {
                bool dup = false;
                for (const auto& w : vertices) {
                    if ((w - v).lpNorm<Eigen::Infinity>() <= 1e-9) {
                        dup = true;
                        break;
                    }
                }
                if (!dup) vertices.push_back(std::move(v));
            }
        }
        // next combination
        int i = dim - 1;
        while (i >= 0 && pick[i] == m - dim + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < dim; ++j) pick[j] = pick[j - 1] + 1;
    }
    return vertices;
}

inline bool polytope_has_recession_direction(const std::vector<Halfspace>& facets,
                                             int dim) {
    auto admissible = [&](const Vec& u) {
        for (const auto& f : facets) {
            if (f.normal.dot(u) < -kLexTol) return false;
        }
        return true;
    };
    for (int j = 0; j < dim; ++j) {
        Vec u = Vec::Zero(dim);
        u[j] = 1.0;
        if (admissible(u)) return true;
        u[j] = -1.0;
        if (admissible(u)) return true;
    }
    SplitMix64 rng(0x5EEDB0D7ULL);
    for (int trial = 0; trial < 256; ++trial) {
        Vec u(dim);
        for (int j = 0; j < dim; ++j) u[j] = rng.next_gaussian();
        const double nrm = u.norm();
        if (nrm < 1e-12) continue;
        u /= nrm;
        if (admissible(u)) return true;
    }
    return false;
}

}  // namespace geom_detail

inline double ConvexBody::diameter_estimate() const {
    switch (kind_) {
        case Kind::Ball:
            return 2.0 * radius_;
        case Kind::HPolytope: {
            if (geom_detail::polytope_has_recession_direction(facets_, dim_)) {
                return std::numeric_limits<double>::infinity();
            }
            const auto verts = geom_detail::polytope_vertices(facets_, dim_);
            if (verts.empty()) return std::numeric_limits<double>::infinity();
            double best = 0.0;
            for (std::size_t i = 0; i < verts.size(); ++i) {
                for (std::size_t j = i + 1; j < verts.size(); ++j) {
                    best = std::max(best, (verts[i] - verts[j]).norm());
                }
            }
            return best;
        }
        case Kind::Intersection: {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& m : members_) {
                best = std::min(best, m.diameter_estimate());
            }
            return best;
        }
    }
    return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Distance operations

namespace geom_detail {

inline void require_member(const ConvexBody& K, const Vec& z) {
    if (static_cast<int>(z.size()) != K.dim()) {
        throw GeometryError("point dimension does not match body", "dimension");
    }
    if (!K.contains(z, kMembershipTol)) {
        throw GeometryError("point lies outside the body: " + K.violated_constraint(z),
                            K.violated_constraint(z));
    }
}

// A candidate nearest boundary point together with the inward normal that is
// valid if the candidate turns out to be a contact point (dist ~ 0).
struct NearestCandidate {
    Vec v;
    Vec contact_normal;
};

inline void nearest_candidates(const ConvexBody& K, const Vec& z,
                               std::vector<NearestCandidate>& out);

inline void nearest_candidates_polytope(const ConvexBody& K, const Vec& z,
                                        std::vector<NearestCandidate>& out) {
    const auto& facets = K.facets();
    double smin = std::numeric_limits<double>::infinity();
    for (const auto& f : facets) smin = std::min(smin, f.normal.dot(z) - f.offset);
    for (const auto& f : facets) {
        const double s = f.normal.dot(z) - f.offset;
        if (s <= smin + kLexTol) {
            out.push_back({z - s * f.normal, f.normal});
        }
    }
}

inline void nearest_candidates_ball(const ConvexBody& K, const Vec& z,
                                    std::vector<NearestCandidate>& out) {
    const Vec u = z - K.center();
    const double r = u.norm();
    if (r <= kLexTol) {
        // Center: the whole sphere achieves; the lexicographic minimum is
        // c - R e1.
        Vec v = K.center();
        v[0] -= K.radius();
        Vec nu = Vec::Zero(K.dim());
        nu[0] = 1.0;
        out.push_back({std::move(v), std::move(nu)});
        return;
    }
    const Vec dir = u / r;
    out.push_back({K.center() + K.radius() * dir, -dir});
}

inline void nearest_candidates(const ConvexBody& K, const Vec& z,
                               std::vector<NearestCandidate>& out) {
    switch (K.kind()) {
        case ConvexBody::Kind::HPolytope:
            nearest_candidates_polytope(K, z, out);
            return;
        case ConvexBody::Kind::Ball:
            nearest_candidates_ball(K, z, out);
            return;
        case ConvexBody::Kind::Intersection: {
            const double d = K.signed_boundary_value(z);
            std::vector<NearestCandidate> raw;
            for (const auto& m : K.members()) {
                if (m.signed_boundary_value(z) <= d + kLexTol) {
                    nearest_candidates(m, z, raw);
                }
            }
            for (auto& c : raw) {
                // Keep only member-boundary points that lie on the boundary
                // of the whole intersection.
                if (K.contains(c.v, kBoundaryTol)) out.push_back(std::move(c));
            }
            if (out.empty()) {
                // Degenerate case (e.g. the achieving member is a ball
                // centered at z whose lex-min sphere point is cut away by
                // another member): fall back to deterministic ray casting.
                SplitMix64 rng(0x9D5FC0DEULL);
                double best = std::numeric_limits<double>::infinity();
                std::vector<Vec> hits;
                auto consider = [&](const Vec& dir) {
                    // exit point of the ray z + s dir
                    double s = std::numeric_limits<double>::infinity();
                    std::function<void(const ConvexBody&)> walk = [&](const ConvexBody& B) {
                        switch (B.kind()) {
                            case ConvexBody::Kind::HPolytope:
                                for (const auto& f : B.facets()) {
                                    const double dn = f.normal.dot(dir);
                                    if (dn < -1e-14) {
                                        s = std::min(s, (f.normal.dot(z) - f.offset) / (-dn));
                                    }
                                }
                                break;
                            case ConvexBody::Kind::Ball: {
                                const Vec p = z - B.center();
                                const double pd = p.dot(dir);
                                const double disc =
                                    pd * pd - p.squaredNorm() + B.radius() * B.radius();
                                if (disc >= 0.0) {
                                    s = std::min(s, -pd + std::sqrt(disc));
                                }
                                break;
                            }
                            case ConvexBody::Kind::Intersection:
                                for (const auto& m : B.members()) walk(m);
                                break;
                        }
                    };
                    walk(K);
                    if (!std::isfinite(s) || s < 0.0) return;
                    const Vec w = z + s * dir;
                    if (s < best - kLexTol) {
                        best = s;
                        hits.assign(1, w);
                    } else if (s <= best + kLexTol) {
                        hits.push_back(w);
                    }
                };
                for (int j = 0; j < K.dim(); ++j) {
                    Vec e = Vec::Zero(K.dim());
                    e[j] = 1.0;
                    consider(e);
                    e[j] = -1.0;
                    consider(e);
                }
                for (int trial = 0; trial < 4096; ++trial) {
                    Vec dir(K.dim());
                    for (int j = 0; j < K.dim(); ++j) dir[j] = rng.next_gaussian();
                    const double nrm = dir.norm();
                    if (nrm < 1e-12) continue;
                    consider(dir / nrm);
                }
                for (const auto& w : hits) {
                    const Vec diff = z - w;
                    const double dist = diff.norm();
                    Vec nu = dist > kLexTol ? Vec(diff / dist) : Vec::Zero(K.dim());
                    out.push_back({w, std::move(nu)});
                }
            }
            return;
        }
    }
}

// Inward normal generators at an (assumed) boundary point v: active facet
// normals, the radial normal for balls, merged member generators for
// intersections (the normal cone of an intersection corner is spanned by
// the union of its members' generators).
inline void normal_generators(const ConvexBody& K, const Vec& v, std::vector<Vec>& out) {
    switch (K.kind()) {
        case ConvexBody::Kind::HPolytope:
            for (const auto& f : K.facets()) {
                if (std::fabs(f.normal.dot(v) - f.offset) <= kBoundaryTol) {
                    out.push_back(f.normal);
                }
            }
            return;
        case ConvexBody::Kind::Ball: {
            const Vec u = K.center() - v;
            const double r = u.norm();
            if (std::fabs(r - K.radius()) <= kBoundaryTol && r > kLexTol) {
                out.push_back(u / r);
            }
            return;
        }
        case ConvexBody::Kind::Intersection:
            for (const auto& m : K.members()) {
                if (std::fabs(m.signed_boundary_value(v)) <= kBoundaryTol) {
                    normal_generators(m, v, out);
                }
            }
            return;
    }
}

}  // namespace geom_detail

// Distance from z in K to the boundary of K.
inline double distance_to_boundary(const ConvexBody& K, const Vec& z) {
    geom_detail::require_member(K, z);
    return std::max(K.signed_boundary_value(z), 0.0);
}

// inf over the body's representable supporting functionals of ell(z).
// By the convexity lemma this must equal distance_to_boundary; the two
// routes stay implemented separately so the equality stays a real test.
inline double infimum_over_functionals(const ConvexBody& K, const Vec& z) {
    geom_detail::require_member(K, z);
    switch (K.kind()) {
        case ConvexBody::Kind::HPolytope: {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& f : K.facets()) {
                const double s = f.normal.dot(z) - f.offset;
                SupportingFunctional ell{z - s * f.normal, f.normal};
                best = std::min(best, functional_value(ell, z));
            }
            return best;
        }
        case ConvexBody::Kind::Ball: {
            const Vec u = z - K.center();
            const double r = u.norm();
            Vec dir;
            if (r <= kLexTol) {
                dir = Vec::Zero(K.dim());
                dir[0] = -1.0;
            } else {
                dir = u / r;
            }
            SupportingFunctional ell{K.center() + K.radius() * dir, -dir};
            return functional_value(ell, z);
        }
        case ConvexBody::Kind::Intersection: {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& m : K.members()) {
                best = std::min(best, infimum_over_functionals(m, z));
            }
            return best;
        }
    }
    return 0.0;
}

// Nearest boundary point plus its supporting functional, selected without
// choice: among all achieving boundary points the lexicographically minimal
// one (ties at 1e-12), with the unique functional ell in L_v when the
// distance is positive.
struct NiceChoice {
    Vec v;
    SupportingFunctional ell;
    double dist = 0.0;
    // Number of nearest-point candidates considered equal-best (a ball
    // centered at z reports 1: the lexicographic representative).
    int multiplicity = 1;
};

inline NiceChoice nearest_boundary_point(const ConvexBody& K, const Vec& z) {
    geom_detail::require_member(K, z);
    std::vector<geom_detail::NearestCandidate> candidates;
    geom_detail::nearest_candidates(K, z, candidates);
    if (candidates.empty()) {
        throw GeometryError("no nearest boundary candidate found", "internal");
    }
    const geom_detail::NearestCandidate* best = &candidates.front();
    for (const auto& c : candidates) {
        if (geom_detail::lex_less(c.v, best->v)) best = &c;
    }
    NiceChoice choice;
    choice.v = best->v;
    choice.dist = (z - best->v).norm();
    choice.multiplicity = static_cast<int>(candidates.size());
    if (choice.dist > kMembershipTol) {
        choice.ell = SupportingFunctional{choice.v, (z - choice.v) / choice.dist};
    } else {
        // Contact: z itself is (numerically) the boundary point. The normal
        // is the lexicographically minimal contact normal among candidates
        // at this v.
        const Vec* nu = nullptr;
        for (const auto& c : candidates) {
            if ((c.v - choice.v).lpNorm<Eigen::Infinity>() > kLexTol) continue;
            if (c.contact_normal.size() == 0 || c.contact_normal.norm() < 0.5) continue;
            if (nu == nullptr || geom_detail::lex_less(c.contact_normal, *nu)) {
                nu = &c.contact_normal;
            }
        }
        if (nu == nullptr) {
            throw GeometryError("no contact normal at boundary point", "internal");
        }
        choice.ell = SupportingFunctional{choice.v, *nu};
    }
    return choice;
}

// Up to `count` distinct unit inward vectors at boundary point v: normal-cone
// generators first, then normalized pairwise midpoints, then seeded random
// convex combinations. Smooth points yield exactly one vector.
inline std::vector<Vec> inward_vector_samples(const ConvexBody& K, const Vec& v,
                                              int count) {
    if (count <= 0) return {};
    if (static_cast<int>(v.size()) != K.dim()) {
        throw GeometryError("point dimension does not match body", "dimension");
    }
    if (std::fabs(K.signed_boundary_value(v)) > kBoundaryTol) {
        throw GeometryError("point is not on the boundary: " +
                                geom_detail::point_str(v),
                            "boundary membership");
    }
    std::vector<Vec> generators;
    geom_detail::normal_generators(K, v, generators);
    if (generators.empty()) {
        throw GeometryError("no supporting normal found at boundary point",
                            "boundary membership");
    }
    std::vector<Vec> out;
    auto push_unique = [&](const Vec& nu) {
        for (const auto& w : out) {
            if ((w - nu).lpNorm<Eigen::Infinity>() <= 1e-12) return;
        }
        out.push_back(nu);
    };
    for (const auto& g : generators) {
        if (static_cast<int>(out.size()) >= count) return out;
        push_unique(g);
    }
    for (std::size_t i = 0; i < generators.size() && static_cast<int>(out.size()) < count; ++i) {
        for (std::size_t j = i + 1;
             j < generators.size() && static_cast<int>(out.size()) < count; ++j) {
            Vec s = generators[i] + generators[j];
            const double nrm = s.norm();
            if (nrm < kBoundaryTol) continue;
            push_unique(s / nrm);
        }
    }
    SplitMix64 rng(0xC0FFEEULL);
    for (int trial = 0; trial < 16 * count && static_cast<int>(out.size()) < count;
         ++trial) {
        Vec s = Vec::Zero(K.dim());
        for (const auto& g : generators) s += rng.next_double() * g;
        const double nrm = s.norm();
        if (nrm < kBoundaryTol) continue;
        push_unique(s / nrm);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Boundary utilities shared by the compatibility sampler

// Distance along dir from an interior origin to the boundary; nullopt when
// the ray never exits (unbounded body).
inline std::optional<double> ray_exit(const ConvexBody& K, const Vec& origin,
                                      const Vec& dir) {
    double s = std::numeric_limits<double>::infinity();
    switch (K.kind()) {
        case ConvexBody::Kind::HPolytope:
            for (const auto& f : K.facets()) {
                const double dn = f.normal.dot(dir);
                if (dn < -1e-14) {
                    s = std::min(s, (f.normal.dot(origin) - f.offset) / (-dn));
                }
            }
            break;
        case ConvexBody::Kind::Ball: {
            const Vec p = origin - K.center();
            const double pd = p.dot(dir);
            const double disc = pd * pd - p.squaredNorm() + K.radius() * K.radius();
            if (disc >= 0.0) s = std::min(s, -pd + std::sqrt(disc));
            break;
        }
        case ConvexBody::Kind::Intersection:
            for (const auto& m : K.members()) {
                if (auto sm = ray_exit(m, origin, dir)) s = std::min(s, *sm);
            }
            break;
    }
    if (!std::isfinite(s) || s < 0.0) return std::nullopt;
    return s;
}

// Boundary points stratified by face dimension where that structure exists:
// polytope vertices, edge midpoints and facet points, sphere samples for
// balls, plus seeded ray casts for coverage. Intersections reuse member
// samples that land on the intersection's own boundary.
inline std::vector<Vec> boundary_samples(const ConvexBody& K, int target,
                                         std::uint64_t seed) {
    std::vector<Vec> out;
    auto push = [&](const Vec& v) {
        if (std::fabs(K.signed_boundary_value(v)) <= kBoundaryTol) out.push_back(v);
    };
    SplitMix64 rng(mix_seed(seed, 0xB0D7));
    switch (K.kind()) {
        case ConvexBody::Kind::HPolytope: {
            const auto verts = geom_detail::polytope_vertices(K.facets(), K.dim());
            for (const auto& v : verts) push(v);
            // Edge midpoints: vertex pairs sharing >= dim-1 active facets.
            const int dim = K.dim();
            for (std::size_t i = 0; i < verts.size(); ++i) {
                for (std::size_t j = i + 1; j < verts.size(); ++j) {
                    int shared = 0;
                    for (const auto& f : K.facets()) {
                        if (std::fabs(f.normal.dot(verts[i]) - f.offset) <= kBoundaryTol &&
                            std::fabs(f.normal.dot(verts[j]) - f.offset) <= kBoundaryTol) {
                            ++shared;
                        }
                    }
                    if (shared >= dim - 1) push(0.5 * (verts[i] + verts[j]));
                }
            }
            break;
        }
        case ConvexBody::Kind::Ball: {
            for (int j = 0; j < K.dim(); ++j) {
                Vec v = K.center();
                v[j] += K.radius();
                push(v);
                v[j] -= 2.0 * K.radius();
                push(v);
            }
            break;
        }
        case ConvexBody::Kind::Intersection: {
            const int per_member =
                std::max(4, target / static_cast<int>(K.members().size()));
            int midx = 0;
            for (const auto& m : K.members()) {
                for (const auto& v :
                     boundary_samples(m, per_member, mix_seed(seed, 77, midx))) {
                    push(v);
                }
                ++midx;
            }
            break;
        }
    }
    // Ray-cast fill from the stored interior point.
    const Vec& origin = K.interior_point();
    int guard = 0;
    while (static_cast<int>(out.size()) < target && guard < 64 * target + 256) {
        ++guard;
        Vec dir(K.dim());
        for (int j = 0; j < K.dim(); ++j) dir[j] = rng.next_gaussian();
        const double nrm = dir.norm();
        if (nrm < 1e-12) continue;
        dir /= nrm;
        if (auto s = ray_exit(K, origin, dir)) push(origin + *s * dir);
    }
    return out;
}

}  // namespace parmp
