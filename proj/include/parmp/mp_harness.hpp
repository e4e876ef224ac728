#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "parmp/geometry.hpp"
#include "parmp/grid.hpp"
#include "parmp/parallel.hpp"
#include "parmp/solver.hpp"
#include "parmp/system.hpp"

namespace parmp {

struct NodeLoc {
    int snapshot = -1;
    int node = -1;
    double t = 0.0;
    std::array<double, 2> x{0.0, 0.0};
};

// Per-node contact data: signed distance to the boundary of K plus the
// selected nearest boundary point and inward normal. Outside K the signed
// value is negative (worst facet deficit / R - |z-c|) and (v, nu) come from
// the most-violated constraint, so violations stay measurable.
struct ContactData {
    double signed_d = 0.0;
    bool inside = false;
    bool has_point = false;
    Vec v;
    Vec nu;
    double dist = 0.0;   // |z - v| >= 0
    int multiplicity = 0;
};

struct DistanceField {
    int snapshots = 0;
    int nodes = 0;
    std::vector<std::vector<ContactData>> contact;  // [snapshot][node]
    std::vector<std::vector<double>> dbar;          // signed d per node

    const ContactData& at(int s, int node) const { return contact[s][node]; }
    double value(int s, int node) const { return dbar[s][node]; }
};

namespace harness_detail {

// Contact data for arbitrary z, extending the nearest-point selection to
// points outside K.
inline ContactData signed_contact(const ConvexBody& K, const Vec& z) {
    ContactData out;
    out.signed_d = K.signed_boundary_value(z);
    out.inside = out.signed_d >= -kMembershipTol;
    if (out.inside) {
        const NiceChoice choice = nearest_boundary_point(K, z);
        out.has_point = true;
        out.v = choice.v;
        out.nu = choice.ell.grad;
        out.dist = choice.dist;
        out.multiplicity = choice.multiplicity;
        return out;
    }
    switch (K.kind()) {
        case ConvexBody::Kind::HPolytope: {
            const Halfspace* worst = nullptr;
            double smin = std::numeric_limits<double>::infinity();
            for (const auto& f : K.facets()) {
                const double s = f.normal.dot(z) - f.offset;
                if (s < smin) {
                    smin = s;
                    worst = &f;
                }
            }
            out.has_point = true;
            out.v = z - smin * worst->normal;
            out.nu = worst->normal;
            out.dist = -smin;
            out.multiplicity = 1;
            return out;
        }
        case ConvexBody::Kind::Ball: {
            const Vec u = z - K.center();
            const double r = u.norm();
            if (r <= kLexTol) return out;  // cannot happen for z outside
            out.has_point = true;
            out.v = K.center() + K.radius() * (u / r);
            out.nu = -u / r;
            out.dist = (z - out.v).norm();
            out.multiplicity = 1;
            return out;
        }
        case ConvexBody::Kind::Intersection: {
            const ConvexBody* worst = nullptr;
            double smin = std::numeric_limits<double>::infinity();
            for (const auto& m : K.members()) {
                const double s = m.signed_boundary_value(z);
                if (s < smin) {
                    smin = s;
                    worst = &m;
                }
            }
            ContactData inner = signed_contact(*worst, z);
            inner.signed_d = out.signed_d;
            inner.inside = false;
            return inner;
        }
    }
    return out;
}

inline double pd_floor_small(const double* m, int n) {
    if (n == 1) return m[0];
    const double a = m[0];
    const double b = 0.5 * (m[1] + m[2]);
    const double d = m[3];
    return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + b * b);
}

}  // namespace harness_detail

// d-bar along the trajectory: per node and snapshot, the signed distance of
// u to the boundary of K plus the deterministically selected (v, ell).
inline DistanceField distance_field(const Trajectory& traj, const ConvexBody& K,
                                    int threads = 1) {
    if (K.dim() != traj.k) {
        throw std::invalid_argument("distance_field: K dimension must equal k");
    }
    DistanceField out;
    out.snapshots = traj.num_snapshots();
    out.nodes = traj.grid.num_nodes();
    out.contact.resize(out.snapshots);
    out.dbar.resize(out.snapshots);
    for (int s = 0; s < out.snapshots; ++s) {
        out.contact[s].resize(out.nodes);
        out.dbar[s].resize(out.nodes);
        const Field& field = traj.snaps[s];
        auto& contacts = out.contact[s];
        auto& dbars = out.dbar[s];
        parallel_for_chunks(out.nodes, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t node = begin; node < end; ++node) {
                const Vec z = field.values(static_cast<int>(node));
                contacts[node] = harness_detail::signed_contact(K, z);
                dbars[node] = contacts[node].signed_d;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Weak maximum principle

enum class CheckStatus { Pass, Fail, NotApplicable, Skipped };

inline const char* to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::NotApplicable: return "not_applicable";
        case CheckStatus::Skipped: return "skipped";
    }
    return "?";
}

struct WeakMPReport {
    CheckStatus status = CheckStatus::NotApplicable;
    double tol = 0.0;
    double worst_signed_distance = 0.0;
    NodeLoc worst;
    // Premise offender when status is NotApplicable.
    double premise_worst = 0.0;
    NodeLoc premise_loc;
    long nodes_checked = 0;
};

// Verifies u(node) in K (within tol) at every node and snapshot, gated on
// the premise that the initial snapshot and all boundary nodes lie in K.
inline WeakMPReport weak_mp_check(const Trajectory& traj, const ConvexBody& K,
                                  double tol, const DistanceField* dist = nullptr,
                                  int threads = 1) {
    WeakMPReport rep;
    rep.tol = tol;
    DistanceField local;
    if (dist == nullptr) {
        local = distance_field(traj, K, threads);
        dist = &local;
    }
    const Grid& grid = traj.grid;
    auto loc_of = [&](int s, int node) {
        NodeLoc loc;
        loc.snapshot = s;
        loc.node = node;
        loc.t = traj.time(s);
        grid.position(node, loc.x.data());
        return loc;
    };
    // Premise: data on the parabolic boundary lies in K.
    rep.premise_worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < dist->snapshots; ++s) {
        for (int node = 0; node < dist->nodes; ++node) {
            if (s != 0 && !grid.is_boundary(node)) continue;
            const double v = dist->value(s, node);
            if (v < rep.premise_worst) {
                rep.premise_worst = v;
                rep.premise_loc = loc_of(s, node);
            }
        }
    }
    if (rep.premise_worst < -tol) {
        rep.status = CheckStatus::NotApplicable;
        return rep;
    }
    rep.worst_signed_distance = std::numeric_limits<double>::infinity();
    for (int s = 0; s < dist->snapshots; ++s) {
        for (int node = 0; node < dist->nodes; ++node) {
            ++rep.nodes_checked;
            const double v = dist->value(s, node);
            if (v < rep.worst_signed_distance) {
                rep.worst_signed_distance = v;
                rep.worst = loc_of(s, node);
            }
        }
    }
    rep.status = rep.worst_signed_distance >= -tol ? CheckStatus::Pass : CheckStatus::Fail;
    return rep;
}

// ---------------------------------------------------------------------------
// Strong maximum principle

struct StrongMPReport {
    CheckStatus status = CheckStatus::Pass;
    double eps_touch = 0.0;
    double eps_flat = 0.0;
    bool touched = false;
    NodeLoc touch;          // earliest interior contact, if any
    double touch_value = 0.0;
    double worst_flat = 0.0;  // max d-bar over X x (0, t0] when touched
    NodeLoc worst_flat_loc;
    double margin = 0.0;      // min interior d-bar for t > 0 when never touching
    NodeLoc margin_loc;
};

// Finds the earliest interior contact (d-bar <= eps_touch at t > 0) and, if
// one exists, verifies d-bar <= eps_flat at all interior nodes for all
// earlier positive times. With no contact the conclusion is vacuous and the
// positive margin is reported.
inline StrongMPReport strong_mp_check(const Trajectory& traj, const ConvexBody& K,
                                      double eps_touch, double eps_flat,
                                      const DistanceField* dist = nullptr,
                                      int threads = 1) {
    StrongMPReport rep;
    rep.eps_touch = eps_touch;
    rep.eps_flat = eps_flat;
    DistanceField local;
    if (dist == nullptr) {
        local = distance_field(traj, K, threads);
        dist = &local;
    }
    const Grid& grid = traj.grid;
    auto loc_of = [&](int s, int node) {
        NodeLoc loc;
        loc.snapshot = s;
        loc.node = node;
        loc.t = traj.time(s);
        grid.position(node, loc.x.data());
        return loc;
    };
    // t = 0 is excluded: the domain is open in time.
    int touch_s = -1, touch_node = -1;
    for (int s = 1; s < dist->snapshots && touch_s < 0; ++s) {
        for (int node = 0; node < dist->nodes; ++node) {
            if (grid.is_boundary(node)) continue;
            if (dist->value(s, node) <= eps_touch) {
                touch_s = s;
                touch_node = node;
                break;
            }
        }
    }
    if (touch_s < 0) {
        rep.touched = false;
        rep.margin = std::numeric_limits<double>::infinity();
        for (int s = 1; s < dist->snapshots; ++s) {
            for (int node = 0; node < dist->nodes; ++node) {
                if (grid.is_boundary(node)) continue;
                const double v = dist->value(s, node);
                if (v < rep.margin) {
                    rep.margin = v;
                    rep.margin_loc = loc_of(s, node);
                }
            }
        }
        rep.status = CheckStatus::Pass;  // vacuous: the premise never fires
        return rep;
    }
    rep.touched = true;
    rep.touch = loc_of(touch_s, touch_node);
    rep.touch_value = dist->value(touch_s, touch_node);
    rep.worst_flat = -std::numeric_limits<double>::infinity();
    for (int s = 1; s <= touch_s; ++s) {
        for (int node = 0; node < dist->nodes; ++node) {
            if (grid.is_boundary(node)) continue;
            const double v = dist->value(s, node);
            if (v > rep.worst_flat) {
                rep.worst_flat = v;
                rep.worst_flat_loc = loc_of(s, node);
            }
        }
    }
    rep.status = rep.worst_flat <= eps_flat ? CheckStatus::Pass : CheckStatus::Fail;
    return rep;
}

// ---------------------------------------------------------------------------
// Theorem-1 coefficient fields

// gamma = c |sum_ij a_ij u_xixj| + sum_i m_i |u_xi| + p per interior node,
// with the solver's stencils and declared Lipschitz constants.
inline std::vector<std::vector<double>> gamma_field(const Trajectory& traj,
                                                    const SystemSpec& spec,
                                                    int threads = 1) {
    const Grid& grid = traj.grid;
    const int nodes = grid.num_nodes();
    const int n = spec.n;
    const int k = spec.k;
    std::vector<std::vector<double>> out(traj.num_snapshots(),
                                         std::vector<double>(nodes, 0.0));
    for (int s = 0; s < traj.num_snapshots(); ++s) {
        const Field& field = traj.snaps[s];
        const double t = traj.time(s);
        auto& gamma = out[s];
        parallel_for_chunks(nodes, threads, [&](std::size_t begin, std::size_t end) {
            Mat am(n, n);
            Vec sum(k), tmp(k);
            std::vector<Vec> d2(3, Vec(k));
            std::vector<Vec> d1(2, Vec(k));
            double x[2];
            for (std::size_t nidx = begin; nidx < end; ++nidx) {
                const int idx = static_cast<int>(nidx);
                if (grid.is_boundary(idx)) continue;
                int i1, i2;
                grid.node_coords(idx, i1, i2);
                grid.position(idx, x);
                EvalEnv env;
                env.x = x;
                env.n = n;
                env.t = t;
                env.z = field.node(idx);
                env.k = k;
                spec.eval_a(env, am);
                stencil::second_diff(field, grid, i1, i2, 0, d2[0].data());
                if (n == 2) {
                    stencil::second_diff(field, grid, i1, i2, 1, d2[1].data());
                    stencil::mixed_diff(field, grid, i1, i2, d2[2].data());
                }
                sum = am(0, 0) * d2[0];
                if (n == 2) {
                    sum += am(1, 1) * d2[1];
                    sum += (am(0, 1) + am(1, 0)) * d2[2];
                }
                double g = spec.lipschitz.c * sum.norm() + spec.lipschitz.p;
                for (int axis = 0; axis < n; ++axis) {
                    stencil::first_diff(field, grid, i1, i2, axis, d1[axis].data());
                    g += spec.lipschitz.m[axis] * d1[axis].norm();
                }
                gamma[idx] = g;
            }
        });
    }
    return out;
}

class CoefficientError : public std::runtime_error {
public:
    CoefficientError(std::string message, NodeLoc loc)
        : std::runtime_error(std::move(message)), loc_(loc) {}

    const NodeLoc& location() const { return loc_; }

private:
    NodeLoc loc_;
};

// mu-tilde, lambda-tilde_i, alpha = mu a, beta = lambda per interior node
// and snapshot, evaluated at the selected contact point v of each node.
struct CoefficientFields {
    int snapshots = 0;
    int nodes = 0;
    int n = 1;
    std::vector<std::vector<char>> valid;                    // [s][node]
    std::vector<std::vector<double>> mu;                     // mu-tilde
    std::vector<std::vector<std::array<double, 2>>> lambda;  // lambda-tilde_i
    std::vector<std::vector<std::array<double, 4>>> alpha;   // mu * a, row-major
    std::vector<std::vector<double>> gamma;                  // from gamma_field

    double min_mu = 0.0;
    double max_abs_lambda = 0.0;
    double min_alpha_floor = 0.0;
    // min over nodes of floor(alpha) - mu * floor(a); scalar scaling makes
    // this nonnegative up to rounding.
    double worst_alpha_floor_margin = 0.0;

    double beta(int s, int node, int axis) const { return lambda[s][node][axis]; }
};

inline CoefficientFields effective_coefficients(const Trajectory& traj,
                                                const SystemSpec& spec,
                                                const ConvexBody& K,
                                                const DistanceField& dist,
                                                std::vector<std::vector<double>> gamma,
                                                double eigen_tol, int threads = 1) {
    const Grid& grid = traj.grid;
    const int nodes = grid.num_nodes();
    const int n = spec.n;
    const int k = spec.k;
    CoefficientFields out;
    out.snapshots = traj.num_snapshots();
    out.nodes = nodes;
    out.n = n;
    out.valid.assign(out.snapshots, std::vector<char>(nodes, 0));
    out.mu.assign(out.snapshots, std::vector<double>(nodes, 0.0));
    out.lambda.assign(out.snapshots,
                      std::vector<std::array<double, 2>>(nodes, {0.0, 0.0}));
    out.alpha.assign(out.snapshots,
                     std::vector<std::array<double, 4>>(nodes, {0.0, 0.0, 0.0, 0.0}));
    out.gamma = std::move(gamma);
    out.min_mu = std::numeric_limits<double>::infinity();
    out.max_abs_lambda = 0.0;
    out.min_alpha_floor = std::numeric_limits<double>::infinity();
    out.worst_alpha_floor_margin = std::numeric_limits<double>::infinity();

    for (int s = 0; s < out.snapshots; ++s) {
        const double t = traj.time(s);
        auto& mu_s = out.mu[s];
        auto& lambda_s = out.lambda[s];
        auto& alpha_s = out.alpha[s];
        auto& valid_s = out.valid[s];
        parallel_for_chunks(nodes, threads, [&](std::size_t begin, std::size_t end) {
            Mat Dm(k, k), Mm(k, k), am(n, n);
            double x[2];
            for (std::size_t nidx = begin; nidx < end; ++nidx) {
                const int idx = static_cast<int>(nidx);
                if (grid.is_boundary(idx)) continue;
                const ContactData& contact = dist.at(s, idx);
                if (!contact.has_point) continue;
                grid.position(idx, x);
                EvalEnv env;
                env.x = x;
                env.n = n;
                env.t = t;
                env.z = contact.v.data();
                env.k = k;
                spec.eval_D(env, Dm);
                spec.eval_a(env, am);
                const auto mu_res = left_eigenvalue(contact.nu, Dm, eigen_tol);
                if (!mu_res.value.has_value()) {
                    NodeLoc loc;
                    loc.snapshot = s;
                    loc.node = idx;
                    loc.t = t;
                    grid.position(idx, loc.x.data());
                    throw CoefficientError(
                        "compatibility violated on the contact set: D eigenvector "
                        "residual " +
                            std::to_string(mu_res.residual) + " at node " +
                            std::to_string(idx) + ", t=" + std::to_string(t),
                        loc);
                }
                mu_s[idx] = *mu_res.value;
                for (int axis = 0; axis < n; ++axis) {
                    spec.eval_M(axis, env, Mm);
                    const auto lam = left_eigenvalue(contact.nu, Mm, eigen_tol);
                    if (!lam.value.has_value()) {
                        NodeLoc loc;
                        loc.snapshot = s;
                        loc.node = idx;
                        loc.t = t;
                        grid.position(idx, loc.x.data());
                        throw CoefficientError(
                            "compatibility violated on the contact set: M" +
                                std::to_string(axis + 1) + " eigenvector residual " +
                                std::to_string(lam.residual) + " at node " +
                                std::to_string(idx) + ", t=" + std::to_string(t),
                            loc);
                    }
                    lambda_s[idx][axis] = *lam.value;
                }
                for (int r = 0; r < n; ++r) {
                    for (int c = 0; c < n; ++c) {
                        alpha_s[idx][r * n + c] = mu_s[idx] * am(r, c);
                    }
                }
                valid_s[idx] = 1;
            }
        });
        // Sequential reduction in node order.
        Mat am(n, n);
        double x[2];
        for (int idx = 0; idx < nodes; ++idx) {
            if (!valid_s[idx]) continue;
            out.min_mu = std::min(out.min_mu, mu_s[idx]);
            for (int axis = 0; axis < n; ++axis) {
                out.max_abs_lambda =
                    std::max(out.max_abs_lambda, std::fabs(lambda_s[idx][axis]));
            }
            const double afloor = harness_detail::pd_floor_small(alpha_s[idx].data(), n);
            out.min_alpha_floor = std::min(out.min_alpha_floor, afloor);
            grid.position(idx, x);
            EvalEnv env;
            env.x = x;
            env.n = n;
            env.t = t;
            env.z = dist.at(s, idx).v.data();
            env.k = k;
            spec.eval_a(env, am);
            double a_small[4] = {am(0, 0), 0.0, 0.0, 0.0};
            if (n == 2) {
                a_small[1] = am(0, 1);
                a_small[2] = am(1, 0);
                a_small[3] = am(1, 1);
            }
            const double margin =
                afloor - mu_s[idx] * harness_detail::pd_floor_small(a_small, n);
            out.worst_alpha_floor_margin = std::min(out.worst_alpha_floor_margin, margin);
        }
    }
    return out;
}

// Largest discrete second-derivative magnitude along the trajectory; the
// scale entering the default residual tolerance.
inline double second_difference_scale(const Trajectory& traj) {
    const Grid& grid = traj.grid;
    const int k = traj.k;
    double scale = 0.0;
    Vec d2(k);
    for (const auto& field : traj.snaps) {
        for (int idx = 0; idx < grid.num_nodes(); ++idx) {
            if (grid.is_boundary(idx)) continue;
            int i1, i2;
            grid.node_coords(idx, i1, i2);
            for (int axis = 0; axis < grid.n; ++axis) {
                stencil::second_diff(field, grid, i1, i2, axis, d2.data());
                scale = std::max(scale, d2.norm());
            }
        }
    }
    return scale;
}

}  // namespace parmp
