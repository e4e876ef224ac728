#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "parmp/mp_harness.hpp"

namespace parmp {

// Tolerance of the discrete touching test: candidates must stay below d-bar
// on the stencil up to this slack, with exact equality at the base point.
inline constexpr double kTouchTol = 1e-12;

// (x, t, v, ell) with v a nearest boundary point of u(x,t) and ell the
// selected supporting functional at v.
struct NiceQuadruple {
    int node = -1;
    int snapshot = -1;
    std::array<double, 2> x{0.0, 0.0};
    double t = 0.0;
    Vec v;
    SupportingFunctional ell;
};

inline NiceQuadruple nice_quadruple(int node, int snapshot, const Trajectory& traj,
                                    const ConvexBody& K) {
    NiceQuadruple q;
    q.node = node;
    q.snapshot = snapshot;
    q.t = traj.time(snapshot);
    traj.grid.position(node, q.x.data());
    const Vec z = traj.snaps[snapshot].values(node);
    const NiceChoice choice = nearest_boundary_point(K, z);
    q.v = choice.v;
    q.ell = choice.ell;
    return q;
}

// ---------------------------------------------------------------------------
// Inequality residuals for ell-bar

struct EllReport {
    CheckStatus status = CheckStatus::Pass;
    double tol = 0.0;
    double min_residual = std::numeric_limits<double>::infinity();
    NodeLoc worst;
    long nodes_checked = 0;
    long nodes_skipped = 0;  // no contact data (e.g. ball center exactly)
};

// Residual of the per-quadruple inequality at every interior node and
// interior snapshot: with (v, nu) frozen from the node's quadruple and
// ell-bar = nu.(u - v) differenced over the space-time stencil,
//   r = ell_t - mu sum_ij a_ij ell_xixj - sum_i lambda_i ell_xi + gamma ell.
// Nonnegative (up to discretization error) exactly when the system is
// compatible along the trajectory's contact set.
inline EllReport ell_residuals(const Trajectory& traj, const SystemSpec& spec,
                               const ConvexBody& K, const DistanceField& dist,
                               const std::vector<std::vector<double>>& gamma,
                               double eigen_tol, double tol, int threads = 1,
                               std::vector<std::vector<double>>* residual_field = nullptr) {
    (void)K;
    EllReport rep;
    rep.tol = tol;
    const Grid& grid = traj.grid;
    const int nodes = grid.num_nodes();
    const int n = spec.n;
    const int k = spec.k;
    const int S = traj.num_snapshots();
    if (S < 3) {
        rep.status = CheckStatus::NotApplicable;
        return rep;
    }
    const double dt_snap = traj.snapshot_interval;
    // Residual per node, NaN where skipped; reduced sequentially afterwards.
    std::vector<std::vector<double>> resid(
        S, std::vector<double>(nodes, std::numeric_limits<double>::quiet_NaN()));
    for (int s = 1; s + 1 < S; ++s) {
        const double t = traj.time(s);
        auto& resid_s = resid[s];
        parallel_for_chunks(nodes, threads, [&](std::size_t begin, std::size_t end) {
            Mat Dm(k, k), Mm(k, k), am(n, n);
            double x[2];
            for (std::size_t nidx = begin; nidx < end; ++nidx) {
                const int idx = static_cast<int>(nidx);
                if (grid.is_boundary(idx)) continue;
                const ContactData& contact = dist.at(s, idx);
                if (!contact.has_point) continue;
                const Vec& nu = contact.nu;
                const Vec& v = contact.v;
                auto ellbar = [&](int snap, int node) {
                    const double* u = traj.snaps[snap].node(node);
                    double acc = 0.0;
                    for (int q = 0; q < k; ++q) acc += nu[q] * (u[q] - v[q]);
                    return acc;
                };
                int i1, i2;
                grid.node_coords(idx, i1, i2);
                const double here = ellbar(s, idx);
                const double lt = (ellbar(s + 1, idx) - ellbar(s - 1, idx)) /
                                  (2.0 * dt_snap);
                // Spatial differences of ell-bar at snapshot s.
                double lxx[3] = {0.0, 0.0, 0.0};  // xx, yy, xy
                double lx[2] = {0.0, 0.0};
                {
                    const double hp0 = grid.h[0];
                    lxx[0] = (ellbar(s, grid.node_index(i1 + 1, i2)) - 2.0 * here +
                              ellbar(s, grid.node_index(i1 - 1, i2))) /
                             (hp0 * hp0);
                    lx[0] = (ellbar(s, grid.node_index(i1 + 1, i2)) -
                             ellbar(s, grid.node_index(i1 - 1, i2))) /
                            (2.0 * hp0);
                    if (n == 2) {
                        const double hp1 = grid.h[1];
                        lxx[1] = (ellbar(s, grid.node_index(i1, i2 + 1)) - 2.0 * here +
                                  ellbar(s, grid.node_index(i1, i2 - 1))) /
                                 (hp1 * hp1);
                        lx[1] = (ellbar(s, grid.node_index(i1, i2 + 1)) -
                                 ellbar(s, grid.node_index(i1, i2 - 1))) /
                                (2.0 * hp1);
                        lxx[2] = (ellbar(s, grid.node_index(i1 + 1, i2 + 1)) -
                                  ellbar(s, grid.node_index(i1 + 1, i2 - 1)) -
                                  ellbar(s, grid.node_index(i1 - 1, i2 + 1)) +
                                  ellbar(s, grid.node_index(i1 - 1, i2 - 1))) /
                                 (4.0 * hp0 * hp1);
                    }
                }
                grid.position(idx, x);
                EvalEnv env;
                env.x = x;
                env.n = n;
                env.t = t;
                env.z = v.data();
                env.k = k;
                spec.eval_a(env, am);
                spec.eval_D(env, Dm);
                const auto mu_res = left_eigenvalue(nu, Dm, eigen_tol);
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
                            std::to_string(idx),
                        loc);
                }
                double second = am(0, 0) * lxx[0];
                if (n == 2) {
                    second += am(1, 1) * lxx[1];
                    second += (am(0, 1) + am(1, 0)) * lxx[2];
                }
                double first = 0.0;
                for (int axis = 0; axis < n; ++axis) {
                    spec.eval_M(axis, env, Mm);
                    const auto lam = left_eigenvalue(nu, Mm, eigen_tol);
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
                                std::to_string(idx),
                            loc);
                    }
                    first += *lam.value * lx[axis];
                }
                resid_s[idx] = lt - *mu_res.value * second - first +
                               gamma[s][idx] * here;
            }
        });
    }
    for (int s = 1; s + 1 < S; ++s) {
        for (int idx = 0; idx < nodes; ++idx) {
            if (grid.is_boundary(idx)) continue;
            const double r = resid[s][idx];
            if (std::isnan(r)) {
                ++rep.nodes_skipped;
                continue;
            }
            ++rep.nodes_checked;
            if (r < rep.min_residual) {
                rep.min_residual = r;
                rep.worst.snapshot = s;
                rep.worst.node = idx;
                rep.worst.t = traj.time(s);
                grid.position(idx, rep.worst.x.data());
            }
        }
    }
    if (rep.nodes_checked == 0) {
        rep.status = CheckStatus::NotApplicable;
    } else {
        rep.status = rep.min_residual >= -tol ? CheckStatus::Pass : CheckStatus::Fail;
    }
    if (residual_field != nullptr) *residual_field = std::move(resid);
    return rep;
}

// ---------------------------------------------------------------------------
// Touching quadratics

// psi(x,t) = p0 + pt (t - t0) + g.(x - x0) + (x - x0)' H (x - x0) / 2,
// equal to d-bar at the base point and below it on the space-time stencil.
struct TouchingQuadratic {
    int node = -1;
    int snapshot = -1;
    double p0 = 0.0;
    double pt = 0.0;
    std::array<double, 2> g{0.0, 0.0};
    std::array<double, 4> H{0.0, 0.0, 0.0, 0.0};  // row-major n*n, symmetric
    int radius = 2;

    double evaluate(double ds_time, const double* eta, int n) const {
        double val = p0 + pt * ds_time;
        for (int i = 0; i < n; ++i) {
            val += g[i] * eta[i];
            for (int j = 0; j < n; ++j) val += 0.5 * H[i * n + j] * eta[i] * eta[j];
        }
        return val;
    }
};

namespace visc_detail {

struct StencilView {
    const DistanceField* dist;
    const Grid* grid;
    double dt_snap;
    int node, snap, radius;
    int i1, i2;

    // Visits every stencil point as (ds, o1, o2, dbar value).
    template <typename Fn>
    void for_each(Fn&& fn) const {
        const int n = grid->n;
        const int lo1 = std::max(0, i1 - radius), hi1 = std::min(grid->npts[0] - 1, i1 + radius);
        const int lo2 = n == 2 ? std::max(0, i2 - radius) : i2;
        const int hi2 = n == 2 ? std::min(grid->npts[1] - 1, i2 + radius) : i2;
        for (int ds = -1; ds <= 1; ++ds) {
            for (int a = lo1; a <= hi1; ++a) {
                for (int b = lo2; b <= hi2; ++b) {
                    fn(ds, a - i1, b - i2,
                       dist->value(snap + ds, grid->node_index(a, b)));
                }
            }
        }
    }
};

inline bool touches(const TouchingQuadratic& q, const StencilView& view) {
    const int n = view.grid->n;
    bool ok = true;
    view.for_each([&](int ds, int o1, int o2, double dval) {
        if (!ok) return;
        double eta[2] = {o1 * view.grid->h[0], n == 2 ? o2 * view.grid->h[1] : 0.0};
        const double psi = q.evaluate(ds * view.dt_snap, eta, n);
        if (psi > dval + kTouchTol) ok = false;
    });
    return ok;
}

}  // namespace visc_detail

// Touching candidates at an interior node and interior snapshot: first the
// discrete-jet quadratic (slope clamped into the feasible time band, the
// Hessian relaxed by -delta I until the touching test holds), then random
// draws around the jet kept only when they touch. The list is empty when no
// linear-in-time quadratic can stay below d-bar (time-concave nodes), which
// mirrors the vacuity of the viscosity condition without test functions.
inline std::vector<TouchingQuadratic> touching_candidates(
    const DistanceField& dist, const Grid& grid, double dt_snap, int node, int snap,
    int radius, int trials, std::uint64_t seed) {
    std::vector<TouchingQuadratic> out;
    if (snap <= 0 || snap + 1 >= dist.snapshots) return out;
    if (grid.is_boundary(node)) return out;
    const int n = grid.n;
    int i1, i2;
    grid.node_coords(node, i1, i2);
    visc_detail::StencilView view{&dist, &grid, dt_snap, node, snap, radius, i1, i2};

    const double p0 = dist.value(snap, node);
    const double prev = dist.value(snap - 1, node);
    const double next = dist.value(snap + 1, node);
    const double pt_lo = (p0 - prev - kTouchTol) / dt_snap;
    const double pt_hi = (next - p0 + kTouchTol) / dt_snap;
    if (pt_lo > pt_hi) return out;

    TouchingQuadratic jet;
    jet.node = node;
    jet.snapshot = snap;
    jet.radius = radius;
    jet.p0 = p0;
    jet.pt = std::min(std::max((next - prev) / (2.0 * dt_snap), pt_lo), pt_hi);
    auto dval = [&](int a, int b) { return dist.value(snap, grid.node_index(a, b)); };
    jet.g[0] = (dval(i1 + 1, i2) - dval(i1 - 1, i2)) / (2.0 * grid.h[0]);
    jet.H[0] = (dval(i1 + 1, i2) - 2.0 * p0 + dval(i1 - 1, i2)) / (grid.h[0] * grid.h[0]);
    if (n == 2) {
        jet.g[1] = (dval(i1, i2 + 1) - dval(i1, i2 - 1)) / (2.0 * grid.h[1]);
        jet.H[3] = (dval(i1, i2 + 1) - 2.0 * p0 + dval(i1, i2 - 1)) /
                   (grid.h[1] * grid.h[1]);
        const double cross = (dval(i1 + 1, i2 + 1) - dval(i1 + 1, i2 - 1) -
                              dval(i1 - 1, i2 + 1) + dval(i1 - 1, i2 - 1)) /
                             (4.0 * grid.h[0] * grid.h[1]);
        jet.H[1] = cross;
        jet.H[2] = cross;
    }
    // Relaxation ladder: subtract delta I until the jet touches.
    double delta = 0.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
        TouchingQuadratic cand = jet;
        for (int i = 0; i < n; ++i) cand.H[i * n + i] -= delta;
        if (visc_detail::touches(cand, view)) {
            out.push_back(cand);
            break;
        }
        delta = delta == 0.0 ? grid.min_h() : (delta < 1.0 ? 1.0 : delta * 10.0);
        if (delta > 1e12) break;
    }

    SplitMix64 rng(mix_seed(seed, static_cast<std::uint64_t>(node),
                            static_cast<std::uint64_t>(snap)));
    const double gscale = 0.5 * (std::fabs(jet.g[0]) + std::fabs(jet.g[1]) + 1.0);
    double hnorm = 0.0;
    for (int i = 0; i < n * n; ++i) hnorm = std::max(hnorm, std::fabs(jet.H[i]));
    for (int trial = 0; trial < trials; ++trial) {
        TouchingQuadratic cand = jet;
        cand.pt = pt_lo + (pt_hi - pt_lo) * rng.next_double();
        for (int i = 0; i < n; ++i) {
            cand.g[i] = jet.g[i] + gscale * (2.0 * rng.next_double() - 1.0) *
                                       grid.min_h();
        }
        const double shift = rng.next_double() * (hnorm + 1.0);
        if (n == 2) {
            const double jitter = (2.0 * rng.next_double() - 1.0) * 0.2 * (hnorm + 1.0);
            cand.H[1] = jet.H[1] + jitter;
            cand.H[2] = cand.H[1];
        }
        for (int i = 0; i < n; ++i) {
            cand.H[i * n + i] =
                jet.H[i * n + i] - shift + (2.0 * rng.next_double() - 1.0) * 0.1;
        }
        if (visc_detail::touches(cand, view)) out.push_back(cand);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Viscosity supersolution check

struct SupersolutionReport {
    CheckStatus status = CheckStatus::Pass;
    double tol = 0.0;
    double worst_R = std::numeric_limits<double>::infinity();
    NodeLoc worst;
    TouchingQuadratic worst_candidate;
    long nodes_checked = 0;
    long nodes_empty = 0;          // no touching candidate found
    long candidates_attempted = 0;
    long candidates_accepted = 0;
};

// Evaluates R(psi) = pt - sum_ij alpha_ij H_ij - sum_i beta_i g_i + gamma d-bar
// for every touching candidate at every interior node and snapshot. Sampling
// can only refute the supersolution property, so a pass means "no violation
// found" at the given tolerance.
inline SupersolutionReport supersolution_check(const DistanceField& dist,
                                               const CoefficientFields& coeffs,
                                               const Grid& grid, double dt_snap,
                                               int radius, int trials, double tol,
                                               std::uint64_t seed, int threads = 1) {
    SupersolutionReport rep;
    rep.tol = tol;
    const int nodes = grid.num_nodes();
    const int S = dist.snapshots;
    const int n = grid.n;
    if (S < 3) {
        rep.status = CheckStatus::NotApplicable;
        return rep;
    }
    struct NodeResult {
        double worst = std::numeric_limits<double>::infinity();
        TouchingQuadratic cand;
        long attempted = 0;
        long accepted = 0;
        char checked = 0;
        char empty = 0;
    };
    for (int s = 1; s + 1 < S; ++s) {
        std::vector<NodeResult> results(nodes);
        parallel_for_chunks(nodes, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t nidx = begin; nidx < end; ++nidx) {
                const int idx = static_cast<int>(nidx);
                if (grid.is_boundary(idx)) continue;
                if (!coeffs.valid[s][idx]) continue;
                NodeResult& res = results[nidx];
                res.checked = 1;
                res.attempted = trials + 1;  // jet attempt plus random draws
                const auto cands =
                    touching_candidates(dist, grid, dt_snap, idx, s, radius, trials, seed);
                res.accepted = static_cast<long>(cands.size());
                if (cands.empty()) {
                    res.empty = 1;
                    continue;
                }
                const auto& alpha = coeffs.alpha[s][idx];
                const double gamma = coeffs.gamma[s][idx];
                const double dbar = dist.value(s, idx);
                for (const auto& cand : cands) {
                    double second = 0.0;
                    for (int i = 0; i < n; ++i) {
                        for (int j = 0; j < n; ++j) {
                            second += alpha[i * n + j] * cand.H[i * n + j];
                        }
                    }
                    double first = 0.0;
                    for (int i = 0; i < n; ++i) first += coeffs.beta(s, idx, i) * cand.g[i];
                    const double R = cand.pt - second - first + gamma * dbar;
                    if (R < res.worst) {
                        res.worst = R;
                        res.cand = cand;
                    }
                }
            }
        });
        for (int idx = 0; idx < nodes; ++idx) {
            const NodeResult& res = results[idx];
            if (!res.checked) continue;
            ++rep.nodes_checked;
            rep.candidates_attempted += res.attempted;
            rep.candidates_accepted += res.accepted;
            if (res.empty) {
                ++rep.nodes_empty;
                continue;
            }
            if (res.worst < rep.worst_R) {
                rep.worst_R = res.worst;
                rep.worst_candidate = res.cand;
                rep.worst.snapshot = s;
                rep.worst.node = idx;
                rep.worst.t = s * dt_snap;
                grid.position(idx, rep.worst.x.data());
            }
        }
    }
    if (rep.nodes_checked == 0) {
        rep.status = CheckStatus::NotApplicable;
    } else {
        rep.status = rep.worst_R >= -tol ? CheckStatus::Pass : CheckStatus::Fail;
    }
    return rep;
}

}  // namespace parmp
