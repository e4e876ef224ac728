#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "parmp/grid.hpp"
#include "parmp/log.hpp"
#include "parmp/parallel.hpp"
#include "parmp/scenario.hpp"
#include "parmp/system.hpp"

namespace parmp {

class SolverError : public std::runtime_error {
public:
    SolverError(std::string message, int node, double t)
        : std::runtime_error(std::move(message)), node_(node), t_(t) {}

    int node() const { return node_; }
    double time() const { return t_; }

private:
    int node_;
    double t_;
};

namespace stencil {

// Central second difference along `axis` at an interior node.
inline void second_diff(const Field& f, const Grid& g, int i1, int i2, int axis,
                        double* out) {
    const int k = f.k;
    const int c = g.node_index(i1, i2);
    const int p = axis == 0 ? g.node_index(i1 + 1, i2) : g.node_index(i1, i2 + 1);
    const int m = axis == 0 ? g.node_index(i1 - 1, i2) : g.node_index(i1, i2 - 1);
    const double inv_h2 = 1.0 / (g.h[axis] * g.h[axis]);
    const double* fc = f.node(c);
    const double* fp = f.node(p);
    const double* fm = f.node(m);
    for (int q = 0; q < k; ++q) out[q] = (fp[q] - 2.0 * fc[q] + fm[q]) * inv_h2;
}

// 4-point cross stencil for the mixed derivative u_{x1 x2}.
inline void mixed_diff(const Field& f, const Grid& g, int i1, int i2, double* out) {
    const int k = f.k;
    const double* fpp = f.node(g.node_index(i1 + 1, i2 + 1));
    const double* fpm = f.node(g.node_index(i1 + 1, i2 - 1));
    const double* fmp = f.node(g.node_index(i1 - 1, i2 + 1));
    const double* fmm = f.node(g.node_index(i1 - 1, i2 - 1));
    const double scale = 1.0 / (4.0 * g.h[0] * g.h[1]);
    for (int q = 0; q < k; ++q) out[q] = (fpp[q] - fpm[q] - fmp[q] + fmm[q]) * scale;
}

// Central first difference along `axis`.
inline void first_diff(const Field& f, const Grid& g, int i1, int i2, int axis,
                       double* out) {
    const int k = f.k;
    const int p = axis == 0 ? g.node_index(i1 + 1, i2) : g.node_index(i1, i2 + 1);
    const int m = axis == 0 ? g.node_index(i1 - 1, i2) : g.node_index(i1, i2 - 1);
    const double scale = 1.0 / (2.0 * g.h[axis]);
    const double* fp = f.node(p);
    const double* fm = f.node(m);
    for (int q = 0; q < k; ++q) out[q] = (fp[q] - fm[q]) * scale;
}

}  // namespace stencil

// Right-hand side of the system at interior nodes:
//   D(x,t,u) sum_ij a_ij u_xixj + sum_i M_i(x,t,u) u_xi + phi(x,t,u).
// Boundary slots of the returned field are zero.
inline Field rhs_eval(const Field& field, const Grid& grid, const SystemSpec& spec,
                      double t, int threads = 1) {
    const int k = spec.k;
    const int n = spec.n;
    Field out(grid, k, t);
    const int nodes = grid.num_nodes();
    parallel_for_chunks(nodes, threads, [&](std::size_t begin, std::size_t end) {
        Mat Dm(k, k), Mm(k, k), am(n, n);
        Vec phiv(k), sum(k), tmp(k);
        std::vector<Vec> d2(3, Vec(k));  // xx, yy, xy
        std::vector<Vec> d1(2, Vec(k));
        double x[2];
        for (std::size_t node = begin; node < end; ++node) {
            const int idx = static_cast<int>(node);
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
            try {
                spec.eval_a(env, am);
                spec.eval_D(env, Dm);
                spec.eval_phi(env, phiv);
                stencil::second_diff(field, grid, i1, i2, 0, d2[0].data());
                if (n == 2) {
                    stencil::second_diff(field, grid, i1, i2, 1, d2[1].data());
                    stencil::mixed_diff(field, grid, i1, i2, d2[2].data());
                }
                stencil::first_diff(field, grid, i1, i2, 0, d1[0].data());
                if (n == 2) stencil::first_diff(field, grid, i1, i2, 1, d1[1].data());

                sum = am(0, 0) * d2[0];
                if (n == 2) {
                    sum += am(1, 1) * d2[1];
                    sum += (am(0, 1) + am(1, 0)) * d2[2];
                }
                tmp = Dm * sum;
                for (int axis = 0; axis < n; ++axis) {
                    spec.eval_M(axis, env, Mm);
                    tmp += Mm * d1[axis];
                }
                tmp += phiv;
            } catch (const EvalError& ee) {
                throw SolverError("coefficient evaluation failed at node " +
                                      std::to_string(idx) + ", t=" + std::to_string(t) +
                                      ": " + ee.what(),
                                  idx, t);
            }
            double* dst = out.node(idx);
            for (int q = 0; q < k; ++q) {
                if (!std::isfinite(tmp[q])) {
                    throw SolverError("non-finite right-hand side at node " +
                                          std::to_string(idx) + ", t=" + std::to_string(t),
                                      idx, t);
                }
                dst[q] = tmp[q];
            }
        }
    });
    return out;
}

// Stability bound for the explicit step:
//   dt = safety * h_min^2 / (2 n A D + h_min M)
// with A = max_node sum_ij |a_ij|, D = max_node row-sum norm of D,
// M = max_node sum_i row-sum norm of M_i, safety = 0.4. Capped at the
// snapshot interval.
inline double stable_dt(const SystemSpec& spec, const Grid& grid, const Field& field,
                        double t, double snapshot_interval) {
    const int k = spec.k;
    const int n = spec.n;
    Mat Dm(k, k), Mm(k, k), am(n, n);
    double x[2];
    double a_hat = 0.0, d_hat = 0.0, m_hat = 0.0;
    const int nodes = grid.num_nodes();
    for (int idx = 0; idx < nodes; ++idx) {
        grid.position(idx, x);
        EvalEnv env;
        env.x = x;
        env.n = n;
        env.t = t;
        env.z = field.node(idx);
        env.k = k;
        spec.eval_a(env, am);
        spec.eval_D(env, Dm);
        a_hat = std::max(a_hat, am.cwiseAbs().sum());
        d_hat = std::max(d_hat, Dm.cwiseAbs().rowwise().sum().maxCoeff());
        double msum = 0.0;
        for (int axis = 0; axis < n; ++axis) {
            spec.eval_M(axis, env, Mm);
            msum += Mm.cwiseAbs().rowwise().sum().maxCoeff();
        }
        m_hat = std::max(m_hat, msum);
    }
    const double hmin = grid.min_h();
    const double denom = 2.0 * n * a_hat * d_hat + hmin * m_hat;
    constexpr double safety = 0.4;
    if (denom <= 0.0) return snapshot_interval;
    return std::min(safety * hmin * hmin / denom, snapshot_interval);
}

namespace solver_detail {

inline void apply_boundary(Field& f, const Grid& grid,
                           const std::vector<CompiledExpr>& boundary, double t) {
    const int k = f.k;
    double x[2];
    const int nodes = grid.num_nodes();
    for (int idx = 0; idx < nodes; ++idx) {
        if (!grid.is_boundary(idx)) continue;
        grid.position(idx, x);
        EvalEnv env;
        env.x = x;
        env.n = grid.n;
        env.t = t;
        double* dst = f.node(idx);
        for (int q = 0; q < k; ++q) dst[q] = boundary[q].eval(env);
    }
}

inline void check_finite(const Field& f, const Grid& grid, double t) {
    const int nodes = grid.num_nodes();
    for (int idx = 0; idx < nodes; ++idx) {
        const double* v = f.node(idx);
        for (int q = 0; q < f.k; ++q) {
            if (!std::isfinite(v[q])) {
                throw SolverError("instability detected: non-finite value at node " +
                                      std::to_string(idx) + ", component " +
                                      std::to_string(q) + ", t=" + std::to_string(t),
                                  idx, t);
            }
        }
    }
}

}  // namespace solver_detail

// One explicit step from t to t + dt. Interior nodes advance by the chosen
// rule; boundary nodes take the Dirichlet data (per stage time for RK4).
inline Field step(const Field& field, const Grid& grid, const SystemSpec& spec,
                  const std::vector<CompiledExpr>& boundary, double t, double dt,
                  TimeStepper method = TimeStepper::Euler, int threads = 1) {
    const int nodes = grid.num_nodes();
    const int k = spec.k;
    Field next = field;
    next.t = t + dt;
    if (method == TimeStepper::Euler) {
        const Field rhs = rhs_eval(field, grid, spec, t, threads);
        for (int idx = 0; idx < nodes; ++idx) {
            if (grid.is_boundary(idx)) continue;
            double* dst = next.node(idx);
            const double* r = rhs.node(idx);
            for (int q = 0; q < k; ++q) dst[q] += dt * r[q];
        }
    } else {
        // Classical four-stage rule.
        const Field k1 = rhs_eval(field, grid, spec, t, threads);
        Field stage = field;
        auto set_stage = [&](const Field& slope, double frac) {
            stage = field;
            stage.t = t + frac * dt;
            for (int idx = 0; idx < nodes; ++idx) {
                if (grid.is_boundary(idx)) continue;
                double* dst = stage.node(idx);
                const double* s = slope.node(idx);
                for (int q = 0; q < k; ++q) dst[q] += frac * dt * s[q];
            }
            solver_detail::apply_boundary(stage, grid, boundary, t + frac * dt);
        };
        set_stage(k1, 0.5);
        const Field k2 = rhs_eval(stage, grid, spec, t + 0.5 * dt, threads);
        set_stage(k2, 0.5);
        const Field k3 = rhs_eval(stage, grid, spec, t + 0.5 * dt, threads);
        set_stage(k3, 1.0);
        const Field k4 = rhs_eval(stage, grid, spec, t + dt, threads);
        for (int idx = 0; idx < nodes; ++idx) {
            if (grid.is_boundary(idx)) continue;
            double* dst = next.node(idx);
            const double* r1 = k1.node(idx);
            const double* r2 = k2.node(idx);
            const double* r3 = k3.node(idx);
            const double* r4 = k4.node(idx);
            for (int q = 0; q < k; ++q) {
                dst[q] += dt / 6.0 * (r1[q] + 2.0 * r2[q] + 2.0 * r3[q] + r4[q]);
            }
        }
    }
    solver_detail::apply_boundary(next, grid, boundary, t + dt);
    solver_detail::check_finite(next, grid, t + dt);
    return next;
}

// Integrates the scenario from t = 0 to t_end, recording snapshots at the
// configured cadence. Internal steps never exceed the stability bound,
// which is re-evaluated at the start of each snapshot interval.
inline Trajectory run_scenario(const Scenario& scn) {
    const Grid& grid = scn.grid;
    const int k = scn.spec.k;
    std::vector<CompiledExpr> initial_c, boundary_c;
    for (const auto& e : scn.initial) initial_c.emplace_back(*e);
    for (const auto& e : scn.boundary) boundary_c.emplace_back(*e);

    Trajectory traj;
    traj.grid = grid;
    traj.k = k;
    traj.snapshot_interval = scn.snapshot_interval;

    Field current(grid, k, 0.0);
    {
        double x[2];
        const int nodes = grid.num_nodes();
        for (int idx = 0; idx < nodes; ++idx) {
            grid.position(idx, x);
            EvalEnv env;
            env.x = x;
            env.n = grid.n;
            env.t = 0.0;
            double* dst = current.node(idx);
            for (int q = 0; q < k; ++q) dst[q] = initial_c[q].eval(env);
        }
        solver_detail::check_finite(current, grid, 0.0);
    }
    traj.snaps.push_back(current);

    const int total_snaps =
        static_cast<int>(std::round(scn.t_end / scn.snapshot_interval));
    for (int s = 0; s < total_snaps; ++s) {
        const double t0 = s * scn.snapshot_interval;
        const double dt_bound =
            stable_dt(scn.spec, grid, current, t0, scn.snapshot_interval);
        const int steps = std::max(
            1, static_cast<int>(std::ceil(scn.snapshot_interval / dt_bound - 1e-12)));
        const double dt = scn.snapshot_interval / steps;
        traj.internal_dt = std::max(traj.internal_dt, dt);
        for (int j = 0; j < steps; ++j) {
            const double t = t0 + j * dt;
            current = step(current, grid, scn.spec, boundary_c, t, dt, scn.method,
                           scn.threads);
        }
        current.t = (s + 1) * scn.snapshot_interval;
        traj.snaps.push_back(current);
        log_info("scenario %s: snapshot %d/%d (t=%g, %d internal steps)",
                 scn.name.c_str(), s + 1, total_snaps, current.t, steps);
    }
    return traj;
}

}  // namespace parmp
