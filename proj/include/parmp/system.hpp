#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parmp/expr.hpp"
#include "parmp/geometry.hpp"
#include "parmp/log.hpp"
#include "parmp/rng.hpp"

namespace parmp {

// Declared Lipschitz-in-z constants for D, the M_i, and phi on the run's
// hull of state values. The library never derives these; scenarios declare
// them and an empirical estimator can warn when they look too small.
struct LipschitzDecl {
    double c = 0.0;
    std::vector<double> m;
    double p = 0.0;
};

// Data of the system
//   u_t = D(x,t,u) sum_ij a_ij(x,t) u_xixj + sum_i M_i(x,t,u) u_xi + phi(x,t,u)
// with all coefficients given as expressions.
struct SystemSpec {
    int n = 1;  // spatial dimension (1 or 2)
    int k = 1;  // state dimension

    std::vector<ExprPtr> a;                  // n*n row-major; a[i][j] and a[j][i] share nodes
    std::vector<ExprPtr> D;                  // k*k row-major
    std::vector<std::vector<ExprPtr>> M;     // n matrices, each k*k row-major
    std::vector<ExprPtr> phi;                // k entries
    LipschitzDecl lipschitz;

    std::vector<CompiledExpr> a_c, D_c, phi_c;
    std::vector<std::vector<CompiledExpr>> M_c;

    // Validates shapes and symmetric sharing of a, then compiles everything.
    void finalize() {
        if (n < 1 || n > 2) throw std::invalid_argument("SystemSpec: n must be 1 or 2");
        if (k < 1) throw std::invalid_argument("SystemSpec: k must be >= 1");
        if (static_cast<int>(a.size()) != n * n) {
            throw std::invalid_argument("SystemSpec: a must be n*n");
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (a[i * n + j].get() != a[j * n + i].get()) {
                    throw std::invalid_argument("SystemSpec: a must share (i,j)/(j,i) nodes");
                }
            }
        }
        if (static_cast<int>(D.size()) != k * k) {
            throw std::invalid_argument("SystemSpec: D must be k*k");
        }
        if (static_cast<int>(M.size()) != n) {
            throw std::invalid_argument("SystemSpec: M must have n matrices");
        }
        for (const auto& Mi : M) {
            if (static_cast<int>(Mi.size()) != k * k) {
                throw std::invalid_argument("SystemSpec: each M_i must be k*k");
            }
        }
        if (static_cast<int>(phi.size()) != k) {
            throw std::invalid_argument("SystemSpec: phi must have k entries");
        }
        if (lipschitz.m.empty()) lipschitz.m.assign(n, 0.0);
        if (static_cast<int>(lipschitz.m.size()) != n) {
            throw std::invalid_argument("SystemSpec: lipschitz.m must have n entries");
        }
        if (lipschitz.c < 0.0 || lipschitz.p < 0.0) {
            throw std::invalid_argument("SystemSpec: lipschitz constants must be >= 0");
        }
        for (const double mi : lipschitz.m) {
            if (mi < 0.0) throw std::invalid_argument("SystemSpec: lipschitz constants must be >= 0");
        }
        a_c.clear();
        D_c.clear();
        phi_c.clear();
        M_c.clear();
        for (const auto& e : a) a_c.emplace_back(*e);
        for (const auto& e : D) D_c.emplace_back(*e);
        for (const auto& e : phi) phi_c.emplace_back(*e);
        for (const auto& Mi : M) {
            auto& out = M_c.emplace_back();
            for (const auto& e : Mi) out.emplace_back(*e);
        }
    }

    void eval_a(const EvalEnv& env, Mat& out) const {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) out(i, j) = a_c[i * n + j].eval(env);
        }
    }
    void eval_D(const EvalEnv& env, Mat& out) const {
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) out(i, j) = D_c[i * k + j].eval(env);
        }
    }
    void eval_M(int axis, const EvalEnv& env, Mat& out) const {
        const auto& Mi = M_c[axis];
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) out(i, j) = Mi[i * k + j].eval(env);
        }
    }
    void eval_phi(const EvalEnv& env, Vec& out) const {
        for (int i = 0; i < k; ++i) out[i] = phi_c[i].eval(env);
    }
};

// ---------------------------------------------------------------------------
// Left-eigenvector test and positive-definiteness floor

struct LeftEigenResult {
    std::optional<double> value;  // Rayleigh value nu' A nu, if nu is accepted
    double residual = 0.0;        // |A' nu - lambda nu|_2
};

// nu must be unit within 1e-9. lambda = nu.(A' nu); accepted when the
// residual |nu'A - lambda nu'| is within tol.
inline LeftEigenResult left_eigenvalue(const Vec& nu, const Mat& A, double tol) {
    if (std::fabs(nu.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("left_eigenvalue: nu is not unit length");
    }
    if (!A.allFinite()) {
        throw std::invalid_argument("left_eigenvalue: matrix has non-finite entries");
    }
    const Vec row = A.transpose() * nu;  // (nu' A)'
    const double lambda = nu.dot(row);
    const double residual = (row - lambda * nu).norm();
    LeftEigenResult res;
    res.residual = residual;
    if (residual <= tol) res.value = lambda;
    return res;
}

// Smallest eigenvalue of the symmetric part (A + A')/2. A positive result
// certifies z'Az >= floor |z|^2 for all z.
inline double positive_definite_floor(const Mat& A) {
    const Mat sym = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// Compatibility check between (K, phi, D, M_i)

struct SpaceTimeDomain {
    Vec x_lo, x_hi;
    double t_end = 1.0;
};

struct CompatSampleSpec {
    int spacetime_points = 32;
    int boundary_points = 128;
    int inward_per_point = 8;
    std::uint64_t seed = 42;
};

struct CompatLocation {
    Vec x;
    double t = 0.0;
    Vec v;
    Vec nu;
};

struct CompatibilityReport {
    bool pass = false;
    double tol = 0.0;

    double min_phi_dot_nu = 0.0;       // worst deficit is min - 0
    CompatLocation worst_phi;
    double max_D_residual = 0.0;
    CompatLocation worst_D;
    std::vector<double> max_M_residual;  // per axis
    std::vector<CompatLocation> worst_M;

    double min_floor_D = 0.0;  // over sampled (x,t,v)
    double min_floor_a = 0.0;  // over sampled (x,t)

    int spacetime_samples = 0;
    int boundary_samples = 0;
    int inward_samples = 0;
    long checks = 0;
};

// Samples (x,t) in the domain, v on the boundary of K (stratified for
// polytopes), and inward vectors nu at each v, then tests
// phi(x,t,v).nu >= -tol and the left-eigenvector property of nu for
// D(x,t,v) and each M_i(x,t,v). Also records the worst positive-definite
// floors of D and a over the samples.
inline CompatibilityReport check_compatibility(const SystemSpec& spec,
                                               const ConvexBody& K,
                                               const SpaceTimeDomain& domain,
                                               const CompatSampleSpec& samples,
                                               double tol) {
    if (K.dim() != spec.k) {
        throw std::invalid_argument("check_compatibility: K dimension must equal k");
    }
    CompatibilityReport rep;
    rep.tol = tol;
    rep.min_phi_dot_nu = std::numeric_limits<double>::infinity();
    rep.max_D_residual = 0.0;
    rep.max_M_residual.assign(spec.n, 0.0);
    rep.worst_M.resize(spec.n);
    rep.min_floor_D = std::numeric_limits<double>::infinity();
    rep.min_floor_a = std::numeric_limits<double>::infinity();

    // Space-time sample set (deterministic).
    SplitMix64 rng(mix_seed(samples.seed, 0x57AC));
    std::vector<std::pair<Vec, double>> spacetime;
    for (int s = 0; s < samples.spacetime_points; ++s) {
        Vec x(spec.n);
        for (int j = 0; j < spec.n; ++j) {
            x[j] = rng.next_double(domain.x_lo[j], domain.x_hi[j]);
        }
        // t in (0, t_end]: the domain is open at t = 0.
        const double t = domain.t_end * (1.0 - rng.next_double() * (1.0 - 1e-6));
        spacetime.emplace_back(std::move(x), t);
    }
    rep.spacetime_samples = static_cast<int>(spacetime.size());

    const auto boundary = boundary_samples(K, samples.boundary_points,
                                           mix_seed(samples.seed, 0xB0));
    rep.boundary_samples = static_cast<int>(boundary.size());

    Mat Dm(spec.k, spec.k), Mm(spec.k, spec.k), am(spec.n, spec.n);
    Vec phiv(spec.k);

    for (const auto& v : boundary) {
        const auto inward = inward_vector_samples(K, v, samples.inward_per_point);
        rep.inward_samples += static_cast<int>(inward.size());
        for (const auto& [x, t] : spacetime) {
            EvalEnv env;
            env.x = x.data();
            env.n = spec.n;
            env.t = t;
            env.z = v.data();
            env.k = spec.k;
            try {
                spec.eval_D(env, Dm);
                spec.eval_phi(env, phiv);
                spec.eval_a(env, am);
            } catch (const EvalError& ee) {
                throw EvalError("coefficient evaluation failed at x=" +
                                    geom_detail::point_str(x) + ", t=" + std::to_string(t) +
                                    ", v=" + geom_detail::point_str(v) + ": " + ee.what(),
                                ee.subexpr());
            }
            rep.min_floor_D = std::min(rep.min_floor_D, positive_definite_floor(Dm));
            rep.min_floor_a = std::min(rep.min_floor_a, positive_definite_floor(am));
            for (const auto& nu : inward) {
                ++rep.checks;
                const double pd = phiv.dot(nu);
                if (pd < rep.min_phi_dot_nu) {
                    rep.min_phi_dot_nu = pd;
                    rep.worst_phi = {x, t, v, nu};
                }
                const auto dres = left_eigenvalue(nu, Dm, tol);
                if (dres.residual > rep.max_D_residual) {
                    rep.max_D_residual = dres.residual;
                    rep.worst_D = {x, t, v, nu};
                }
                for (int axis = 0; axis < spec.n; ++axis) {
                    spec.eval_M(axis, env, Mm);
                    const auto mres = left_eigenvalue(nu, Mm, tol);
                    if (mres.residual > rep.max_M_residual[axis]) {
                        rep.max_M_residual[axis] = mres.residual;
                        rep.worst_M[axis] = {x, t, v, nu};
                    }
                }
            }
        }
    }

    bool pass = rep.min_phi_dot_nu >= -tol && rep.max_D_residual <= tol;
    for (const double r : rep.max_M_residual) pass = pass && r <= tol;
    rep.pass = pass;
    return rep;
}

// ---------------------------------------------------------------------------
// Empirical Lipschitz estimator (advisory)

struct LipschitzEstimate {
    double c = 0.0;
    std::vector<double> m;
    double p = 0.0;
    bool exceeds_declared = false;
};

// Max finite-difference quotient of each z-dependent coefficient over random
// z pairs in the box hull [z_lo, z_hi], at random (x,t) samples. Warns (via
// the return flag and the log) when a declared constant looks too small.
inline LipschitzEstimate estimate_lipschitz(const SystemSpec& spec,
                                            const SpaceTimeDomain& domain,
                                            const Vec& z_lo, const Vec& z_hi,
                                            int pairs = 10000,
                                            std::uint64_t seed = 42) {
    SplitMix64 rng(mix_seed(seed, 0x11b));
    LipschitzEstimate est;
    est.m.assign(spec.n, 0.0);
    Mat A1(spec.k, spec.k), A2(spec.k, spec.k);
    Vec p1(spec.k), p2(spec.k);
    Vec x(spec.n), z1(spec.k), z2(spec.k);
    for (int it = 0; it < pairs; ++it) {
        for (int j = 0; j < spec.n; ++j) x[j] = rng.next_double(domain.x_lo[j], domain.x_hi[j]);
        const double t = rng.next_double(0.0, domain.t_end);
        for (int j = 0; j < spec.k; ++j) {
            z1[j] = rng.next_double(z_lo[j], z_hi[j]);
            z2[j] = rng.next_double(z_lo[j], z_hi[j]);
        }
        const double dz = (z1 - z2).norm();
        if (dz < 1e-12) continue;
        EvalEnv e1, e2;
        e1.x = e2.x = x.data();
        e1.n = e2.n = spec.n;
        e1.t = e2.t = t;
        e1.k = e2.k = spec.k;
        e1.z = z1.data();
        e2.z = z2.data();
        spec.eval_D(e1, A1);
        spec.eval_D(e2, A2);
        est.c = std::max(est.c, (A1 - A2).norm() / dz);
        for (int axis = 0; axis < spec.n; ++axis) {
            spec.eval_M(axis, e1, A1);
            spec.eval_M(axis, e2, A2);
            est.m[axis] = std::max(est.m[axis], (A1 - A2).norm() / dz);
        }
        spec.eval_phi(e1, p1);
        spec.eval_phi(e2, p2);
        est.p = std::max(est.p, (p1 - p2).norm() / dz);
    }
    const double slack = 1e-9;
    if (est.c > spec.lipschitz.c + slack) est.exceeds_declared = true;
    if (est.p > spec.lipschitz.p + slack) est.exceeds_declared = true;
    for (int axis = 0; axis < spec.n; ++axis) {
        if (est.m[axis] > spec.lipschitz.m[axis] + slack) est.exceeds_declared = true;
    }
    if (est.exceeds_declared) {
        log_warn("declared Lipschitz constants look too small: declared "
                 "(c=%g, p=%g) vs estimated (c=%g, p=%g)",
                 spec.lipschitz.c, spec.lipschitz.p, est.c, est.p);
    }
    return est;
}

}  // namespace parmp
