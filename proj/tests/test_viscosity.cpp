#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "parmp/rng.hpp"
#include "parmp/scenario.hpp"
#include "parmp/solver.hpp"
#include "parmp/viscosity.hpp"

using namespace parmp;

namespace {

SystemSpec make_spec(int n, int k, std::vector<std::string> a,
                     std::vector<std::string> D,
                     std::vector<std::vector<std::string>> M,
                     std::vector<std::string> phi, LipschitzDecl lip = {}) {
    SystemSpec spec;
    spec.n = n;
    spec.k = k;
    const ExprDims dims{n, k};
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j < i) {
                spec.a.push_back(spec.a[j * n + i]);
            } else {
                spec.a.push_back(parse_expression(a[i * n + j], dims));
            }
        }
    }
    for (const auto& s : D) spec.D.push_back(parse_expression(s, dims));
    for (const auto& Mi : M) {
        auto& out = spec.M.emplace_back();
        for (const auto& s : Mi) out.push_back(parse_expression(s, dims));
    }
    for (const auto& s : phi) spec.phi.push_back(parse_expression(s, dims));
    spec.lipschitz = std::move(lip);
    spec.finalize();
    return spec;
}

Vec vecn(std::initializer_list<double> vals) {
    Vec v(static_cast<int>(vals.size()));
    int i = 0;
    for (double x : vals) v[i++] = x;
    return v;
}

Trajectory make_traj(const Grid& grid, int k, int snapshots, double interval,
                     const std::function<void(const double*, double, double*)>& fn) {
    Trajectory traj;
    traj.grid = grid;
    traj.k = k;
    traj.snapshot_interval = interval;
    traj.internal_dt = interval;
    for (int s = 0; s < snapshots; ++s) {
        Field f(grid, k, s * interval);
        double x[2];
        for (int idx = 0; idx < grid.num_nodes(); ++idx) {
            grid.position(idx, x);
            fn(x, f.t, f.node(idx));
        }
        traj.snaps.push_back(std::move(f));
    }
    return traj;
}

// Manufactured d-bar field (no trajectory behind it).
DistanceField make_dbar(const Grid& grid, int snapshots, double interval,
                        const std::function<double(const double*, double)>& fn) {
    DistanceField dist;
    dist.snapshots = snapshots;
    dist.nodes = grid.num_nodes();
    dist.dbar.assign(snapshots, std::vector<double>(dist.nodes, 0.0));
    dist.contact.assign(snapshots, std::vector<ContactData>(dist.nodes));
    double x[2];
    for (int s = 0; s < snapshots; ++s) {
        for (int idx = 0; idx < dist.nodes; ++idx) {
            grid.position(idx, x);
            dist.dbar[s][idx] = fn(x, s * interval);
        }
    }
    return dist;
}

CoefficientFields plain_coeffs(const Grid& grid, int snapshots, double gamma_value) {
    CoefficientFields c;
    c.snapshots = snapshots;
    c.nodes = grid.num_nodes();
    c.n = grid.n;
    c.valid.assign(snapshots, std::vector<char>(c.nodes, 0));
    c.mu.assign(snapshots, std::vector<double>(c.nodes, 1.0));
    c.lambda.assign(snapshots,
                    std::vector<std::array<double, 2>>(c.nodes, {0.0, 0.0}));
    std::array<double, 4> identity = grid.n == 2
                                         ? std::array<double, 4>{1.0, 0.0, 0.0, 1.0}
                                         : std::array<double, 4>{1.0, 0.0, 0.0, 0.0};
    c.alpha.assign(snapshots, std::vector<std::array<double, 4>>(c.nodes, identity));
    c.gamma.assign(snapshots, std::vector<double>(c.nodes, gamma_value));
    for (int s = 0; s < snapshots; ++s) {
        for (int idx = 0; idx < c.nodes; ++idx) {
            if (!grid.is_boundary(idx)) c.valid[s][idx] = 1;
        }
    }
    return c;
}

// Independent re-check of the touching invariant.
bool revalidate(const TouchingQuadratic& q, const DistanceField& dist,
                const Grid& grid, double interval) {
    int i1, i2;
    grid.node_coords(q.node, i1, i2);
    const int n = grid.n;
    double zero[2] = {0.0, 0.0};
    if (q.evaluate(0.0, zero, n) != dist.value(q.snapshot, q.node)) return false;
    for (int ds = -1; ds <= 1; ++ds) {
        for (int o1 = -q.radius; o1 <= q.radius; ++o1) {
            const int a = i1 + o1;
            if (a < 0 || a >= grid.npts[0]) continue;
            const int blo = n == 2 ? -q.radius : 0;
            const int bhi = n == 2 ? q.radius : 0;
            for (int o2 = blo; o2 <= bhi; ++o2) {
                const int b = i2 + o2;
                if (n == 2 && (b < 0 || b >= grid.npts[1])) continue;
                double eta[2] = {o1 * grid.h[0], n == 2 ? o2 * grid.h[1] : 0.0};
                const double psi = q.evaluate(ds * interval, eta, n);
                const double dval =
                    dist.value(q.snapshot + ds, grid.node_index(a, b));
                if (psi > dval + 1e-12) return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_CASE("nice quadruple on the interval", "[viscosity]") {
    const ConvexBody K = ConvexBody::box(vecn({0.0}), vecn({1.0}));
    const Grid grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {9, 1});
    const auto traj_a = make_traj(grid, 1, 2, 0.1,
                                  [](const double*, double, double* u) { u[0] = 0.3; });
    const auto q_a = nice_quadruple(3, 1, traj_a, K);
    REQUIRE(q_a.v[0] == 0.0);
    REQUIRE(q_a.ell.grad[0] == 1.0);
    // Tie at 0.5 breaks toward the smaller component.
    const auto traj_b = make_traj(grid, 1, 2, 0.1,
                                  [](const double*, double, double* u) { u[0] = 0.5; });
    const auto q_b = nice_quadruple(3, 1, traj_b, K);
    REQUIRE(q_b.v[0] == 0.0);
    REQUIRE(q_b.ell.grad[0] == 1.0);

    const ConvexBody box2 = ConvexBody::box(vecn({0.0, 0.0}), vecn({1.0, 1.0}));
    const auto traj_c = make_traj(grid, 2, 2, 0.1, [](const double*, double, double* u) {
        u[0] = 0.5;
        u[1] = 0.5;
    });
    const auto q_c = nice_quadruple(3, 1, traj_c, box2);
    REQUIRE(q_c.v[0] == 0.0);
    REQUIRE(q_c.v[1] == 0.5);

    const auto traj_d = make_traj(grid, 1, 2, 0.1,
                                  [](const double*, double, double* u) { u[0] = 2.0; });
    REQUIRE_THROWS_AS(nice_quadruple(3, 1, traj_d, K), GeometryError);
}

TEST_CASE("ell residual on the half line equals the heat residual plus gamma u",
          "[viscosity]") {
    // K = [0, inf): the only supporting functional is the identity, so
    // ell-bar = u and the residual is the discrete heat residual + gamma u.
    Scenario scn;
    scn.name = "halfline";
    scn.spec = make_spec(1, 1, {"1"}, {"1"}, {{"0"}}, {"0"},
                         LipschitzDecl{0.0, {0.0}, 1.0});
    scn.K = ConvexBody::polytope({Halfspace{vecn({1.0}), 0.0}});
    scn.grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {101, 1});
    scn.initial = {parse_expression("0.5 + 0.4*sin(3.141592653589793*x1)", ExprDims{1, 0})};
    scn.boundary = {parse_expression("0.5", ExprDims{1, 0})};
    scn.t_end = 0.02;
    scn.snapshot_interval = 0.0025;
    const Trajectory traj = run_scenario(scn);
    const DistanceField dist = distance_field(traj, scn.K);
    const auto gamma = gamma_field(traj, scn.spec);
    const auto rep = ell_residuals(traj, scn.spec, scn.K, dist, gamma, 1e-8, 1e-6);
    REQUIRE(rep.status == CheckStatus::Pass);
    // gamma u >= u > 0.05 dominates the discretization noise.
    REQUIRE(rep.min_residual >= 0.05);
}

TEST_CASE("ell residual for x-constant data is gamma ell", "[viscosity]") {
    const Grid grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {9, 1});
    const ConvexBody K = ConvexBody::box(vecn({0.0}), vecn({1.0}));
    const auto spec = make_spec(1, 1, {"1"}, {"1"}, {{"0"}}, {"0"},
                                LipschitzDecl{0.0, {0.0}, 2.0});
    const auto traj = make_traj(grid, 1, 4, 0.1,
                                [](const double*, double, double* u) { u[0] = 0.3; });
    const DistanceField dist = distance_field(traj, K);
    const auto gamma = gamma_field(traj, spec);
    const auto rep = ell_residuals(traj, spec, K, dist, gamma, 1e-8, 1e-9);
    REQUIRE(rep.status == CheckStatus::Pass);
    // All differences vanish; the residual is exactly gamma * ell = 2 * 0.3.
    REQUIRE(rep.min_residual == Catch::Approx(0.6).margin(1e-14));
}

TEST_CASE("ell residual passes on the ball sink at h = 1/100", "[viscosity]") {
    Scenario scn;
    scn.name = "ball-sink-test";
    scn.spec = make_spec(1, 2, {"1"}, {"1", "0", "0", "1"}, {{"0", "0", "0", "0"}},
                         {"-z1", "-z2"}, LipschitzDecl{0.0, {0.0}, 1.0});
    scn.K = ConvexBody::ball(Vec::Zero(2), 1.0);
    scn.grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {101, 1});
    scn.initial = {
        parse_expression("0.5*sin(3.141592653589793*x1)", ExprDims{1, 0}),
        parse_expression("0.5*cos(3.141592653589793*x1)", ExprDims{1, 0})};
    scn.boundary = scn.initial;
    scn.t_end = 0.02;
    scn.snapshot_interval = 0.0025;
    const Trajectory traj = run_scenario(scn);
    const DistanceField dist = distance_field(traj, scn.K);
    const auto gamma = gamma_field(traj, scn.spec);
    const auto rep = ell_residuals(traj, scn.spec, scn.K, dist, gamma, 1e-8, 1e-6);
    REQUIRE(rep.status == CheckStatus::Pass);
    REQUIRE(rep.min_residual >= -1e-6);
}

TEST_CASE("ell residual flags the incompatible sink", "[viscosity]") {
    // u_t = u_xx - 1 with data pinned at zero: ell-bar = u at the low facet
    // and the residual is the discrete (u_t - u_xx) = -1.
    Scenario scn;
    scn.name = "incompatible";
    scn.spec = make_spec(1, 1, {"1"}, {"1"}, {{"0"}}, {"-1"});
    scn.K = ConvexBody::box(vecn({0.0}), vecn({1.0}));
    scn.grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {101, 1});
    scn.initial = {parse_expression("0", ExprDims{1, 0})};
    scn.boundary = {parse_expression("0", ExprDims{1, 0})};
    scn.t_end = 0.02;
    scn.snapshot_interval = 0.0025;
    const Trajectory traj = run_scenario(scn);
    const DistanceField dist = distance_field(traj, scn.K);
    const auto gamma = gamma_field(traj, scn.spec);
    const auto rep = ell_residuals(traj, scn.spec, scn.K, dist, gamma, 1e-8, 1e-3);
    REQUIRE(rep.status == CheckStatus::Fail);
    REQUIRE(rep.min_residual <= -0.5);
}

TEST_CASE("exactly quadratic dbar yields the jet as first candidate", "[viscosity]") {
    const Grid grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {9, 1});
    const auto dist = make_dbar(grid, 3, 0.1, [](const double* x, double) {
        return 1.0 + (x[0] - 0.5) * (x[0] - 0.5);
    });
    const auto cands = touching_candidates(dist, grid, 0.1, 4, 1, 2, 50, 7);
    REQUIRE_FALSE(cands.empty());
    // The discrete jet reproduces the quadratic exactly: no relaxation.
    REQUIRE(cands[0].pt == 0.0);
    REQUIRE(cands[0].H[0] == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(cands[0].g[0] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(cands[0].p0 == dist.value(1, 4));
}

TEST_CASE("kink caps the slopes of touching candidates", "[viscosity]") {
    const Grid grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {17, 1});
    const auto dist = make_dbar(grid, 3, 0.1, [](const double* x, double) {
        return std::fabs(x[0] - 0.5);
    });
    // Node 8 sits exactly at the kink.
    const auto cands = touching_candidates(dist, grid, 0.1, 8, 1, 2, 100, 11);
    REQUIRE_FALSE(cands.empty());
    for (const auto& c : cands) {
        REQUIRE(std::fabs(c.g[0]) <= 1.0 + 1e-9);
    }
}

TEST_CASE("every emitted candidate revalidates on its stencil", "[viscosity]") {
    const Grid grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {33, 1});
    const auto dist = make_dbar(grid, 5, 0.05, [](const double* x, double t) {
        return 0.5 + 0.3 * std::sin(3.0 * x[0] + 2.0 * t) * std::exp(-t);
    });
    long total = 0;
    for (int s = 1; s <= 3; ++s) {
        for (int node = 1; node < grid.num_nodes() - 1; ++node) {
            const auto cands = touching_candidates(dist, grid, 0.05, node, s, 2, 100, 5);
            for (const auto& c : cands) {
                ++total;
                REQUIRE(revalidate(c, dist, grid, 0.05));
            }
        }
    }
    REQUIRE(total > 500);
}

TEST_CASE("candidates are deterministic in the seed", "[viscosity]") {
    const Grid grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {17, 1});
    const auto dist = make_dbar(grid, 3, 0.1, [](const double* x, double t) {
        return 0.4 + 0.2 * std::cos(4.0 * x[0]) - 0.05 * t;
    });
    const auto a = touching_candidates(dist, grid, 0.1, 7, 1, 2, 60, 99);
    const auto b = touching_candidates(dist, grid, 0.1, 7, 1, 2, 60, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].pt == b[i].pt);
        REQUIRE(a[i].g[0] == b[i].g[0]);
        REQUIRE(a[i].H[0] == b[i].H[0]);
    }
}

TEST_CASE("supersolution check on a constant field", "[viscosity]") {
    const Grid grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {17, 1});
    const auto dist = make_dbar(grid, 4, 0.1, [](const double*, double) { return 0.5; });
    const auto coeffs = plain_coeffs(grid, 4, 0.0);
    const auto rep = supersolution_check(dist, coeffs, grid, 0.1, 2, 100, 1e-8, 3);
    REQUIRE(rep.status == CheckStatus::Pass);
    REQUIRE(rep.nodes_checked > 0);
    REQUIRE(rep.candidates_attempted >= 100 * rep.nodes_checked);
}

TEST_CASE("supersolution check passes on the heat run", "[viscosity]") {
    Scenario scn;
    scn.name = "heat";
    scn.spec = make_spec(1, 1, {"1"}, {"1"}, {{"0"}}, {"0"});
    scn.K = ConvexBody::box(vecn({0.0}), vecn({1.0}));
    scn.grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {101, 1});
    scn.initial = {parse_expression("0.5 + 0.4*sin(3.141592653589793*x1)", ExprDims{1, 0})};
    scn.boundary = {parse_expression("0.5", ExprDims{1, 0})};
    scn.t_end = 0.02;
    scn.snapshot_interval = 0.0025;
    const Trajectory traj = run_scenario(scn);
    const DistanceField dist = distance_field(traj, scn.K);
    auto gamma = gamma_field(traj, scn.spec);
    const auto coeffs = effective_coefficients(traj, scn.spec, scn.K, dist,
                                               std::move(gamma), 1e-8);
    const double h = scn.grid.h[0];
    const double tol = 10.0 * (h * h + traj.internal_dt) * second_difference_scale(traj);
    const auto rep = supersolution_check(dist, coeffs, scn.grid,
                                         traj.snapshot_interval, 2, 100, tol, 42);
    REQUIRE(rep.status == CheckStatus::Pass);
    // Loosening the tolerance never flips a pass to fail.
    const auto loose = supersolution_check(dist, coeffs, scn.grid,
                                           traj.snapshot_interval, 2, 100, tol * 10.0, 42);
    REQUIRE(loose.status == CheckStatus::Pass);
    REQUIRE(loose.worst_R == rep.worst_R);
}

TEST_CASE("adversarial field dbar = -t is flagged", "[viscosity]") {
    const Grid grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {17, 1});
    const auto dist = make_dbar(grid, 5, 0.1,
                                [](const double*, double t) { return -t; });
    const auto coeffs = plain_coeffs(grid, 5, 0.0);
    const auto rep = supersolution_check(dist, coeffs, grid, 0.1, 2, 100, 1e-6, 3);
    REQUIRE(rep.status == CheckStatus::Fail);
    REQUIRE(rep.worst_R <= -0.9);
    REQUIRE(rep.worst_candidate.pt == Catch::Approx(-1.0).margin(1e-9));
}

TEST_CASE("jet residual agrees with the ell residual at smooth unique contact",
          "[viscosity]") {
    // With u < 0.5 everywhere the nearest facet is z >= 0 at every node, so
    // d-bar = ell-bar = u and the raw discrete jet of d-bar reproduces the
    // ell residual exactly.
    Scenario scn;
    scn.name = "heat-low";
    scn.spec = make_spec(1, 1, {"1"}, {"1"}, {{"0"}}, {"0"});
    scn.K = ConvexBody::box(vecn({0.0}), vecn({1.0}));
    scn.grid = Grid::make(1, {0.0, 0.0}, {1.0, 1.0}, {101, 1});
    scn.initial = {parse_expression("0.25 + 0.1*sin(3.141592653589793*x1)", ExprDims{1, 0})};
    scn.boundary = {parse_expression("0.25", ExprDims{1, 0})};
    scn.t_end = 0.01;
    scn.snapshot_interval = 0.0025;
    const Trajectory traj = run_scenario(scn);
    const DistanceField dist = distance_field(traj, scn.K);
    const auto gamma = gamma_field(traj, scn.spec);
    const auto coeffs = effective_coefficients(traj, scn.spec, scn.K, dist, gamma, 1e-8);
    const auto ell = ell_residuals(traj, scn.spec, scn.K, dist, gamma, 1e-8, 1e-3);
    REQUIRE(ell.status == CheckStatus::Pass);

    const Grid& grid = scn.grid;
    const double h = grid.h[0];
    const double dt = traj.snapshot_interval;
    // Local derivative bound for this run: |u_xx| <= 0.1 pi^2 ~ 1.
    const double bound = 10.0 * (h * h + traj.internal_dt) * 1.0 + 1e-12;
    for (int s = 1; s + 1 < traj.num_snapshots(); ++s) {
        for (int node = 1; node < grid.num_nodes() - 1; ++node) {
            REQUIRE(dist.at(s, node).multiplicity == 1);
            const double p0 = dist.value(s, node);
            const double pt = (dist.value(s + 1, node) - dist.value(s - 1, node)) /
                              (2.0 * dt);
            const double g = (dist.value(s, node + 1) - dist.value(s, node - 1)) /
                             (2.0 * h);
            const double H = (dist.value(s, node + 1) - 2.0 * p0 +
                              dist.value(s, node - 1)) /
                             (h * h);
            const double R = pt - coeffs.alpha[s][node][0] * H -
                             coeffs.beta(s, node, 0) * g + coeffs.gamma[s][node] * p0;
            REQUIRE(std::fabs(R) <= bound);
        }
    }
    REQUIRE(ell.min_residual >= -bound);
}
