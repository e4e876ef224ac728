#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace parmp {

// Rectangular grid on [lo, hi]^n, n in {1, 2}. Node order is lexicographic
// in (i1, i2): node = i1 * npts[1] + i2 for n = 2, node = i1 for n = 1.
// Boundary nodes are exactly those with an extreme index on some axis.
struct Grid {
    int n = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{1.0, 1.0};
    std::array<int, 2> npts{3, 1};
    std::array<double, 2> h{0.5, 0.0};

    static Grid make(int n, const std::array<double, 2>& lo,
                     const std::array<double, 2>& hi, const std::array<int, 2>& npts) {
        if (n < 1 || n > 2) throw std::invalid_argument("Grid: n must be 1 or 2");
        Grid g;
        g.n = n;
        g.lo = lo;
        g.hi = hi;
        g.npts = npts;
        for (int ax = 0; ax < n; ++ax) {
            if (npts[ax] < 3) throw std::invalid_argument("Grid: need >= 3 points per axis");
            if (!(hi[ax] > lo[ax])) throw std::invalid_argument("Grid: hi must exceed lo");
            g.h[ax] = (hi[ax] - lo[ax]) / (npts[ax] - 1);
        }
        if (n == 1) {
            g.npts[1] = 1;
            g.h[1] = 0.0;
        }
        return g;
    }

    int num_nodes() const { return npts[0] * (n == 2 ? npts[1] : 1); }

    int node_index(int i1, int i2 = 0) const {
        return n == 2 ? i1 * npts[1] + i2 : i1;
    }

    void node_coords(int node, int& i1, int& i2) const {
        if (n == 2) {
            i1 = node / npts[1];
            i2 = node % npts[1];
        } else {
            i1 = node;
            i2 = 0;
        }
    }

    bool is_boundary(int node) const {
        int i1, i2;
        node_coords(node, i1, i2);
        if (i1 == 0 || i1 == npts[0] - 1) return true;
        if (n == 2 && (i2 == 0 || i2 == npts[1] - 1)) return true;
        return false;
    }

    // Interior at stencil depth 1 (standard central differences).
    bool is_interior(int node) const { return !is_boundary(node); }

    void position(int node, double* x) const {
        int i1, i2;
        node_coords(node, i1, i2);
        x[0] = lo[0] + i1 * h[0];
        if (n == 2) x[1] = lo[1] + i2 * h[1];
    }

    double min_h() const { return n == 2 ? std::min(h[0], h[1]) : h[0]; }
    double max_h() const { return n == 2 ? std::max(h[0], h[1]) : h[0]; }
};

// State values on a grid at one instant; k doubles per node, node-major.
struct Field {
    double t = 0.0;
    int k = 1;
    std::vector<double> data;

    Field() = default;
    Field(const Grid& grid, int k_, double t_ = 0.0)
        : t(t_), k(k_), data(static_cast<std::size_t>(grid.num_nodes()) * k_, 0.0) {}

    double* node(int idx) { return data.data() + static_cast<std::size_t>(idx) * k; }
    const double* node(int idx) const {
        return data.data() + static_cast<std::size_t>(idx) * k;
    }

    Eigen::Map<const Eigen::VectorXd> values(int idx) const {
        return Eigen::Map<const Eigen::VectorXd>(node(idx), k);
    }
};

// Snapshots of the evolving field at uniform cadence, t0 = 0 first.
struct Trajectory {
    Grid grid;
    int k = 1;
    double snapshot_interval = 0.0;
    double internal_dt = 0.0;  // largest internal step actually taken
    std::vector<Field> snaps;

    int num_snapshots() const { return static_cast<int>(snaps.size()); }
    double time(int s) const { return snaps[s].t; }
};

}  // namespace parmp
