#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "parmp/geometry.hpp"
#include "parmp/grid.hpp"
#include "parmp/system.hpp"

namespace parmp {

using json = nlohmann::json;

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Tolerances {
    double membership = 1e-8;      // weak-MP containment tolerance
    double compat = 1e-8;          // phi.nu deficit and eigenvector residual
    double eps_touch = -1.0;       // < 0: auto = 1e-6 * diam(K)
    double eps_flat = -1.0;        // < 0: auto = 1e-4 * diam(K)
    double resid_factor = 10.0;    // residual tol = factor * (h^2 + dt) * scale
};

struct ViscosityConfig {
    int radius = 2;    // spatial stencil radius of the touching test
    int trials = 100;  // random touching candidates attempted per node
};

enum class TimeStepper { Euler, RK4 };

struct Scenario {
    std::string name;
    SystemSpec spec;
    ConvexBody K = ConvexBody::ball(Vec::Zero(1), 1.0);
    Grid grid;
    std::vector<ExprPtr> initial;   // k expressions in x
    std::vector<ExprPtr> boundary;  // k expressions in x and t
    double t_end = 1.0;
    double snapshot_interval = 0.1;
    Tolerances tol;
    CompatSampleSpec compat_samples;
    ViscosityConfig viscosity;
    TimeStepper method = TimeStepper::Euler;
    std::uint64_t seed = 42;
    int threads = 1;
    std::uint64_t content_hash = 0;

    double eps_touch() const {
        if (tol.eps_touch >= 0.0) return tol.eps_touch;
        const double diam = K.diameter_estimate();
        return 1e-6 * (std::isfinite(diam) ? diam : 1.0);
    }
    double eps_flat() const {
        if (tol.eps_flat >= 0.0) return tol.eps_flat;
        const double diam = K.diameter_estimate();
        return 1e-4 * (std::isfinite(diam) ? diam : 1.0);
    }
    SpaceTimeDomain domain() const {
        SpaceTimeDomain d;
        d.x_lo = Vec(spec.n);
        d.x_hi = Vec(spec.n);
        for (int ax = 0; ax < spec.n; ++ax) {
            d.x_lo[ax] = grid.lo[ax];
            d.x_hi[ax] = grid.hi[ax];
        }
        d.t_end = t_end;
        return d;
    }
};

namespace scenario_detail {

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (const unsigned char c : s) {
        hash ^= c;
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

[[noreturn]] inline void fail(const std::string& field, const std::string& why) {
    throw ScenarioError(field + ": " + why);
}

inline const json& need(const json& j, const std::string& key) {
    if (!j.contains(key)) fail(key, "missing field");
    return j.at(key);
}

inline double need_number(const json& j, const std::string& key) {
    const json& v = need(j, key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
}

inline int need_int(const json& j, const std::string& key) {
    const json& v = need(j, key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
}

inline Vec number_array(const json& v, const std::string& field) {
    if (!v.is_array()) fail(field, "expected an array of numbers");
    Vec out(static_cast<int>(v.size()));
    for (int i = 0; i < static_cast<int>(v.size()); ++i) {
        if (!v[i].is_number()) fail(field, "expected an array of numbers");
        out[i] = v[i].get<double>();
    }
    return out;
}

inline ExprPtr parse_coeff(const json& v, const std::string& field, ExprDims dims) {
    if (!v.is_string()) fail(field, "expected an expression string");
    try {
        return parse_expression(v.get<std::string>(), dims);
    } catch (const ParseError& pe) {
        fail(field, std::string("parse error: ") + pe.what());
    }
}

inline ConvexBody body_from_json(const json& j, const std::string& field) {
    if (!j.is_object()) fail(field, "expected an object");
    const std::string type = need(j, "type").get<std::string>();
    try {
        if (type == "box") {
            return ConvexBody::box(number_array(need(j, "lo"), field + ".lo"),
                                   number_array(need(j, "hi"), field + ".hi"));
        }
        if (type == "ball") {
            return ConvexBody::ball(number_array(need(j, "center"), field + ".center"),
                                    need_number(j, "radius"));
        }
        if (type == "hpoly") {
            const json& normals = need(j, "normals");
            const json& offsets = need(j, "offsets");
            if (!normals.is_array() || !offsets.is_array() ||
                normals.size() != offsets.size()) {
                fail(field, "normals and offsets must be arrays of equal length");
            }
            std::vector<Halfspace> facets;
            for (std::size_t i = 0; i < normals.size(); ++i) {
                facets.push_back({number_array(normals[i], field + ".normals"),
                                  offsets[i].get<double>()});
            }
            return ConvexBody::polytope(std::move(facets));
        }
        if (type == "intersection") {
            const json& members = need(j, "members");
            if (!members.is_array() || members.empty()) {
                fail(field, "members must be a nonempty array");
            }
            std::vector<ConvexBody> parts;
            for (const auto& m : members) parts.push_back(body_from_json(m, field + ".members"));
            return ConvexBody::intersection(std::move(parts));
        }
    } catch (const std::invalid_argument& ia) {
        fail(field, ia.what());
    }
    fail(field + ".type", "unknown body type '" + type + "'");
}

}  // namespace scenario_detail

inline Scenario scenario_from_json(const json& j, const std::string& source_name) {
    using namespace scenario_detail;
    if (!j.is_object()) fail(source_name, "scenario must be a JSON object");

    Scenario scn;
    scn.name = j.contains("name") ? j.at("name").get<std::string>() : source_name;

    const int n = need_int(j, "n");
    const int k = need_int(j, "k");
    if (n < 1 || n > 2) fail("n", "spatial dimension must be 1 or 2");
    if (k < 1) fail("k", "state dimension must be >= 1");
    scn.spec.n = n;
    scn.spec.k = k;
    const ExprDims coeff_dims{n, k};
    const ExprDims space_dims{n, 0};  // initial/boundary data: no z variables

    // a: n*n matrix of expressions, symmetric as written.
    {
        const json& a = need(j, "a");
        if (!a.is_array() || static_cast<int>(a.size()) != n) fail("a", "expected n rows");
        std::vector<std::string> texts(n * n);
        for (int i = 0; i < n; ++i) {
            if (!a[i].is_array() || static_cast<int>(a[i].size()) != n) {
                fail("a", "expected n columns per row");
            }
            for (int c = 0; c < n; ++c) {
                if (!a[i][c].is_string()) fail("a", "entries must be expression strings");
                texts[i * n + c] = a[i][c].get<std::string>();
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int c = i + 1; c < n; ++c) {
                if (texts[i * n + c] != texts[c * n + i]) {
                    fail("a", "matrix must be symmetric as written: a[" + std::to_string(i) +
                                  "][" + std::to_string(c) + "] != a[" + std::to_string(c) +
                                  "][" + std::to_string(i) + "]");
                }
            }
        }
        scn.spec.a.resize(n * n);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < n; ++c) {
                if (c < i) {
                    scn.spec.a[i * n + c] = scn.spec.a[c * n + i];
                } else {
                    scn.spec.a[i * n + c] =
                        parse_coeff(a[i][c], "a[" + std::to_string(i) + "][" +
                                                 std::to_string(c) + "]",
                                    ExprDims{n, 0});  // a depends on (x, t) only
                }
            }
        }
    }

    // D: k*k matrix.
    {
        const json& D = need(j, "D");
        if (!D.is_array() || static_cast<int>(D.size()) != k) fail("D", "expected k rows");
        for (int i = 0; i < k; ++i) {
            if (!D[i].is_array() || static_cast<int>(D[i].size()) != k) {
                fail("D", "expected k columns per row");
            }
            for (int c = 0; c < k; ++c) {
                scn.spec.D.push_back(parse_coeff(
                    D[i][c], "D[" + std::to_string(i) + "][" + std::to_string(c) + "]",
                    coeff_dims));
            }
        }
    }

    // M: optional list of n k*k matrices; defaults to zeros.
    if (j.contains("M")) {
        const json& M = j.at("M");
        if (!M.is_array() || static_cast<int>(M.size()) != n) {
            fail("M", "expected n matrices");
        }
        for (int axis = 0; axis < n; ++axis) {
            const json& Mi = M[axis];
            if (!Mi.is_array() || static_cast<int>(Mi.size()) != k) {
                fail("M", "each matrix needs k rows");
            }
            auto& out = scn.spec.M.emplace_back();
            for (int i = 0; i < k; ++i) {
                if (!Mi[i].is_array() || static_cast<int>(Mi[i].size()) != k) {
                    fail("M", "each matrix needs k columns per row");
                }
                for (int c = 0; c < k; ++c) {
                    out.push_back(parse_coeff(Mi[i][c],
                                              "M[" + std::to_string(axis) + "]", coeff_dims));
                }
            }
        }
    } else {
        const ExprPtr zero = make_literal(0.0);
        for (int axis = 0; axis < n; ++axis) {
            scn.spec.M.emplace_back(std::vector<ExprPtr>(k * k, zero));
        }
    }

    // phi: k expressions.
    {
        const json& phi = need(j, "phi");
        if (!phi.is_array() || static_cast<int>(phi.size()) != k) {
            fail("phi", "expected " + std::to_string(k) + " expressions");
        }
        for (int i = 0; i < k; ++i) {
            scn.spec.phi.push_back(parse_coeff(phi[i], "phi[" + std::to_string(i) + "]",
                                               coeff_dims));
        }
    }

    // Lipschitz declaration (optional; defaults to zeros).
    if (j.contains("lipschitz")) {
        const json& lip = j.at("lipschitz");
        scn.spec.lipschitz.c = lip.contains("c") ? lip.at("c").get<double>() : 0.0;
        scn.spec.lipschitz.p = lip.contains("p") ? lip.at("p").get<double>() : 0.0;
        if (lip.contains("m")) {
            const Vec m = number_array(lip.at("m"), "lipschitz.m");
            if (m.size() != n) fail("lipschitz.m", "expected n entries");
            scn.spec.lipschitz.m.assign(m.data(), m.data() + n);
        }
    }

    try {
        scn.spec.finalize();
    } catch (const std::invalid_argument& ia) {
        fail("system", ia.what());
    }

    // K.
    scn.K = scenario_detail::body_from_json(need(j, "K"), "K");
    if (scn.K.dim() != k) fail("K", "body dimension must equal k");

    // Grid.
    {
        const json& g = need(j, "grid");
        const Vec lo = number_array(need(g, "lo"), "grid.lo");
        const Vec hi = number_array(need(g, "hi"), "grid.hi");
        const json& pts = need(g, "points");
        if (lo.size() != n || hi.size() != n || static_cast<int>(pts.size()) != n) {
            fail("grid", "lo/hi/points must each have n entries");
        }
        std::array<double, 2> alo{0.0, 0.0}, ahi{1.0, 1.0};
        std::array<int, 2> apts{3, 1};
        for (int ax = 0; ax < n; ++ax) {
            alo[ax] = lo[ax];
            ahi[ax] = hi[ax];
            apts[ax] = pts[ax].get<int>();
        }
        try {
            scn.grid = Grid::make(n, alo, ahi, apts);
        } catch (const std::invalid_argument& ia) {
            fail("grid", ia.what());
        }
    }

    // Initial and boundary data.
    {
        const json& init = need(j, "initial");
        if (!init.is_array() || static_cast<int>(init.size()) != k) {
            fail("initial data", "expected " + std::to_string(k) + " expressions");
        }
        for (int i = 0; i < k; ++i) {
            scn.initial.push_back(parse_coeff(init[i], "initial[" + std::to_string(i) + "]",
                                              space_dims));
        }
        const json& bdry = need(j, "boundary");
        if (!bdry.is_array() || static_cast<int>(bdry.size()) != k) {
            fail("boundary data", "expected " + std::to_string(k) + " expressions");
        }
        for (int i = 0; i < k; ++i) {
            scn.boundary.push_back(parse_coeff(bdry[i], "boundary[" + std::to_string(i) + "]",
                                               space_dims));
        }
    }

    scn.t_end = need_number(j, "t_end");
    if (!(scn.t_end > 0.0)) fail("t_end", "must be positive");
    scn.snapshot_interval = need_number(j, "snapshot_interval");
    if (!(scn.snapshot_interval > 0.0)) fail("snapshot_interval", "must be positive");
    const double ratio = scn.t_end / scn.snapshot_interval;
    if (std::fabs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
        fail("snapshot_interval", "must divide t_end");
    }

    if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        if (t.contains("membership")) scn.tol.membership = t.at("membership").get<double>();
        if (t.contains("compat")) scn.tol.compat = t.at("compat").get<double>();
        if (t.contains("eps_touch")) scn.tol.eps_touch = t.at("eps_touch").get<double>();
        if (t.contains("eps_flat")) scn.tol.eps_flat = t.at("eps_flat").get<double>();
        if (t.contains("resid_factor")) scn.tol.resid_factor = t.at("resid_factor").get<double>();
    }
    if (j.contains("compat_samples")) {
        const json& c = j.at("compat_samples");
        if (c.contains("spacetime")) scn.compat_samples.spacetime_points = c.at("spacetime").get<int>();
        if (c.contains("boundary")) scn.compat_samples.boundary_points = c.at("boundary").get<int>();
        if (c.contains("inward")) scn.compat_samples.inward_per_point = c.at("inward").get<int>();
    }
    if (j.contains("viscosity")) {
        const json& v = j.at("viscosity");
        if (v.contains("radius")) scn.viscosity.radius = v.at("radius").get<int>();
        if (v.contains("trials")) scn.viscosity.trials = v.at("trials").get<int>();
    }
    if (j.contains("method")) {
        const std::string m = j.at("method").get<std::string>();
        if (m == "euler") scn.method = TimeStepper::Euler;
        else if (m == "rk4") scn.method = TimeStepper::RK4;
        else fail("method", "expected 'euler' or 'rk4'");
    }
    if (j.contains("seed")) scn.seed = j.at("seed").get<std::uint64_t>();
    scn.compat_samples.seed = scn.seed;

    scn.content_hash = scenario_detail::fnv1a64(j.dump());
    return scn;
}

// ---------------------------------------------------------------------------
// Built-in scenario library

namespace scenario_detail {

inline const std::map<std::string, const char*>& builtin_sources() {
    static const std::map<std::string, const char*> lib = {
        {"heat-interval", R"json({
  "name": "heat-interval",
  "n": 1, "k": 1,
  "grid": {"lo": [0.0], "hi": [1.0], "points": [101]},
  "a": [["1"]],
  "D": [["1"]],
  "M": [[["0"]]],
  "phi": ["0"],
  "lipschitz": {"c": 0.0, "m": [0.0], "p": 0.0},
  "K": {"type": "box", "lo": [0.0], "hi": [1.0]},
  "initial": ["0.5 + 0.4*sin(3.141592653589793*x1)"],
  "boundary": ["0.5"],
  "t_end": 0.1,
  "snapshot_interval": 0.0025,
  "seed": 42
})json"},
        {"ball-sink", R"json({
  "name": "ball-sink",
  "n": 1, "k": 2,
  "grid": {"lo": [0.0], "hi": [1.0], "points": [101]},
  "a": [["1"]],
  "D": [["1", "0"], ["0", "1"]],
  "M": [[["0", "0"], ["0", "0"]]],
  "phi": ["-z1", "-z2"],
  "lipschitz": {"c": 0.0, "m": [0.0], "p": 1.0},
  "K": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
  "initial": ["0.5*sin(3.141592653589793*x1)", "0.5*cos(3.141592653589793*x1)"],
  "boundary": ["0.5*sin(3.141592653589793*x1)", "0.5*cos(3.141592653589793*x1)"],
  "t_end": 0.05,
  "snapshot_interval": 0.0025,
  "seed": 42
})json"},
        {"simplex-face", R"json({
  "name": "simplex-face",
  "n": 1, "k": 2,
  "grid": {"lo": [0.0], "hi": [1.0], "points": [101]},
  "a": [["1"]],
  "D": [["1", "0"], ["0", "1"]],
  "M": [[["0", "0"], ["0", "0"]]],
  "phi": ["0", "0"],
  "lipschitz": {"c": 0.0, "m": [0.0], "p": 0.0},
  "K": {"type": "hpoly",
        "normals": [[1.0, 0.0], [0.0, 1.0], [-0.7071067811865476, -0.7071067811865476]],
        "offsets": [0.0, 0.0, -0.7071067811865476]},
  "initial": ["0.25 + 0.2*sin(3.141592653589793*x1)", "0"],
  "boundary": ["0.25", "0"],
  "t_end": 0.05,
  "snapshot_interval": 0.0025,
  "tolerances": {"eps_touch": 1e-8, "eps_flat": 1e-8},
  "seed": 42
})json"},
        {"anisotropic-2d", R"json({
  "name": "anisotropic-2d",
  "n": 2, "k": 1,
  "grid": {"lo": [0.0, 0.0], "hi": [1.0, 1.0], "points": [41, 41]},
  "a": [["1", "0.25*sin(3.141592653589793*x1)*sin(3.141592653589793*x2)"],
        ["0.25*sin(3.141592653589793*x1)*sin(3.141592653589793*x2)", "1"]],
  "D": [["1"]],
  "M": [[["0"]], [["0"]]],
  "phi": ["0"],
  "lipschitz": {"c": 0.0, "m": [0.0, 0.0], "p": 0.0},
  "K": {"type": "box", "lo": [0.0], "hi": [1.0]},
  "initial": ["0.5 + 0.25*sin(3.141592653589793*x1)*sin(3.141592653589793*x2)"],
  "boundary": ["0.5"],
  "t_end": 0.02,
  "snapshot_interval": 0.001,
  "seed": 42
})json"},
        {"incompatible-sink", R"json({
  "name": "incompatible-sink",
  "n": 1, "k": 1,
  "grid": {"lo": [0.0], "hi": [1.0], "points": [101]},
  "a": [["1"]],
  "D": [["1"]],
  "M": [[["0"]]],
  "phi": ["-1"],
  "lipschitz": {"c": 0.0, "m": [0.0], "p": 0.0},
  "K": {"type": "box", "lo": [0.0], "hi": [1.0]},
  "initial": ["0"],
  "boundary": ["0"],
  "t_end": 0.1,
  "snapshot_interval": 0.0025,
  "seed": 42
})json"},
        {"coupled-box", R"json({
  "name": "coupled-box",
  "n": 1, "k": 2,
  "grid": {"lo": [0.0], "hi": [1.0], "points": [101]},
  "a": [["1"]],
  "D": [["1", "0.5"], ["0.5", "1"]],
  "M": [[["0", "0"], ["0", "0"]]],
  "phi": ["0", "0"],
  "lipschitz": {"c": 0.0, "m": [0.0], "p": 0.0},
  "K": {"type": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]},
  "initial": ["0.4 + 0.2*sin(3.141592653589793*x1)", "0.5"],
  "boundary": ["0.4 + 0.2*sin(3.141592653589793*x1)", "0.5"],
  "t_end": 0.02,
  "snapshot_interval": 0.002,
  "seed": 42
})json"},
    };
    return lib;
}

}  // namespace scenario_detail

inline std::vector<std::string> builtin_scenario_names() {
    std::vector<std::string> names;
    for (const auto& [name, src] : scenario_detail::builtin_sources()) {
        names.push_back(name);
    }
    return names;
}

// Loads a scenario by built-in name or from a JSON file.
inline Scenario load_scenario(const std::string& name_or_path) {
    const auto& lib = scenario_detail::builtin_sources();
    if (const auto it = lib.find(name_or_path); it != lib.end()) {
        return scenario_from_json(json::parse(it->second), name_or_path);
    }
    if (std::filesystem::exists(name_or_path)) {
        std::ifstream in(name_or_path);
        if (!in) throw ScenarioError(name_or_path + ": cannot open file");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& pe) {
            throw ScenarioError(name_or_path + ": " + pe.what());
        }
        return scenario_from_json(j, std::filesystem::path(name_or_path).stem().string());
    }
    std::ostringstream os;
    os << "unknown scenario '" << name_or_path << "'; built-ins:";
    for (const auto& n : builtin_scenario_names()) os << " " << n;
    throw ScenarioError(os.str());
}

// Regrids to a requested spacing (points = round(extent/h) + 1 per axis).
inline void override_grid_spacing(Scenario& scn, double h) {
    if (!(h > 0.0)) throw ScenarioError("h: must be positive");
    std::array<int, 2> pts = scn.grid.npts;
    for (int ax = 0; ax < scn.grid.n; ++ax) {
        pts[ax] = static_cast<int>(std::round((scn.grid.hi[ax] - scn.grid.lo[ax]) / h)) + 1;
    }
    scn.grid = Grid::make(scn.grid.n, scn.grid.lo, scn.grid.hi, pts);
}

}  // namespace parmp
