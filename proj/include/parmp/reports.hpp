#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "parmp/mp_harness.hpp"
#include "parmp/system.hpp"
#include "parmp/viscosity.hpp"

namespace parmp {

using ordered_json = nlohmann::ordered_json;

namespace report_detail {

inline std::string double_17(double v) {
    if (!std::isfinite(v)) return "null";  // JSON has no infinities
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Serializer with a fixed float policy: every double prints with 17
// significant digits, field order is insertion order.
inline void dump(const ordered_json& j, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
    const std::string pad_in(static_cast<std::size_t>(indent) * (depth + 1), ' ');
    switch (j.type()) {
        case nlohmann::detail::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                out += ordered_json(it.key()).dump();
                out += ": ";
                dump(it.value(), out, indent, depth + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case nlohmann::detail::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                dump(v, out, indent, depth + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case nlohmann::detail::value_t::number_float:
            out += double_17(j.get<double>());
            return;
        default:
            out += j.dump();
            return;
    }
}

inline ordered_json loc_json(const NodeLoc& loc, int n) {
    ordered_json j;
    j["snapshot"] = loc.snapshot;
    j["node"] = loc.node;
    j["t"] = loc.t;
    ordered_json x = ordered_json::array();
    for (int i = 0; i < n; ++i) x.push_back(loc.x[i]);
    j["x"] = x;
    return j;
}

inline ordered_json vec_json(const Vec& v) {
    ordered_json j = ordered_json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

}  // namespace report_detail

inline std::string dump_json(const ordered_json& j, int indent = 2) {
    std::string out;
    report_detail::dump(j, out, indent, 0);
    out += "\n";
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

// One summary row per executed check, for the csv-summary format.
struct SummaryRow {
    std::string check;
    std::string status;
    double worst = 0.0;
    std::string detail;
};

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out = "check,status,worst,detail\n";
    for (const auto& r : rows) {
        out += r.check + "," + r.status + "," + report_detail::double_17(r.worst) +
               ",\"" + r.detail + "\"\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report -> JSON builders

inline ordered_json to_json(const CompatibilityReport& rep, int n) {
    ordered_json j;
    j["check"] = "compatibility";
    j["pass"] = rep.pass;
    j["tol"] = rep.tol;
    j["min_phi_dot_nu"] = rep.min_phi_dot_nu;
    {
        ordered_json w;
        w["x"] = report_detail::vec_json(rep.worst_phi.x);
        w["t"] = rep.worst_phi.t;
        w["v"] = report_detail::vec_json(rep.worst_phi.v);
        w["nu"] = report_detail::vec_json(rep.worst_phi.nu);
        j["worst_phi_location"] = w;
    }
    j["max_D_residual"] = rep.max_D_residual;
    {
        ordered_json w;
        w["x"] = report_detail::vec_json(rep.worst_D.x);
        w["t"] = rep.worst_D.t;
        w["v"] = report_detail::vec_json(rep.worst_D.v);
        w["nu"] = report_detail::vec_json(rep.worst_D.nu);
        j["worst_D_location"] = w;
    }
    ordered_json lam = ordered_json::array();
    for (int axis = 0; axis < n; ++axis) lam.push_back(rep.max_M_residual[axis]);
    j["max_M_residual"] = lam;
    j["min_floor_D"] = rep.min_floor_D;
    j["min_floor_a"] = rep.min_floor_a;
    j["spacetime_samples"] = rep.spacetime_samples;
    j["boundary_samples"] = rep.boundary_samples;
    j["inward_samples"] = rep.inward_samples;
    j["checks"] = rep.checks;
    return j;
}

inline ordered_json to_json(const WeakMPReport& rep, int n) {
    ordered_json j;
    j["check"] = "weak_mp";
    j["status"] = to_string(rep.status);
    j["pass"] = rep.status == CheckStatus::Pass;
    j["tol"] = rep.tol;
    j["worst_signed_distance"] = rep.worst_signed_distance;
    j["worst_location"] = report_detail::loc_json(rep.worst, n);
    j["premise_worst"] = rep.premise_worst;
    j["premise_location"] = report_detail::loc_json(rep.premise_loc, n);
    j["nodes_checked"] = rep.nodes_checked;
    return j;
}

inline ordered_json to_json(const StrongMPReport& rep, int n) {
    ordered_json j;
    j["check"] = "strong_mp";
    j["status"] = to_string(rep.status);
    j["pass"] = rep.status == CheckStatus::Pass;
    j["eps_touch"] = rep.eps_touch;
    j["eps_flat"] = rep.eps_flat;
    j["touched"] = rep.touched;
    if (rep.touched) {
        j["touch_location"] = report_detail::loc_json(rep.touch, n);
        j["touch_value"] = rep.touch_value;
        j["worst_flat"] = rep.worst_flat;
        j["worst_flat_location"] = report_detail::loc_json(rep.worst_flat_loc, n);
    } else {
        j["margin"] = rep.margin;
        j["margin_location"] = report_detail::loc_json(rep.margin_loc, n);
    }
    return j;
}

inline ordered_json to_json(const EllReport& rep, int n) {
    ordered_json j;
    j["check"] = "ell_residuals";
    j["status"] = to_string(rep.status);
    j["pass"] = rep.status == CheckStatus::Pass;
    j["tol"] = rep.tol;
    j["min_residual"] = rep.min_residual;
    j["worst_location"] = report_detail::loc_json(rep.worst, n);
    j["nodes_checked"] = rep.nodes_checked;
    j["nodes_skipped"] = rep.nodes_skipped;
    return j;
}

inline ordered_json to_json(const SupersolutionReport& rep, int n) {
    ordered_json j;
    j["check"] = "supersolution";
    j["status"] = to_string(rep.status);
    // "pass" means no violation found by sampling; it is not a certificate.
    j["pass"] = rep.status == CheckStatus::Pass;
    j["tol"] = rep.tol;
    j["worst_R"] = rep.worst_R;
    j["worst_location"] = report_detail::loc_json(rep.worst, n);
    {
        ordered_json q;
        q["p0"] = rep.worst_candidate.p0;
        q["pt"] = rep.worst_candidate.pt;
        ordered_json g = ordered_json::array();
        for (int i = 0; i < n; ++i) g.push_back(rep.worst_candidate.g[i]);
        q["g"] = g;
        ordered_json H = ordered_json::array();
        for (int i = 0; i < n * n; ++i) H.push_back(rep.worst_candidate.H[i]);
        q["H"] = H;
        q["radius"] = rep.worst_candidate.radius;
        j["worst_candidate"] = q;
    }
    j["nodes_checked"] = rep.nodes_checked;
    j["nodes_empty"] = rep.nodes_empty;
    j["candidates_attempted"] = rep.candidates_attempted;
    j["candidates_accepted"] = rep.candidates_accepted;
    return j;
}

inline ordered_json coefficient_summary_json(const CoefficientFields& coeffs) {
    ordered_json j;
    j["min_mu"] = coeffs.min_mu;
    j["max_abs_lambda"] = coeffs.max_abs_lambda;
    j["min_alpha_floor"] = coeffs.min_alpha_floor;
    j["worst_alpha_floor_margin"] = coeffs.worst_alpha_floor_margin;
    return j;
}

}  // namespace parmp
