#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "parmp/log.hpp"
#include "parmp/reports.hpp"
#include "parmp/scenario.hpp"
#include "parmp/solver.hpp"
#include "parmp/viscosity.hpp"

namespace parmp {

struct PipelineOptions {
    enum class Format { Json, CsvSummary };

    std::string command;  // simulate | check-compat | verify-mp | verify-viscosity | all
    Scenario scenario;
    std::filesystem::path out_dir;
    Format format = Format::Json;
    bool dump_fields = false;
};

namespace pipeline_detail {

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void note(const char* fmt, ...) {
    // Check summaries always go to standard error.
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
    va_end(args);
}

inline std::string field_csv(const Trajectory& traj,
                             const std::vector<std::vector<double>>& field) {
    const Grid& grid = traj.grid;
    std::string out = grid.n == 2 ? "snapshot,t,x1,x2,value\n" : "snapshot,t,x1,value\n";
    char buf[128];
    double x[2];
    for (int s = 0; s < static_cast<int>(field.size()); ++s) {
        for (int node = 0; node < grid.num_nodes(); ++node) {
            grid.position(node, x);
            if (grid.n == 2) {
                std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", s,
                              traj.time(s), x[0], x[1], field[s][node]);
            } else {
                std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", s,
                              traj.time(s), x[0], field[s][node]);
            }
            out += buf;
        }
    }
    return out;
}

}  // namespace pipeline_detail

// Executes one CLI command against a loaded scenario. Returns 0 when every
// executed check passes, 2 when a check fails. Hard errors (IO, instability,
// coefficient extraction on an incompatible contact set) propagate as
// exceptions for the caller to map to exit code 1.
inline int run_command(const PipelineOptions& opt) {
    namespace fs = std::filesystem;
    const Scenario& scn = opt.scenario;
    const bool do_all = opt.command == "all";
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec || !fs::is_directory(opt.out_dir)) {
        throw std::runtime_error("cannot create output directory " +
                                 opt.out_dir.string());
    }
    // Probe writability up front so IO problems surface as usage errors.
    {
        const fs::path probe = opt.out_dir / ".parmp-write-probe";
        std::ofstream test(probe);
        if (!test) {
            throw std::runtime_error("output directory is not writable: " +
                                     opt.out_dir.string());
        }
        test.close();
        fs::remove(probe, ec);
    }

    std::vector<SummaryRow> rows;
    bool any_fail = false;
    std::optional<Trajectory> traj;
    std::optional<DistanceField> dist;

    auto ensure_trajectory = [&]() -> const Trajectory& {
        if (!traj) {
            log_info("integrating scenario %s", scn.name.c_str());
            traj = run_scenario(scn);
        }
        return *traj;
    };
    auto ensure_distance = [&]() -> const DistanceField& {
        if (!dist) dist = distance_field(ensure_trajectory(), scn.K, scn.threads);
        return *dist;
    };
    auto emit = [&](const std::string& name, const ordered_json& j) {
        if (opt.format == PipelineOptions::Format::Json) {
            write_file(opt.out_dir / (name + ".json"), dump_json(j));
        }
    };

    const bool want_simulate = do_all || opt.command == "simulate";
    const bool want_compat = do_all || opt.command == "check-compat";
    const bool want_mp = do_all || opt.command == "verify-mp";
    const bool want_visc = do_all || opt.command == "verify-viscosity";
    if (!want_simulate && !want_compat && !want_mp && !want_visc) {
        throw std::runtime_error("unknown command '" + opt.command + "'");
    }

    if (want_simulate) {
        const Trajectory& t = ensure_trajectory();
        // Per-snapshot CSV dumps.
        const Grid& grid = t.grid;
        for (int s = 0; s < t.num_snapshots(); ++s) {
            std::string csv;
            csv.reserve(static_cast<std::size_t>(grid.num_nodes()) * 32);
            csv += grid.n == 2 ? "x1,x2" : "x1";
            for (int q = 1; q <= t.k; ++q) csv += ",u" + std::to_string(q);
            csv += "\n";
            char buf[64];
            double x[2];
            for (int node = 0; node < grid.num_nodes(); ++node) {
                grid.position(node, x);
                std::snprintf(buf, sizeof(buf), "%.17g", x[0]);
                csv += buf;
                if (grid.n == 2) {
                    std::snprintf(buf, sizeof(buf), ",%.17g", x[1]);
                    csv += buf;
                }
                for (int q = 0; q < t.k; ++q) {
                    std::snprintf(buf, sizeof(buf), ",%.17g", t.snaps[s].node(node)[q]);
                    csv += buf;
                }
                csv += "\n";
            }
            char name[48];
            std::snprintf(name, sizeof(name), "snapshot_%04d.csv", s);
            write_file(opt.out_dir / name, csv);
        }
        ordered_json manifest;
        manifest["scenario"] = scn.name;
        manifest["n"] = scn.spec.n;
        manifest["k"] = scn.spec.k;
        {
            ordered_json g;
            ordered_json lo = ordered_json::array(), hi = ordered_json::array(),
                         pts = ordered_json::array(), h = ordered_json::array();
            for (int ax = 0; ax < grid.n; ++ax) {
                lo.push_back(grid.lo[ax]);
                hi.push_back(grid.hi[ax]);
                pts.push_back(grid.npts[ax]);
                h.push_back(grid.h[ax]);
            }
            g["lo"] = lo;
            g["hi"] = hi;
            g["points"] = pts;
            g["h"] = h;
            manifest["grid"] = g;
        }
        manifest["t_end"] = scn.t_end;
        manifest["snapshot_interval"] = t.snapshot_interval;
        manifest["internal_dt"] = t.internal_dt;
        manifest["method"] = scn.method == TimeStepper::Euler ? "euler" : "rk4";
        manifest["seed"] = scn.seed;
        ordered_json times = ordered_json::array();
        for (int s = 0; s < t.num_snapshots(); ++s) times.push_back(t.time(s));
        manifest["times"] = times;
        manifest["spec_hash"] = pipeline_detail::hex64(scn.content_hash);
        write_file(opt.out_dir / "manifest.json", dump_json(manifest));
        pipeline_detail::note("simulate: %d snapshots, internal dt %.3g",
                              t.num_snapshots(), t.internal_dt);
    }

    bool compat_passed = true;
    if (want_compat) {
        const auto rep = check_compatibility(scn.spec, scn.K, scn.domain(),
                                             scn.compat_samples, scn.tol.compat);
        compat_passed = rep.pass;
        any_fail = any_fail || !rep.pass;
        emit("compatibility", to_json(rep, scn.spec.n));
        rows.push_back({"compatibility", rep.pass ? "pass" : "fail",
                        std::min(rep.min_phi_dot_nu, -rep.max_D_residual),
                        "min phi.nu " + std::to_string(rep.min_phi_dot_nu) +
                            ", max D residual " + std::to_string(rep.max_D_residual)});
        pipeline_detail::note("check-compat: %s (min phi.nu %.3g, max D residual %.3g)",
                              rep.pass ? "pass" : "FAIL", rep.min_phi_dot_nu,
                              rep.max_D_residual);
    }

    bool weak_passed = true;
    if (want_mp) {
        const Trajectory& t = ensure_trajectory();
        const DistanceField& d = ensure_distance();
        const auto weak = weak_mp_check(t, scn.K, scn.tol.membership, &d, scn.threads);
        weak_passed = weak.status == CheckStatus::Pass;
        any_fail = any_fail || weak.status == CheckStatus::Fail;
        emit("weak_mp", to_json(weak, scn.spec.n));
        rows.push_back({"weak_mp", to_string(weak.status), weak.worst_signed_distance,
                        "worst signed distance"});
        pipeline_detail::note("verify-mp: weak %s (worst signed distance %.3g)",
                              to_string(weak.status), weak.worst_signed_distance);
        if (weak.status == CheckStatus::Pass) {
            const auto strong =
                strong_mp_check(t, scn.K, scn.eps_touch(), scn.eps_flat(), &d, scn.threads);
            any_fail = any_fail || strong.status == CheckStatus::Fail;
            emit("strong_mp", to_json(strong, scn.spec.n));
            rows.push_back({"strong_mp", to_string(strong.status),
                            strong.touched ? strong.worst_flat : strong.margin,
                            strong.touched ? "worst flat value" : "never touches, margin"});
            pipeline_detail::note(
                strong.touched
                    ? "verify-mp: strong %s (touched at t=%.4g, worst flat %.3g)"
                    : "verify-mp: strong %s (never touches, margin %.3g)",
                to_string(strong.status),
                strong.touched ? strong.touch.t : strong.margin,
                strong.touched ? strong.worst_flat : strong.margin);
        } else {
            StrongMPReport strong;
            strong.status = CheckStatus::Skipped;
            emit("strong_mp", to_json(strong, scn.spec.n));
            rows.push_back({"strong_mp", "skipped", 0.0, "weak MP did not pass"});
            pipeline_detail::note("verify-mp: strong skipped (weak MP did not pass)");
        }
    }

    if (want_visc) {
        if (do_all && !compat_passed) {
            ordered_json j;
            j["check"] = "viscosity";
            j["status"] = "skipped";
            j["pass"] = false;
            j["reason"] = "compatibility check failed";
            emit("viscosity", j);
            rows.push_back({"ell_residuals", "skipped", 0.0, "compatibility failed"});
            rows.push_back({"supersolution", "skipped", 0.0, "compatibility failed"});
            pipeline_detail::note("verify-viscosity: skipped (compatibility failed)");
        } else {
            const Trajectory& t = ensure_trajectory();
            const DistanceField& d = ensure_distance();
            auto gamma = gamma_field(t, scn.spec, scn.threads);

            // Advisory check of the declared Lipschitz constants over the
            // hull of trajectory values.
            {
                Vec z_lo = Vec::Constant(scn.spec.k, std::numeric_limits<double>::infinity());
                Vec z_hi = Vec::Constant(scn.spec.k, -std::numeric_limits<double>::infinity());
                for (const auto& f : t.snaps) {
                    for (int node = 0; node < t.grid.num_nodes(); ++node) {
                        for (int q = 0; q < t.k; ++q) {
                            z_lo[q] = std::min(z_lo[q], f.node(node)[q]);
                            z_hi[q] = std::max(z_hi[q], f.node(node)[q]);
                        }
                    }
                }
                for (int q = 0; q < t.k; ++q) {
                    if (!(z_hi[q] > z_lo[q])) z_hi[q] = z_lo[q] + 1e-6;
                }
                estimate_lipschitz(scn.spec, scn.domain(), z_lo, z_hi, 2000, scn.seed);
            }

            const auto coeffs = effective_coefficients(t, scn.spec, scn.K, d, gamma,
                                                       scn.tol.compat, scn.threads);
            const double h = t.grid.max_h();
            const double scale = second_difference_scale(t);
            const double tol_resid =
                scn.tol.resid_factor * (h * h + t.internal_dt) * std::max(scale, 1e-12);

            std::vector<std::vector<double>> resid_field;
            const auto ell = ell_residuals(t, scn.spec, scn.K, d, gamma, scn.tol.compat,
                                           tol_resid, scn.threads,
                                           opt.dump_fields ? &resid_field : nullptr);
            any_fail = any_fail || ell.status == CheckStatus::Fail;
            const auto super =
                supersolution_check(d, coeffs, t.grid, t.snapshot_interval,
                                    scn.viscosity.radius, scn.viscosity.trials,
                                    tol_resid, scn.seed, scn.threads);
            any_fail = any_fail || super.status == CheckStatus::Fail;

            ordered_json j;
            j["check"] = "viscosity";
            j["pass"] = ell.status != CheckStatus::Fail &&
                        super.status != CheckStatus::Fail;
            j["tol"] = tol_resid;
            j["scale"] = scale;
            j["ell_residuals"] = to_json(ell, scn.spec.n);
            j["supersolution"] = to_json(super, scn.spec.n);
            j["coefficients"] = coefficient_summary_json(coeffs);
            emit("viscosity", j);
            rows.push_back({"ell_residuals", to_string(ell.status), ell.min_residual,
                            "min residual, tol " + std::to_string(tol_resid)});
            rows.push_back({"supersolution", to_string(super.status), super.worst_R,
                            "worst R over touching candidates"});
            pipeline_detail::note(
                "verify-viscosity: ell %s (min residual %.3g), supersolution %s "
                "(worst R %.3g, %ld candidates, %ld/%ld nodes without one)",
                to_string(ell.status), ell.min_residual, to_string(super.status),
                super.worst_R, super.candidates_accepted, super.nodes_empty,
                super.nodes_checked);

            if (opt.dump_fields) {
                write_file(opt.out_dir / "dbar.csv",
                           pipeline_detail::field_csv(t, d.dbar));
                write_file(opt.out_dir / "gamma.csv",
                           pipeline_detail::field_csv(t, coeffs.gamma));
                write_file(opt.out_dir / "mu.csv",
                           pipeline_detail::field_csv(t, coeffs.mu));
                for (int axis = 0; axis < scn.spec.n; ++axis) {
                    std::vector<std::vector<double>> lam(
                        coeffs.snapshots, std::vector<double>(coeffs.nodes, 0.0));
                    for (int s = 0; s < coeffs.snapshots; ++s) {
                        for (int node = 0; node < coeffs.nodes; ++node) {
                            lam[s][node] = coeffs.lambda[s][node][axis];
                        }
                    }
                    write_file(opt.out_dir /
                                   ("lambda" + std::to_string(axis + 1) + ".csv"),
                               pipeline_detail::field_csv(t, lam));
                }
                write_file(opt.out_dir / "ell_residual.csv",
                           pipeline_detail::field_csv(t, resid_field));
            }
        }
    }

    if (opt.format == PipelineOptions::Format::CsvSummary && !rows.empty()) {
        write_file(opt.out_dir / "summary.csv", summary_csv(rows));
    }
    return any_fail ? 2 : 0;
}

}  // namespace parmp
