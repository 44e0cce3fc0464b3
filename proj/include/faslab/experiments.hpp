#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "faslab/io.hpp"
#include "faslab/rigidity.hpp"

namespace faslab {

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> violations;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, std::string>> derived;

    std::string to_text() const {
        std::ostringstream os;
        if (ok)
            os << "OK\n";
        else
            os << "INVALID\n";
        for (const auto& v : violations) os << "violation: " << v << "\n";
        for (const auto& w : warnings) os << "warning: " << w << "\n";
        if (!derived.empty()) {
            os << "derived quantities:\n";
            for (const auto& [k, v] : derived) os << "  " << k << " = " << v << "\n";
        }
        return os.str();
    }
};

namespace detail {

inline double require_number(const nlohmann::json& params, const std::string& key,
                             std::vector<std::string>& violations) {
    if (!params.contains(key)) {
        violations.push_back("params." + key + " is required (no default)");
        return 0;
    }
    if (!params.at(key).is_number()) {
        violations.push_back("params." + key + " must be a number");
        return 0;
    }
    return params.at(key).get<double>();
}

inline const std::vector<std::string>& pipeline_names() {
    static const std::vector<std::string> names = {
        "forward", "geodesics", "arrival", "rho-rigidity", "metric-rigidity",
        "diffeo-checklist"};
    return names;
}

} // namespace detail

template <int N>
struct ParsedExperiment {
    std::string name;
    std::string pipeline;
    Medium<N> medium;
    Vec<N> omega = Vec<N>::axis(0);
    RigidityRunParams<N> params;
    double box_half_width = 0;
    int snapshot_stride = 0;
    int energy_stride = 5;
    int jobs = 1;
    std::string out_dir;
};

template <int N>
inline ParsedExperiment<N> parse_experiment(const nlohmann::json& cfg) {
    ParsedExperiment<N> exp;
    exp.name = cfg.at("name").get<std::string>();
    exp.pipeline = cfg.at("pipeline").get<std::string>();
    bool known = false;
    for (const auto& p : detail::pipeline_names()) known |= p == exp.pipeline;
    if (!known) throw Error("pipeline must be one of forward|geodesics|arrival|"
                            "rho-rigidity|metric-rigidity|diffeo-checklist");
    if (cfg.contains("deterministic") && !cfg.at("deterministic").get<bool>())
        throw Error("deterministic=false is not supported; runs are always seedless "
                    "and deterministic");
    exp.medium = medium_from_json<N>(cfg.at("medium"));
    if (cfg.contains("omega")) exp.omega = normalized(vec_from_json<N>(cfg.at("omega")));
    if (!cfg.contains("params")) throw Error("params block is required");
    const auto& pj = cfg.at("params");
    for (const char* key : {"h", "dt", "T"})
        if (!pj.contains(key))
            throw Error(std::string("params.") + key + " is required (no default)");
    exp.params.h = pj.at("h").get<double>();
    exp.params.dt = pj.at("dt").get<double>();
    exp.params.T = pj.at("T").get<double>();
    if (pj.contains("epsilon")) exp.params.eps = pj.at("epsilon").get<double>();
    if (pj.contains("fan_spacing")) exp.params.fan_spacing = pj.at("fan_spacing").get<double>();
    if (pj.contains("grid_half_width"))
        exp.params.grid_half_width = pj.at("grid_half_width").get<double>();
    if (pj.contains("boundary_samples"))
        exp.params.boundary_samples = pj.at("boundary_samples").get<int>();
    if (pj.contains("cg_tol")) exp.params.cg_tol = pj.at("cg_tol").get<double>();
    if (pj.contains("sweep_tol")) exp.params.sweep_tol = pj.at("sweep_tol").get<double>();
    if (pj.contains("noise_floor")) exp.params.with_noise_floor = pj.at("noise_floor").get<bool>();
    if (pj.contains("box_half_width")) exp.box_half_width = pj.at("box_half_width").get<double>();
    if (pj.contains("snapshot_stride")) exp.snapshot_stride = pj.at("snapshot_stride").get<int>();
    if (pj.contains("energy_stride")) exp.energy_stride = pj.at("energy_stride").get<int>();
    if (cfg.contains("out")) exp.out_dir = cfg.at("out").get<std::string>();
    if (pj.contains("tolerances")) {
        const nlohmann::json& tj = pj.at("tolerances");
        auto& th = exp.params.thresholds;
        const auto read = [&tj](const char* key, double& slot) {
            if (!tj.contains(key)) return;
            const double v = tj.at(key).get<double>();
            if (v <= 0) throw Error(std::string("params.tolerances.") + key +
                                    " must be positive");
            slot = v;
        };
        read("consistent_factor", th.consistent_factor);
        read("distinguishable_factor", th.distinguishable_factor);
        read("rho_hat_per_h", th.rho_hat_per_h);
        read("alpha_harmonic_per_h", th.alpha_harmonic_per_h);
        read("ortho_per_h", th.ortho_per_h);
        read("pullback_per_h", th.pullback_per_h);
        read("psi_match_at_default_h", th.psi_match_at_default_h);
        read("collar_identity", th.collar_identity);
        read("pair_identity", th.pair_identity);
    }
    return exp;
}

template <int N>
inline ValidationReport validate_experiment_typed(const nlohmann::json& cfg,
                                                  bool allow_short_horizon) {
    ValidationReport rep;
    ParsedExperiment<N> exp;
    try {
        exp = parse_experiment<N>(cfg);
    } catch (const std::exception& e) {
        rep.ok = false;
        rep.violations.push_back(e.what());
        return rep;
    }
    if (exp.params.h <= 0) rep.violations.push_back("params.h must be positive");
    if (exp.params.dt <= 0) rep.violations.push_back("params.dt must be positive");

    const MediumBounds bounds = compute_bounds(exp.medium, exp.params.bounds_resolution);
    std::ostringstream os;
    os << bounds.g_min << " / " << bounds.g_max;
    rep.derived.emplace_back("g_min / g_max (resolution " +
                                 std::to_string(bounds.resolution) + ")",
                             os.str());
    os.str("");
    os << bounds.rho_min << " / " << bounds.rho_max;
    rep.derived.emplace_back("rho_min / rho_max", os.str());

    const double cap = cfl_limit(exp.params.h, N, bounds);
    rep.derived.emplace_back("cfl_dt_limit", fmt_double(cap));
    if (exp.params.dt > cap + 1e-15) {
        os.str("");
        os << "params.dt=" << exp.params.dt
           << " violates dt <= 0.5*h*sqrt(g_min)/sqrt(n) = " << cap;
        rep.violations.push_back(os.str());
    }

    const double eps = exp.params.eps_or_default();
    rep.derived.emplace_back("epsilon", fmt_double(eps));
    const double r_needed = (exp.params.T + 3.0) / 2.0 + eps + 2.0 * exp.params.h;
    rep.derived.emplace_back("box_half_width_required", fmt_double(r_needed));
    if (exp.box_half_width > 0 && exp.box_half_width < r_needed - 1e-12) {
        os.str("");
        os << "params.box_half_width=" << exp.box_half_width
           << " violates R >= (T+3)/2 + eps + 2h = " << r_needed;
        rep.violations.push_back(os.str());
    }

    const bool rigidity_pipeline =
        exp.pipeline == "rho-rigidity" || exp.pipeline == "metric-rigidity";
    const double horizon = rigidity_pipeline ? 4.0 * std::sqrt(bounds.g_max) - 1.0
                                             : 2.0 * std::sqrt(bounds.g_max) - 1.0;
    rep.derived.emplace_back(rigidity_pipeline ? "T_required (4*sqrt(g_max)-1)"
                                               : "T_required (2*sqrt(g_max)-1)",
                             fmt_double(horizon));
    if (exp.params.T <= horizon) {
        os.str("");
        os << "params.T=" << exp.params.T << " violates T > "
           << (rigidity_pipeline ? "4*sqrt(g_max)-1" : "2*sqrt(g_max)-1") << " = " << horizon;
        if (allow_short_horizon || exp.pipeline == "forward")
            rep.warnings.push_back(os.str() + " (allowed: short horizon)");
        else
            rep.violations.push_back(os.str());
    }
    if (exp.pipeline == "metric-rigidity") {
        if (exp.medium.kind != MediumKind::Metric)
            rep.violations.push_back("metric-rigidity requires a metric-kind medium");
        rep.derived.emplace_back("omega_count |Omega|",
                                 std::to_string(omega_set<N>().size()));
    }
    if (exp.pipeline == "rho-rigidity" && exp.medium.kind != MediumKind::IsotropicDensity)
        rep.violations.push_back("rho-rigidity requires a density-kind medium");

    rep.ok = rep.violations.empty();
    return rep;
}

// ---- report rendering --------------------------------------------------------

inline nlohmann::json report_to_json(const RigidityReport& rep) {
    nlohmann::json j;
    j["experiment"] = rep.experiment;
    j["medium"] = rep.medium_description;
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : rep.checks)
        checks.push_back({{"name", c.name},
                          {"value", c.value},
                          {"tol", c.tol},
                          {"pass", c.pass},
                          {"enabled", c.enabled},
                          {"note", c.note}});
    j["checks"] = checks;
    nlohmann::json info = nlohmann::json::object();
    for (const auto& [k, v] : rep.info) info[k] = v;
    j["metrics"] = info;
    j["verdict"] = rep.verdict;
    j["falsification"] = rep.falsification;
    return j;
}

inline std::string report_to_text(const RigidityReport& rep) {
    std::ostringstream os;
    os << "experiment: " << rep.experiment << "\n";
    os << "medium:     " << rep.medium_description << "\n\n";
    os << "checks (enabled checks gate the verdict):\n";
    for (const auto& c : rep.checks) {
        os << "  [" << (c.pass ? "pass" : "FAIL") << (c.enabled ? "" : ", off") << "] "
           << c.name << ": value " << fmt_double(c.value) << ", tol " << fmt_double(c.tol);
        if (!c.note.empty()) os << " (" << c.note << ")";
        os << "\n";
    }
    os << "\nmeasurements:\n";
    for (const auto& [k, v] : rep.info) os << "  " << k << " = " << fmt_double(v) << "\n";
    os << "\nverdict: " << rep.verdict << "\n";
    return os.str();
}

inline std::string checklist_to_text(const ChecklistReport& rep) {
    std::ostringstream os;
    os << "flow-out condition checklist:\n";
    for (const auto& i : rep.items)
        os << "  [" << to_string(i.status) << "] " << i.id << ": " << i.note << "\n";
    return os.str();
}

inline nlohmann::json checklist_to_json(const ChecklistReport& rep) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& i : rep.items)
        arr.push_back({{"id", i.id},
                       {"status", to_string(i.status)},
                       {"value", i.value},
                       {"note", i.note}});
    return arr;
}

// ---- pipelines ----------------------------------------------------------------

namespace detail {

template <int N>
inline nlohmann::json wave_meta(const WaveConfig<N>& cfg, const Grid<N>& grid) {
    nlohmann::json j;
    j["omega"] = to_json(cfg.omega);
    j["T"] = cfg.T;
    j["epsilon"] = cfg.eps;
    j["h"] = cfg.h;
    j["dt"] = cfg.dt;
    j["box_half_width"] = grid.half_width();
    j["boundary_samples"] = cfg.boundary_samples;
    j["medium"] = medium_to_json(cfg.medium);
    return j;
}

template <int N>
inline WaveConfig<N> rigidity_wave_config(const ParsedExperiment<N>& exp, double dt) {
    WaveConfig<N> wc;
    wc.medium = exp.medium;
    wc.omega = exp.omega;
    wc.T = exp.params.T;
    wc.eps = exp.params.eps_or_default();
    wc.h = exp.params.h;
    wc.dt = dt;
    wc.box_half_width = exp.box_half_width;
    wc.boundary_samples = exp.params.boundary_samples;
    wc.track_arrival = true;
    wc.jobs = exp.jobs;
    return wc;
}

template <int N>
inline int run_typed(const nlohmann::json& cfg, const std::string& out_override,
                     bool allow_short_horizon, int jobs) {
    const ValidationReport val = validate_experiment_typed<N>(cfg, allow_short_horizon);
    if (!val.ok) {
        std::ostringstream os;
        os << "configuration invalid:\n" << val.to_text();
        throw Error(os.str());
    }
    ParsedExperiment<N> exp = parse_experiment<N>(cfg);
    exp.jobs = jobs;
    exp.params.jobs = jobs;
    const std::string out_dir = !out_override.empty() ? out_override : exp.out_dir;
    if (out_dir.empty()) throw Error("no output directory: set config 'out' or pass --out");
    ArtifactWriter writer(out_dir, exp.name);
    writer.manifest().parameters = cfg;

    nlohmann::json summary;
    summary["experiment"] = exp.name;
    summary["pipeline"] = exp.pipeline;
    summary["parameters"] = cfg.at("params");
    nlohmann::json metrics = nlohmann::json::object();
    std::vector<std::string> warnings = val.warnings;
    int exit_code = 0;
    std::string report_text;

    const MediumBounds bounds = compute_bounds(exp.medium, exp.params.bounds_resolution);
    const double dt = exp.params.dt;

    if (exp.pipeline == "forward") {
        WaveConfig<N> wc = rigidity_wave_config(exp, dt);
        wc.energy_stride = exp.energy_stride;
        wc.snapshot_stride = exp.snapshot_stride;
        if (wc.snapshot_stride == 0) wc.snapshot_stride = 40;
        const WaveSolveResult<N> run = solve_wave(wc);
        for (const auto& w : run.warnings) warnings.push_back(w);
        writer.emit("trace.csv", [&](const std::filesystem::path& p) {
            write_trace_csv(p, run.trace, wave_meta(wc, run.grid));
        });
        writer.emit("energy.csv",
                    [&](const std::filesystem::path& p) { write_energy_csv(p, run.energy); });
        writer.emit("arrival_from_field.csv", [&](const std::filesystem::path& p) {
            write_field_csv(p, run.grid, run.arrival, "arrival");
        });
        for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
            char name[64];
            std::snprintf(name, sizeof(name), "u_%04zu.pgm", s);
            std::vector<double> vals(run.snapshots[s].second.begin(),
                                     run.snapshots[s].second.end());
            writer.emit(name, [&](const std::filesystem::path& p) {
                write_pgm(p, run.grid, vals);
            });
        }
        const auto window = fully_interior_window(run.grid, wc, bounds);
        metrics["trace_linf_vs_plane"] = trace_linf_error_vs_plane(run.trace);
        metrics["max_abs_u"] = run.max_abs_value;
        if (window.first < window.second) {
            const EnergyDrift d =
                energy_drift_in_window(run.energy, window.first, window.second);
            metrics["energy_drift"] = d.relative_drift;
            metrics["energy_window_begin"] = window.first;
            metrics["energy_window_end"] = window.second;
        }
        std::ostringstream os;
        os << "forward solve complete: " << run.trace.times.size() << " time samples, "
           << run.trace.points.size() << " boundary samples\n";
        report_text = os.str();
    } else if (exp.pipeline == "geodesics") {
        const SigmaFan<N> fan =
            make_disk_fan<N>(exp.omega, 1.0, exp.params.fan_spacing_or_default(), true);
        const ExitMapResult<N> em = exit_map(exp.medium, exp.omega, fan, exp.params.T);
        std::vector<OmegaRay<N>> rays;
        for (std::size_t i = 0; i < fan.points.size(); i += std::max<std::size_t>(1, fan.points.size() / 16))
            rays.push_back(integrate_omega_geodesic(exp.medium, exp.omega, fan.points[i],
                                                    exp.params.T, 1e-3));
        writer.emit("rays.csv", [&](const std::filesystem::path& p) {
            write_rays_csv(p, rays, 10);
        });
        writer.emit("exit_map.csv",
                    [&](const std::filesystem::path& p) { write_exit_map_csv(p, em); });
        metrics["rays"] = static_cast<double>(fan.points.size());
        metrics["no_crossing"] = static_cast<double>(em.no_crossing.size());
        metrics["recrossings"] = static_cast<double>(em.recrossings.size());
        metrics["collisions"] = static_cast<double>(em.collisions.size());
        double drift = 0;
        for (const auto& r : rays) drift = std::max(drift, r.max_unit_speed_drift);
        metrics["max_unit_speed_drift"] = drift;
        report_text = "exit map tabulated; see exit_map.csv\n";
    } else if (exp.pipeline == "arrival") {
        const Grid<N> grid = Grid<N>::centered_cube(exp.params.grid_half_width, exp.params.h);
        const double shoot_T =
            std::sqrt(bounds.g_max) * (2.0 * exp.params.grid_half_width + 1.0) + 0.5;
        const ArrivalField<N> shoot = arrival_by_shooting(
            exp.medium, exp.omega, grid, exp.params.fan_spacing_or_default(), shoot_T);
        const ArrivalField<N> sweep =
            arrival_by_sweeping(exp.medium, exp.omega, grid, exp.params.sweep_tol);
        writer.emit("alpha_shooting.csv",
                    [&](const std::filesystem::path& p) { write_arrival_csv(p, shoot); });
        writer.emit("alpha_sweeping.csv",
                    [&](const std::filesystem::path& p) { write_arrival_csv(p, sweep); });
        writer.emit("alpha_sweeping.pgm", [&](const std::filesystem::path& p) {
            write_pgm(p, grid, sweep.alpha);
        });
        writer.emit("residual_sweeping.pgm", [&](const std::filesystem::path& p) {
            write_pgm(p, grid, sweep.residual);
        });
        metrics["cross_method_linf"] = max_abs_diff_on_smooth(shoot, sweep);
        metrics["eikonal_l2_sweeping"] = eikonal_residual(sweep, exp.medium).l2;
        metrics["eikonal_l2_shooting"] = eikonal_residual(shoot, exp.medium).l2;
        report_text = "arrival fields computed by shooting and sweeping\n";
    } else if (exp.pipeline == "rho-rigidity") {
        ArrivalField<N> alpha;
        std::vector<double> rho_hat;
        const RigidityReport rep =
            verify_rho_rigidity(exp.medium, exp.omega, exp.params, &alpha, &rho_hat);
        writer.emit("alpha.csv",
                    [&](const std::filesystem::path& p) { write_arrival_csv(p, alpha); });
        writer.emit("alpha.pgm", [&](const std::filesystem::path& p) {
            write_pgm(p, alpha.grid, alpha.alpha);
        });
        writer.emit("rho_hat.csv", [&](const std::filesystem::path& p) {
            write_field_csv(p, alpha.grid, rho_hat, "rho_hat");
        });
        writer.emit("rho_hat.pgm", [&](const std::filesystem::path& p) {
            write_pgm(p, alpha.grid, rho_hat);
        });
        for (const auto& [k, v] : rep.info) metrics[k] = v;
        summary["checks"] = report_to_json(rep)["checks"];
        summary["verdict"] = rep.verdict;
        summary["falsification"] = rep.falsification;
        report_text = report_to_text(rep);
        if (rep.falsification) exit_code = 2;
    } else if (exp.pipeline == "metric-rigidity") {
        DiffeoRecovery<N> rec;
        const RigidityReport rep = verify_metric_rigidity(exp.medium, exp.params, &rec);
        for (int i = 0; i < N; ++i) {
            const std::string base = "psi_" + std::to_string(i);
            writer.emit(base + ".csv", [&](const std::filesystem::path& p) {
                write_field_csv(p, rec.grid, rec.psi[i], base);
            });
            writer.emit(base + ".pgm", [&](const std::filesystem::path& p) {
                write_pgm(p, rec.grid, rec.psi[i]);
            });
        }
        writer.emit("ortho_residual.pgm", [&](const std::filesystem::path& p) {
            write_pgm(p, rec.grid, rec.ortho_residual);
        });
        writer.emit("pullback_residual.pgm", [&](const std::filesystem::path& p) {
            write_pgm(p, rec.grid, rec.pullback_residual);
        });
        writer.emit("det_jacobian.csv", [&](const std::filesystem::path& p) {
            write_field_csv(p, rec.grid, rec.det_jacobian, "det");
        });
        for (const auto& [k, v] : rep.info) metrics[k] = v;
        summary["checks"] = report_to_json(rep)["checks"];
        summary["verdict"] = rep.verdict;
        summary["falsification"] = rep.falsification;
        report_text = report_to_text(rep);
        if (rep.falsification) exit_code = 2;
    } else { // diffeo-checklist
        const ChecklistReport rep =
            diffeo_condition_checklist(exp.medium, exp.omega, exp.params);
        summary["checklist"] = checklist_to_json(rep);
        report_text = checklist_to_text(rep);
        for (const auto& i : rep.items) metrics["checklist_" + i.id] = i.value;
        if (rep.any_fail()) exit_code = 2;
    }

    summary["metrics"] = metrics;
    summary["warnings"] = warnings;
    writer.emit("report.txt",
                [&](const std::filesystem::path& p) { write_text_file(p, report_text); });
    writer.emit("summary.json", [&](const std::filesystem::path& p) {
        write_text_file(p, summary.dump(2) + "\n");
    });
    writer.finalize();
    return exit_code;
}

} // namespace detail

inline int dimension_of(const nlohmann::json& cfg) {
    return cfg.at("medium").at("dimension").get<int>();
}

inline ValidationReport validate_experiment(const nlohmann::json& cfg,
                                            bool allow_short_horizon) {
    const int n = dimension_of(cfg);
    if (n == 2) return validate_experiment_typed<2>(cfg, allow_short_horizon);
    if (n == 3) return validate_experiment_typed<3>(cfg, allow_short_horizon);
    ValidationReport rep;
    rep.ok = false;
    rep.violations.push_back("medium.dimension must be 2 or 3 for this build");
    return rep;
}

inline int run_experiment(const nlohmann::json& cfg, const std::string& out_override,
                          bool allow_short_horizon, int jobs) {
    const int n = dimension_of(cfg);
    if (n == 2) return detail::run_typed<2>(cfg, out_override, allow_short_horizon, jobs);
    if (n == 3) return detail::run_typed<3>(cfg, out_override, allow_short_horizon, jobs);
    throw Error("medium.dimension must be 2 or 3 for this build");
}

// ---- run comparison ------------------------------------------------------------

struct CompareRow {
    std::string key;
    double a = 0, b = 0;
};

struct CompareReport {
    std::vector<CompareRow> metric_diffs;
    std::vector<std::string> check_flips;
    std::vector<std::string> artifact_changes;
    std::size_t overlapping_keys = 0;

    std::string to_text() const {
        std::ostringstream os;
        os << "metric comparison (A, B, B-A, B/A):\n";
        for (const auto& r : metric_diffs) {
            os << "  " << r.key << ": " << fmt_double(r.a) << ", " << fmt_double(r.b) << ", "
               << fmt_double(r.b - r.a) << ", "
               << (r.a != 0 ? fmt_double(r.b / r.a) : std::string("-")) << "\n";
        }
        if (!check_flips.empty()) {
            os << "check pass/fail flips:\n";
            for (const auto& c : check_flips) os << "  " << c << "\n";
        } else {
            os << "no check pass/fail flips\n";
        }
        os << "artifacts with differing hashes:\n";
        if (artifact_changes.empty()) os << "  none (runs byte-identical where shared)\n";
        for (const auto& a : artifact_changes) os << "  " << a << "\n";
        return os.str();
    }
};

inline CompareReport compare_runs(const std::filesystem::path& manifest_a,
                                  const std::filesystem::path& manifest_b) {
    const Manifest ma = Manifest::from_json(nlohmann::json::parse(read_text_file(manifest_a)));
    const Manifest mb = Manifest::from_json(nlohmann::json::parse(read_text_file(manifest_b)));
    CompareReport rep;
    for (const auto& [k, v] : ma.hashes) {
        auto it = mb.hashes.find(k);
        if (it == mb.hashes.end()) continue;
        ++rep.overlapping_keys;
        if (it->second != v) rep.artifact_changes.push_back(k);
    }
    const auto summary_of = [](const std::filesystem::path& manifest) {
        return nlohmann::json::parse(
            read_text_file(manifest.parent_path() / "summary.json"));
    };
    nlohmann::json sa, sb;
    try {
        sa = summary_of(manifest_a);
        sb = summary_of(manifest_b);
    } catch (const std::exception&) {
        if (rep.overlapping_keys == 0)
            throw Error("compare_runs: manifests share no artifacts and no summaries");
        return rep;
    }
    if (sa.contains("metrics") && sb.contains("metrics")) {
        for (const auto& [k, v] : sa.at("metrics").items()) {
            if (!sb.at("metrics").contains(k) || !v.is_number()) continue;
            ++rep.overlapping_keys;
            rep.metric_diffs.push_back(
                {k, v.get<double>(), sb.at("metrics").at(k).get<double>()});
        }
    }
    if (sa.contains("checks") && sb.contains("checks")) {
        std::map<std::string, bool> pa;
        for (const auto& c : sa.at("checks"))
            pa[c.at("name").get<std::string>()] = c.at("pass").get<bool>();
        for (const auto& c : sb.at("checks")) {
            const std::string name = c.at("name").get<std::string>();
            auto it = pa.find(name);
            if (it == pa.end()) continue;
            ++rep.overlapping_keys;
            if (it->second != c.at("pass").get<bool>())
                rep.check_flips.push_back(name + ": " + (it->second ? "pass->FAIL" : "FAIL->pass"));
        }
    }
    if (rep.overlapping_keys == 0)
        throw Error("compare_runs: manifests are disjoint (no overlapping artifact or "
                    "summary keys)");
    return rep;
}

} // namespace faslab
