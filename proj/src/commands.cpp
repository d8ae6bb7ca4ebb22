#include "fiberopt/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "fiberopt/error.hpp"
#include "fiberopt/format.hpp"

namespace fiberopt {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const SolverError& ex) {
        throw StageError(name, ex.what(), true);
    } catch (const ConfigError& ex) {
        throw StageError(name, ex.what(), false);
    } catch (const MeshError& ex) {
        throw StageError(name, ex.what(), false);
    }
}

void prepare_out_dir(const RunConfig& config, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(fmt::format("cannot create output directory '{}': {}", out_dir.string(), ec.message()));
    write_text_file(out_dir / "effective_config.yaml", effective_config_yaml(config));
}

std::vector<Vec3> node_vectors(const Eigen::VectorXd& u) {
    std::vector<Vec3> out(static_cast<std::size_t>(u.size() / 3));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = u.segment<3>(static_cast<Eigen::Index>(3 * i));
    return out;
}

std::vector<VoigtStiffness> uniform_stiffness(const Mesh& mesh, const Material& m) {
    return std::vector<VoigtStiffness>(mesh.num_elements(), isotropic_stiffness(m.youngs_modulus, m.poisson_ratio));
}

struct StressFields {
    std::vector<double> von_mises;
    std::vector<double> max_principal;
};

StressFields stress_fields(const Mesh& mesh, std::span<const VoigtStiffness> stiffness, const Eigen::VectorXd& u) {
    StressFields f;
    for (const auto& s : recover_stress(mesh, stiffness, u)) {
        f.von_mises.push_back(s.von_mises);
        f.max_principal.push_back(s.max_principal);
    }
    return f;
}

void add_solution_fields(VtkFields& fields, const Mesh& mesh, const StressFields& stress, const SolveResult& solve) {
    fields.point_vectors.emplace_back("displacement", node_vectors(solve.displacement));
    fields.point_scalars.emplace_back("displacement_magnitude", displacement_magnitudes(solve.displacement));
    fields.point_scalars.emplace_back("von_mises_nodal_avg_display_only", nodal_average(mesh, stress.von_mises));
    fields.cell_scalars.emplace_back("von_mises", stress.von_mises);
    fields.cell_scalars.emplace_back("max_principal_stress", stress.max_principal);
}

std::string history_csv(const std::vector<IterationRecord>& history) {
    std::string out = "iteration,compliance,mass_fraction,max_change\n";
    for (const auto& h : history) {
        out += fmt::format("{},{},{},{}\n", h.iteration, fmt9(h.compliance), fmt9(h.mass_fraction), fmt9(h.max_change));
    }
    return out;
}

const char* oc_status_name(OcStatus s) {
    switch (s) {
        case OcStatus::Ok: return "ok";
        case OcStatus::UpperLimited: return "upper_limited";
        case OcStatus::LowerLimited: return "lower_limited";
        case OcStatus::Degenerate: return "degenerate";
    }
    return "unknown";
}

void require_mass_fraction(const RunConfig& config) {
    if (!config.has_mass_fraction) {
        throw ConfigError("field 'optimization.mass_fraction': required for this command");
    }
}

double max_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

}  // namespace

AnalyzeSummary run_analyze(const RunConfig& config, const fs::path& out_dir) {
    const Mesh mesh = stage("mesh", [&] { return build_mesh(config); });
    prepare_out_dir(config, out_dir);
    const auto stiffness = uniform_stiffness(mesh, config.weak);
    const SolveResult solve = stage("analyze", [&] { return analyze(mesh, stiffness, config.load_case, config.solver()); });
    const StressFields stress = stress_fields(mesh, stiffness, solve.displacement);
    const DisplacementStats stats = displacement_stats(displacement_magnitudes(solve.displacement));

    AnalyzeSummary s;
    s.nodes = mesh.num_nodes();
    s.elements = mesh.num_elements();
    s.max_displacement = stats.max;
    s.mean_displacement = stats.mean;
    s.compliance = solve.compliance;
    s.max_principal_stress = max_of(stress.max_principal);
    s.max_von_mises = max_of(stress.von_mises);
    s.cg_iterations = solve.cg_iterations;

    const ordered_json doc{{"material", config.weak.name},
                           {"nodes", s.nodes},
                           {"elements", s.elements},
                           {"max_displacement_mm", sig9(s.max_displacement)},
                           {"mean_displacement_mm", sig9(s.mean_displacement)},
                           {"compliance_Nmm", sig9(s.compliance)},
                           {"max_principal_stress_MPa", sig9(s.max_principal_stress)},
                           {"max_von_mises_MPa", sig9(s.max_von_mises)},
                           {"cg_iterations", s.cg_iterations},
                           {"final_residual", sig9(solve.final_residual)}};
    write_text_file(out_dir / "analysis.json", doc.dump(2) + "\n");

    VtkFields fields;
    add_solution_fields(fields, mesh, stress, solve);
    export_vtk(mesh, fields, out_dir / "analysis.vtk");
    return s;
}

namespace {

void write_optimization(const Mesh& mesh, const RunConfig& config, const OptimizationResult& r,
                        const fs::path& out_dir) {
    write_text_file(out_dir / "history.csv", history_csv(r.history));
    const OcStatus last = r.history.empty() ? OcStatus::Ok : r.history.back().oc_status;
    const ordered_json doc{{"mass_fraction_target", sig9(config.optimization.mass_fraction)},
                           {"iterations", r.iterations},
                           {"converged", r.converged},
                           {"final_compliance_Nmm", sig9(r.final_compliance)},
                           {"final_mass_fraction", sig9(r.final_mass.fraction)},
                           {"final_mass_mg", sig9(r.final_mass.mass)},
                           {"final_volume_mm3", sig9(r.final_mass.volume)},
                           {"last_oc_status", oc_status_name(last)}};
    write_text_file(out_dir / "optimization.json", doc.dump(2) + "\n");

    VtkFields fields;
    fields.cell_scalars.emplace_back("theta", r.design.theta);
    fields.cell_scalars.emplace_back("theta_filtered", r.physical.theta);
    fields.point_vectors.emplace_back("displacement", node_vectors(r.final_solve.displacement));
    export_vtk(mesh, fields, out_dir / "density.vtk");
}

}  // namespace

OptimizationResult run_optimize(const RunConfig& config, const fs::path& out_dir) {
    require_mass_fraction(config);
    const Mesh mesh = stage("mesh", [&] { return build_mesh(config); });
    prepare_out_dir(config, out_dir);
    const OptimizationResult r =
        stage("optimize", [&] { return optimize(mesh, config.load_case, config.strong, config.optimization); });
    write_optimization(mesh, config, r, out_dir);
    return r;
}

ReinforceSummary run_reinforce(const RunConfig& config, const fs::path& out_dir) {
    require_mass_fraction(config);
    const Mesh mesh = stage("mesh", [&] { return build_mesh(config); });
    prepare_out_dir(config, out_dir);
    const std::vector<double> volumes = element_volumes(mesh);

    // The baseline is the weak material everywhere, passive region included.
    const auto weak_stiffness = uniform_stiffness(mesh, config.weak);
    const SolveResult baseline =
        stage("baseline", [&] { return analyze_design(mesh, weak_stiffness, config.load_case, config.solver()); });
    {
        VtkFields fields;
        add_solution_fields(fields, mesh, stress_fields(mesh, weak_stiffness, baseline.displacement), baseline);
        export_vtk(mesh, fields, out_dir / "baseline.vtk");
    }

    ReinforceSummary s;
    s.baseline_compliance = baseline.compliance;
    s.optimization = stage("optimize", [&] { return optimize(mesh, config.load_case, config.strong, config.optimization); });
    write_optimization(mesh, config, s.optimization, out_dir);

    s.design = stage("threshold", [&] { return threshold(s.optimization.physical, volumes, config.cutoff, config.passive_label); });
    const auto stiffness = fill_voids(s.design, config.strong, config.weak);
    const SolveResult reinforced =
        stage("reinforced", [&] { return analyze_design(mesh, stiffness, config.load_case, config.solver()); });
    s.reinforced_compliance = reinforced.compliance;
    {
        std::vector<double> labels(mesh.num_elements());
        for (std::size_t e = 0; e < labels.size(); ++e) labels[e] = s.design.assignment[e] == MaterialLabel::Strong ? 1.0 : 0.0;
        VtkFields fields;
        fields.cell_scalars.emplace_back("strong_material", labels);
        fields.cell_scalars.emplace_back("theta_filtered", s.optimization.physical.theta);
        add_solution_fields(fields, mesh, stress_fields(mesh, stiffness, reinforced.displacement), reinforced);
        export_vtk(mesh, fields, out_dir / "reinforced.vtk");
    }

    s.report = stage("compare", [&] { return compare(baseline, reinforced, config.histogram_bins); });
    write_text_file(out_dir / "comparison.json", report_json(s.report));
    write_text_file(out_dir / "comparison.txt", report_text(s.report));
    write_text_file(out_dir / "histogram.csv", histogram_csv(s.report.histogram));

    const ordered_json doc{
        {"strong_material", config.strong.name},
        {"weak_material", config.weak.name},
        {"cutoff", sig9(config.cutoff)},
        {"mass_fraction_target", sig9(config.optimization.mass_fraction)},
        {"optimized_mass_fraction", sig9(s.optimization.final_mass.fraction)},
        {"thresholded_mass_fraction", sig9(s.design.strong_mass_fraction)},
        {"thresholded_mass_deviation", sig9(s.design.strong_mass_fraction - config.optimization.mass_fraction)},
        {"strong_volume_mm3", sig9(s.design.strong_volume)},
        {"strong_design_volume_mm3", sig9(s.design.strong_design_volume)},
        {"baseline_compliance_Nmm", sig9(s.baseline_compliance)},
        {"reinforced_compliance_Nmm", sig9(s.reinforced_compliance)},
        {"max_reduction_percent", sig9(s.report.max_reduction_percent)},
        {"mean_reduction_percent", sig9(s.report.mean_reduction_percent)}};
    write_text_file(out_dir / "reinforce.json", doc.dump(2) + "\n");
    return s;
}

ConvergenceStudy run_convergence(const RunConfig& config, const std::vector<int>& levels, const fs::path& out_dir) {
    if (levels.size() < 2) throw ConfigError("convergence needs at least two levels");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 1 || (i > 0 && levels[i] <= levels[i - 1])) {
            throw ConfigError("convergence levels must strictly refine (strictly increasing, >= 1)");
        }
    }
    if (!config.mesh.box) throw ConfigError("convergence needs a box mesh source");
    prepare_out_dir(config, out_dir);

    ConvergenceStudy study;
    const auto& box = *config.mesh.box;
    for (int level : levels) {
        const Mesh mesh = stage(fmt::format("level {}", level), [&] { return build_mesh(config, level); });
        const auto stiffness = uniform_stiffness(mesh, config.weak);
        const SolveResult solve = stage(fmt::format("level {}", level),
                                        [&] { return analyze(mesh, stiffness, config.load_case, config.solver()); });
        ConvergenceRow row;
        row.level = level;
        row.mesh_size = 0.0;
        for (int a = 0; a < 3; ++a) row.mesh_size = std::max(row.mesh_size, box.size[a] / (box.divisions[a] * level));
        row.nodes = mesh.num_nodes();
        row.elements = mesh.num_elements();
        row.total_displacement = max_of(displacement_magnitudes(solve.displacement));
        row.max_principal_stress = max_of(stress_fields(mesh, stiffness, solve.displacement).max_principal);
        study.rows.push_back(row);
    }
    auto rel = [](double prev, double cur) { return cur != 0.0 ? std::abs(cur - prev) / std::abs(cur) : 0.0; };
    for (std::size_t i = 1; i < study.rows.size(); ++i) {
        study.displacement_change.push_back(rel(study.rows[i - 1].total_displacement, study.rows[i].total_displacement));
        study.stress_change.push_back(rel(study.rows[i - 1].max_principal_stress, study.rows[i].max_principal_stress));
    }

    std::string csv = "level,mesh_size_mm,nodes,elements,total_displacement_mm,max_principal_stress_MPa,"
                      "displacement_change,stress_change\n";
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < study.rows.size(); ++i) {
        const auto& r = study.rows[i];
        const std::string dchg = i > 0 ? fmt9(study.displacement_change[i - 1]) : "";
        const std::string schg = i > 0 ? fmt9(study.stress_change[i - 1]) : "";
        csv += fmt::format("{},{},{},{},{},{},{},{}\n", r.level, fmt9(r.mesh_size), r.nodes, r.elements,
                           fmt9(r.total_displacement), fmt9(r.max_principal_stress), dchg, schg);
        ordered_json row{{"level", r.level},
                         {"mesh_size_mm", sig9(r.mesh_size)},
                         {"nodes", r.nodes},
                         {"elements", r.elements},
                         {"total_displacement_mm", sig9(r.total_displacement)},
                         {"max_principal_stress_MPa", sig9(r.max_principal_stress)}};
        if (i > 0) {
            row["displacement_change"] = sig9(study.displacement_change[i - 1]);
            row["stress_change"] = sig9(study.stress_change[i - 1]);
        }
        rows.push_back(row);
    }
    write_text_file(out_dir / "convergence.csv", csv);
    write_text_file(out_dir / "convergence.json", ordered_json{{"rows", rows}}.dump(2) + "\n");
    return study;
}

namespace {

std::string fraction_dir(double f) { return fmt::format("mass_fraction_{}", fmt9(f)); }

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reinforcement placement by SIMP topology optimization"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<double> sweep;
    std::vector<int> levels;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "YAML run configuration")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides output.directory)");
    };
    CLI::App* analyze_cmd = app.add_subcommand("analyze", "Baseline analysis with the weak material");
    CLI::App* optimize_cmd = app.add_subcommand("optimize", "SIMP optimization of the strong material");
    CLI::App* reinforce_cmd = app.add_subcommand("reinforce", "Full reinforcement pipeline and comparison");
    CLI::App* convergence_cmd = app.add_subcommand("convergence", "Mesh convergence study on the box mesh");
    for (auto* sub : {analyze_cmd, optimize_cmd, reinforce_cmd, convergence_cmd}) add_common(sub);
    optimize_cmd->add_option("--sweep", sweep, "Mass fractions to run, e.g. 0.2,0.4,0.57")->delimiter(',');
    reinforce_cmd->add_option("--sweep", sweep, "Mass fractions to run, e.g. 0.2,0.4,0.57")->delimiter(',');
    convergence_cmd->add_option("--levels", levels, "Refinement factors, e.g. 1,2,3,4")->delimiter(',')->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        RunConfig config = parse_config(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        const fs::path dir = config.output_dir;

        if (*analyze_cmd) {
            const AnalyzeSummary s = run_analyze(config, dir);
            out << fmt::format("max displacement {} mm, mean {} mm, compliance {} N mm\n", fmt9(s.max_displacement),
                               fmt9(s.mean_displacement), fmt9(s.compliance));
        } else if (*optimize_cmd || *reinforce_cmd) {
            const bool reinforce = static_cast<bool>(*reinforce_cmd);
            if (sweep.empty()) {
                require_mass_fraction(config);
                sweep.push_back(config.optimization.mass_fraction);
            } else {
                for (double f : sweep) {
                    if (!(f > 0.0 && f <= 1.0)) throw ConfigError(fmt::format("--sweep value {} out of range (0, 1]", f));
                }
            }
            const bool single = sweep.size() == 1 && !(*optimize_cmd ? optimize_cmd : reinforce_cmd)->count("--sweep");
            std::string table = reinforce ? "mass_fraction,mean_reduction_percent,max_reduction_percent,"
                                            "reinforced_compliance,thresholded_mass_fraction\n"
                                          : "mass_fraction,iterations,converged,final_compliance,final_mass_fraction\n";
            for (double f : sweep) {
                RunConfig run = config;
                run.optimization.mass_fraction = f;
                run.has_mass_fraction = true;
                const fs::path run_dir = single ? dir : dir / fraction_dir(f);
                if (reinforce) {
                    const ReinforceSummary s = run_reinforce(run, run_dir);
                    out << fmt::format("mass fraction {}: mean |u| {} -> {} mm ({}%), max |u| {} -> {} mm ({}%)\n",
                                       fmt9(f), fmt9(s.report.baseline.mean), fmt9(s.report.reinforced.mean),
                                       fmt9(s.report.mean_reduction_percent), fmt9(s.report.baseline.max),
                                       fmt9(s.report.reinforced.max), fmt9(s.report.max_reduction_percent));
                    table += fmt::format("{},{},{},{},{}\n", fmt9(f), fmt9(s.report.mean_reduction_percent),
                                         fmt9(s.report.max_reduction_percent), fmt9(s.reinforced_compliance),
                                         fmt9(s.design.strong_mass_fraction));
                } else {
                    const OptimizationResult r = run_optimize(run, run_dir);
                    out << fmt::format("mass fraction {}: {} iterations{}, compliance {} N mm\n", fmt9(f),
                                       r.iterations, r.converged ? "" : " (not converged)", fmt9(r.final_compliance));
                    table += fmt::format("{},{},{},{},{}\n", fmt9(f), r.iterations, r.converged ? 1 : 0,
                                         fmt9(r.final_compliance), fmt9(r.final_mass.fraction));
                }
            }
            if (!single) write_text_file(dir / "sweep.csv", table);
        } else if (*convergence_cmd) {
            const ConvergenceStudy study = run_convergence(config, levels, dir);
            for (std::size_t i = 0; i < study.rows.size(); ++i) {
                const auto& r = study.rows[i];
                out << fmt::format("level {}: h {} mm, {} nodes, {} elements, |u|max {} mm, sigma1max {} MPa\n",
                                   r.level, fmt9(r.mesh_size), r.nodes, r.elements, fmt9(r.total_displacement),
                                   fmt9(r.max_principal_stress));
            }
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const MeshError& e) {
        err << "mesh error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const StageError& e) {
        err << "stage " << e.what() << "\n";
        return e.numerical() ? kExitNumerical : kExitConfig;
    } catch (const SolverError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}

}  // namespace fiberopt
