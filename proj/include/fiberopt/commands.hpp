#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fiberopt/config.hpp"

namespace fiberopt {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2 };

/// A pipeline stage failed; the message names the stage.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, bool numerical)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), numerical_(numerical) {}
    const std::string& stage() const noexcept { return stage_; }
    bool numerical() const noexcept { return numerical_; }

private:
    std::string stage_;
    bool numerical_;
};

struct AnalyzeSummary {
    std::size_t nodes = 0;
    std::size_t elements = 0;
    double max_displacement = 0.0;
    double mean_displacement = 0.0;
    double compliance = 0.0;
    double max_principal_stress = 0.0;
    double max_von_mises = 0.0;
    int cg_iterations = 0;
};

/// Baseline analysis with the weak material everywhere. Writes
/// analysis.json and analysis.vtk.
AnalyzeSummary run_analyze(const RunConfig& config, const std::filesystem::path& out_dir);

/// Writes density.vtk, history.csv and optimization.json for the config's
/// mass fraction.
OptimizationResult run_optimize(const RunConfig& config, const std::filesystem::path& out_dir);

struct ReinforceSummary {
    ComparisonReport report;
    ReinforcementDesign design;
    OptimizationResult optimization;
    double baseline_compliance = 0.0;
    double reinforced_compliance = 0.0;
};

/// baseline analysis -> optimize -> threshold -> fill voids -> re-analysis
/// -> compare. Artifacts of finished stages stay on disk if a later stage
/// fails.
ReinforceSummary run_reinforce(const RunConfig& config, const std::filesystem::path& out_dir);

struct ConvergenceRow {
    int level = 0;
    double mesh_size = 0.0;  ///< longest cell edge, mm
    std::size_t nodes = 0;
    std::size_t elements = 0;
    double total_displacement = 0.0;  ///< max node |u|, mm
    double max_principal_stress = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    std::vector<double> displacement_change;  ///< |d_i - d_{i-1}| / |d_i|, one per consecutive pair
    std::vector<double> stress_change;
};

/// Re-runs the baseline analysis with the box divisions multiplied by each
/// level. Levels must strictly increase. Writes convergence.csv/.json.
ConvergenceStudy run_convergence(const RunConfig& config, const std::vector<int>& levels,
                                 const std::filesystem::path& out_dir);

/// Command-line entry point used by the fiberopt executable.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fiberopt
