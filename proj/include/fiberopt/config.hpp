#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fiberopt/fem.hpp"
#include "fiberopt/material.hpp"
#include "fiberopt/mesh.hpp"
#include "fiberopt/mesh_io.hpp"
#include "fiberopt/reinforce.hpp"
#include "fiberopt/topopt.hpp"

namespace fiberopt {

struct BoxSpec {
    std::array<int, 3> divisions{1, 1, 1};
    Vec3 size = Vec3::Ones();
};

struct AxisBox {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
};

/// Exactly one of box / file is set.
struct MeshSource {
    std::optional<BoxSpec> box;
    std::optional<std::filesystem::path> file;
    MeshFormat format = MeshFormat::NativeJson;
    std::vector<AxisBox> passive_boxes;
};

/// Everything a pipeline command needs. Parsing materializes every default.
struct RunConfig {
    MeshSource mesh;
    Material strong;
    Material weak;
    LoadCase load_case;
    OptimizationConfig optimization;  ///< optimization.solver is the solver for every stage
    bool has_mass_fraction = false;
    double cutoff = 0.5;
    MaterialLabel passive_label = MaterialLabel::Strong;
    int histogram_bins = 30;
    std::filesystem::path output_dir = "out";

    const SolverSettings& solver() const { return optimization.solver; }
};

/// Parses the YAML config schema documented in the README. Relative paths
/// resolve against base_dir. Throws ConfigError with line and field on
/// schema violations.
RunConfig parse_config_string(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig parse_config(const std::filesystem::path& path);

/// YAML with every value spelled out; parsing it yields the same RunConfig.
std::string effective_config_yaml(const RunConfig& config);

/// Builds (box divisions times refinement) or loads the mesh, marks passive
/// boxes and checks every support/load tag against it.
Mesh build_mesh(const RunConfig& config, int refinement = 1);

void check_tags(const Mesh& mesh, const LoadCase& load_case);

}  // namespace fiberopt
