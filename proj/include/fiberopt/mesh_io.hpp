#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fiberopt/mesh.hpp"

namespace fiberopt {

enum class MeshFormat { GmshAsciiV2, NativeJson };

/// Parses "gmsh" / "msh" / "json" (case-sensitive). Throws ConfigError.
MeshFormat parse_mesh_format(const std::string& name);

/// Reads and validates a mesh. Gmsh triangles become facet sets named by
/// their physical name (or number), and each facet set also yields a node
/// set with the same tag. Tets whose physical name is "passive" are passive.
Mesh load_mesh(const std::filesystem::path& path, MeshFormat format);

Mesh parse_mesh_json(const std::string& text);
Mesh parse_mesh_gmsh(const std::string& text);

std::string mesh_to_json(const Mesh& mesh);
std::string mesh_to_gmsh(const Mesh& mesh);

void save_mesh(const Mesh& mesh, const std::filesystem::path& path, MeshFormat format);

/// Node-order independent form: nodes sorted lexicographically, every index
/// remapped, element and facet tuples sorted, lists sorted. Two meshes with
/// equal canonical forms describe the same discretization.
Mesh canonical_form(const Mesh& mesh);

bool same_canonical(const Mesh& a, const Mesh& b);

/// Named fields attached to a legacy VTK file.
struct VtkFields {
    std::vector<std::pair<std::string, std::vector<Vec3>>> point_vectors;
    std::vector<std::pair<std::string, std::vector<double>>> point_scalars;
    std::vector<std::pair<std::string, std::vector<double>>> cell_scalars;
};

/// Legacy ASCII VTK 3.0 UNSTRUCTURED_GRID, tets as cell type 10. Values are
/// printed with 9 significant digits.
std::string vtk_to_string(const Mesh& mesh, const VtkFields& fields, const std::string& title = "fiberopt");

void export_vtk(const Mesh& mesh, const VtkFields& fields, const std::filesystem::path& path);

/// Writes text to a file, throwing std::runtime_error on I/O failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace fiberopt
