#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fiberopt/material.hpp"
#include "fiberopt/mesh.hpp"
#include "fiberopt/sparse.hpp"

namespace fiberopt {

using ElementStiffness = Eigen::Matrix<double, 12, 12>;
using StrainDisplacement = Eigen::Matrix<double, 6, 12>;
using ElementVector = Eigen::Matrix<double, 12, 1>;
using Voigt = Eigen::Matrix<double, 6, 1>;

std::array<Vec3, 4> element_coords(const Mesh& mesh, std::size_t e);

/// Constant strain-displacement matrix of a linear tet; DOFs ordered
/// (u0x, u0y, u0z, u1x, ...). Writes the unsigned volume to *volume.
/// Throws MeshError for a degenerate tet.
StrainDisplacement strain_displacement_tet4(const std::array<Vec3, 4>& x, double* volume = nullptr);

/// k_e = V B^T C B.
ElementStiffness element_stiffness_tet4(const std::array<Vec3, 4>& x, const VoigtStiffness& c);

/// Global stiffness, 3 DOFs per node. The pattern is the node adjacency
/// graph expanded to 3x3 blocks, so it does not depend on the values.
CsrMatrix assemble(const Mesh& mesh, std::span<const VoigtStiffness> per_element);

struct Support {
    std::string tag;
    std::array<bool, 3> components{true, true, true};
};

struct SurfaceLoad {
    std::string tag;
    Vec3 force = Vec3::Zero();
};

/// Homogeneous supports on node (or facet) sets plus total forces on facet
/// sets.
struct LoadCase {
    std::vector<Support> supports;
    std::vector<SurfaceLoad> loads;
};

struct AssembledLoad {
    Eigen::VectorXd force;
    std::vector<int> fixed_dofs;  ///< sorted, unique
};

/// Resolves tags against the mesh; force entries on fixed DOFs are zeroed.
AssembledLoad assemble_load_case(const Mesh& mesh, const LoadCase& load_case);

/// Symmetric elimination: fixed rows and columns zeroed, unit diagonal,
/// force set to the prescribed value (zero when values is empty) with the
/// eliminated column moved to the right-hand side.
void apply_dirichlet(CsrMatrix& k, Eigen::VectorXd& force, std::span<const int> fixed_dofs,
                     std::span<const double> values = {});

struct SolveResult {
    Eigen::VectorXd displacement;  ///< per DOF, mm
    double compliance = 0.0;       ///< f'u, N mm
    int cg_iterations = 0;
    double final_residual = 0.0;

    Vec3 node_displacement(std::size_t i) const {
        return displacement.segment<3>(static_cast<Eigen::Index>(3 * i));
    }
};

/// Solves K u = f by Jacobi-PCG; u starts from *initial_guess when given.
SolveResult solve(const CsrMatrix& k, const Eigen::VectorXd& force, const SolverSettings& settings,
                  const Eigen::VectorXd* initial_guess = nullptr);

double compliance(const Eigen::VectorXd& force, const Eigen::VectorXd& displacement);

/// Assemble, apply supports and loads, solve. Fixed DOFs are exactly zero.
SolveResult analyze(const Mesh& mesh, std::span<const VoigtStiffness> per_element, const LoadCase& load_case,
                    const SolverSettings& settings);

ElementVector gather(const Mesh& mesh, std::size_t e, const Eigen::VectorXd& displacement);

struct ElementStress {
    Voigt stress = Voigt::Zero();  ///< MPa, Voigt order
    double von_mises = 0.0;
    double max_principal = 0.0;
};

double von_mises(const Voigt& s);
Eigen::Vector3d principal_stresses(const Voigt& s);  ///< ascending

std::vector<ElementStress> recover_stress(const Mesh& mesh, std::span<const VoigtStiffness> per_element,
                                          const Eigen::VectorXd& displacement);

/// Volume-weighted average of element values onto nodes. For display only.
std::vector<double> nodal_average(const Mesh& mesh, std::span<const double> element_values);

std::vector<double> displacement_magnitudes(const Eigen::VectorXd& displacement);

}  // namespace fiberopt
