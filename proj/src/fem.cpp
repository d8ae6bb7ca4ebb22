#include "fiberopt/fem.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "fiberopt/error.hpp"

namespace fiberopt {

std::array<Vec3, 4> element_coords(const Mesh& mesh, std::size_t e) {
    const auto& c = mesh.elements[e].conn;
    return {mesh.nodes[c[0]], mesh.nodes[c[1]], mesh.nodes[c[2]], mesh.nodes[c[3]]};
}

StrainDisplacement strain_displacement_tet4(const std::array<Vec3, 4>& x, double* volume) {
    Eigen::Matrix3d jac;
    jac.col(0) = x[1] - x[0];
    jac.col(1) = x[2] - x[0];
    jac.col(2) = x[3] - x[0];
    const double det = jac.determinant();
    const double h = std::max({jac.col(0).norm(), jac.col(1).norm(), jac.col(2).norm()});
    if (!(std::abs(det) > 1e-12 * h * h * h)) {
        throw MeshError(fmt::format("degenerate tetrahedron (6V = {})", det));
    }
    if (volume) *volume = std::abs(det) / 6.0;

    Eigen::Matrix<double, 3, 4> dn_ref;
    dn_ref << -1, 1, 0, 0,
              -1, 0, 1, 0,
              -1, 0, 0, 1;
    const Eigen::Matrix<double, 3, 4> dn = jac.transpose().inverse() * dn_ref;

    StrainDisplacement b = StrainDisplacement::Zero();
    for (int a = 0; a < 4; ++a) {
        const double nx = dn(0, a), ny = dn(1, a), nz = dn(2, a);
        const int c = 3 * a;
        b(0, c) = nx;
        b(1, c + 1) = ny;
        b(2, c + 2) = nz;
        b(3, c + 1) = nz;
        b(3, c + 2) = ny;
        b(4, c) = nz;
        b(4, c + 2) = nx;
        b(5, c) = ny;
        b(5, c + 1) = nx;
    }
    return b;
}

ElementStiffness element_stiffness_tet4(const std::array<Vec3, 4>& x, const VoigtStiffness& c) {
    double volume = 0.0;
    const StrainDisplacement b = strain_displacement_tet4(x, &volume);
    ElementStiffness k = volume * (b.transpose() * c * b);
    // Symmetric up to rounding; make it exact.
    return 0.5 * (k + k.transpose());
}

CsrMatrix assemble(const Mesh& mesh, std::span<const VoigtStiffness> per_element) {
    if (per_element.size() != mesh.num_elements()) {
        throw std::invalid_argument("assemble: need one stiffness per element");
    }
    const std::size_t nn = mesh.num_nodes();

    std::vector<std::vector<int>> adjacency(nn);
    for (const auto& tet : mesh.elements)
        for (int a : tet.conn)
            for (int b : tet.conn) adjacency[a].push_back(b);
    for (auto& row : adjacency) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }

    CsrMatrix k;
    k.rows = 3 * nn;
    k.row_ptr.assign(k.rows + 1, 0);
    for (std::size_t i = 0; i < nn; ++i)
        for (int a = 0; a < 3; ++a) k.row_ptr[3 * i + a + 1] = k.row_ptr[3 * i + a] + 3 * adjacency[i].size();
    k.col.resize(k.row_ptr.back());
    k.val.assign(k.row_ptr.back(), 0.0);
    for (std::size_t i = 0; i < nn; ++i)
        for (int a = 0; a < 3; ++a) {
            std::size_t pos = k.row_ptr[3 * i + a];
            for (int j : adjacency[i])
                for (int b = 0; b < 3; ++b) k.col[pos++] = 3 * j + b;
        }

    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const auto& conn = mesh.elements[e].conn;
        const ElementStiffness ke = element_stiffness_tet4(element_coords(mesh, e), per_element[e]);
        for (int a = 0; a < 4; ++a) {
            const auto& row_nodes = adjacency[conn[a]];
            for (int b = 0; b < 4; ++b) {
                const auto slot = static_cast<std::size_t>(
                    std::lower_bound(row_nodes.begin(), row_nodes.end(), conn[b]) - row_nodes.begin());
                for (int i = 0; i < 3; ++i) {
                    const std::size_t base = k.row_ptr[3 * conn[a] + i] + 3 * slot;
                    for (int j = 0; j < 3; ++j) k.val[base + j] += ke(3 * a + i, 3 * b + j);
                }
            }
        }
    }
    return k;
}

AssembledLoad assemble_load_case(const Mesh& mesh, const LoadCase& load_case) {
    AssembledLoad out;
    out.force = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_dofs()));
    for (const auto& load : load_case.loads) {
        for (const auto& [node, f] : distribute_load(mesh, load.tag, load.force)) {
            out.force.segment<3>(3 * node) += f;
        }
    }
    for (const auto& support : load_case.supports) {
        for (int node : resolve_node_tag(mesh, support.tag)) {
            for (int c = 0; c < 3; ++c)
                if (support.components[c]) out.fixed_dofs.push_back(3 * node + c);
        }
    }
    std::sort(out.fixed_dofs.begin(), out.fixed_dofs.end());
    out.fixed_dofs.erase(std::unique(out.fixed_dofs.begin(), out.fixed_dofs.end()), out.fixed_dofs.end());
    for (int d : out.fixed_dofs) out.force[d] = 0.0;
    return out;
}

void apply_dirichlet(CsrMatrix& k, Eigen::VectorXd& force, std::span<const int> fixed_dofs,
                     std::span<const double> values) {
    if (!values.empty() && values.size() != fixed_dofs.size()) {
        throw std::invalid_argument("apply_dirichlet: values must match fixed DOFs");
    }
    std::vector<double> prescribed(k.rows, 0.0);
    std::vector<char> fixed(k.rows, 0);
    for (std::size_t i = 0; i < fixed_dofs.size(); ++i) {
        fixed[fixed_dofs[i]] = 1;
        if (!values.empty()) prescribed[fixed_dofs[i]] = values[i];
    }

    for (std::size_t i = 0; i < k.rows; ++i) {
        for (std::size_t p = k.row_ptr[i]; p < k.row_ptr[i + 1]; ++p) {
            const int j = k.col[p];
            if (fixed[i]) {
                k.val[p] = static_cast<std::size_t>(j) == i ? 1.0 : 0.0;
            } else if (fixed[j]) {
                force[static_cast<Eigen::Index>(i)] -= k.val[p] * prescribed[j];
                k.val[p] = 0.0;
            }
        }
    }
    for (int d : fixed_dofs) force[d] = prescribed[d];
}

double compliance(const Eigen::VectorXd& force, const Eigen::VectorXd& displacement) {
    if (force.size() != displacement.size()) throw std::invalid_argument("compliance: length mismatch");
    return force.dot(displacement);
}

SolveResult solve(const CsrMatrix& k, const Eigen::VectorXd& force, const SolverSettings& settings,
                  const Eigen::VectorXd* initial_guess) {
    SolveResult result;
    result.displacement = initial_guess ? *initial_guess : Eigen::VectorXd::Zero(force.size());
    const CgReport report = pcg(k, force, result.displacement, settings);
    result.cg_iterations = report.iterations;
    result.final_residual = report.relative_residual;
    result.compliance = compliance(force, result.displacement);
    return result;
}

SolveResult analyze(const Mesh& mesh, std::span<const VoigtStiffness> per_element, const LoadCase& load_case,
                    const SolverSettings& settings) {
    CsrMatrix k = assemble(mesh, per_element);
    AssembledLoad load = assemble_load_case(mesh, load_case);
    apply_dirichlet(k, load.force, load.fixed_dofs);
    SolveResult result = solve(k, load.force, settings);
    for (int d : load.fixed_dofs) result.displacement[d] = 0.0;
    return result;
}

ElementVector gather(const Mesh& mesh, std::size_t e, const Eigen::VectorXd& displacement) {
    ElementVector ue;
    const auto& conn = mesh.elements[e].conn;
    for (int a = 0; a < 4; ++a) ue.segment<3>(3 * a) = displacement.segment<3>(3 * conn[a]);
    return ue;
}

double von_mises(const Voigt& s) {
    const double d01 = s[0] - s[1], d12 = s[1] - s[2], d20 = s[2] - s[0];
    const double shear = s[3] * s[3] + s[4] * s[4] + s[5] * s[5];
    return std::sqrt(std::max(0.0, 0.5 * (d01 * d01 + d12 * d12 + d20 * d20) + 3.0 * shear));
}

Eigen::Vector3d principal_stresses(const Voigt& s) {
    Eigen::Matrix3d t;
    t << s[0], s[5], s[4],
         s[5], s[1], s[3],
         s[4], s[3], s[2];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(t, Eigen::EigenvaluesOnly);
    return eig.eigenvalues();
}

std::vector<ElementStress> recover_stress(const Mesh& mesh, std::span<const VoigtStiffness> per_element,
                                          const Eigen::VectorXd& displacement) {
    std::vector<ElementStress> out(mesh.num_elements());
    for (std::size_t e = 0; e < out.size(); ++e) {
        const StrainDisplacement b = strain_displacement_tet4(element_coords(mesh, e));
        out[e].stress = per_element[e] * (b * gather(mesh, e, displacement));
        out[e].von_mises = von_mises(out[e].stress);
        out[e].max_principal = principal_stresses(out[e].stress)[2];
    }
    return out;
}

std::vector<double> nodal_average(const Mesh& mesh, std::span<const double> element_values) {
    std::vector<double> sum(mesh.num_nodes(), 0.0), weight(mesh.num_nodes(), 0.0);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const double v = element_volume(mesh, e);
        for (int n : mesh.elements[e].conn) {
            sum[n] += v * element_values[e];
            weight[n] += v;
        }
    }
    for (std::size_t i = 0; i < sum.size(); ++i)
        if (weight[i] > 0.0) sum[i] /= weight[i];
    return sum;
}

std::vector<double> displacement_magnitudes(const Eigen::VectorXd& displacement) {
    std::vector<double> out(static_cast<std::size_t>(displacement.size() / 3));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = displacement.segment<3>(static_cast<Eigen::Index>(3 * i)).norm();
    }
    return out;
}

}  // namespace fiberopt
