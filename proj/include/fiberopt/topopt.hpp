#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fiberopt/fem.hpp"
#include "fiberopt/material.hpp"
#include "fiberopt/mesh.hpp"

namespace fiberopt {

/// Settings for SIMP compliance minimization under a strong-material mass
/// bound. The bound is mass_fraction times the mass of the design domain
/// filled with strong material.
struct OptimizationConfig {
    double penalty = 3.0;
    double filter_radius = 1.5;  ///< mm
    double mass_fraction = 0.3;
    double move_limit = 0.2;
    double theta_min = 1e-3;
    double min_modulus_ratio = 1e-3;  ///< ersatz modulus over strong modulus
    int max_iterations = 100;
    double change_tolerance = 0.01;
    SolverSettings solver;
};

/// Throws ConfigError when a field is out of range.
void validate(const OptimizationConfig& config);

/// One density per element. Passive elements are pinned at 1.
struct DensityField {
    std::vector<double> theta;
    std::vector<bool> passive;

    std::size_t size() const { return theta.size(); }
};

DensityField make_density_field(const Mesh& mesh, double design_value);

struct MassReport {
    double mass = 0.0;       ///< mg, design elements only
    double full_mass = 0.0;  ///< mg, design domain filled with strong material
    double volume = 0.0;     ///< mm^3 of theta-weighted design volume
    double fraction = 0.0;   ///< mass / full_mass (equals the volume fraction)
};

MassReport mass(const DensityField& field, std::span<const double> volumes, double density);

/// theta~_e = sum_j w_ej theta_j on design elements; passive values copied.
DensityField filter_densities(const FilterGraph& graph, const DensityField& field);

/// Transpose of the filter: d/dtheta_j = sum_e w_ej d/dtheta~_e. Entries of
/// passive elements are zero.
std::vector<double> chain_rule_filter(const FilterGraph& graph, std::span<const double> d_filtered);

/// Per-element stiffness C(theta~) = E(theta~)/E_strong * C_strong.
std::vector<VoigtStiffness> simp_stiffness(const DensityField& physical, const Material& strong,
                                           const OptimizationConfig& config);

struct Sensitivities {
    double compliance = 0.0;
    std::vector<double> d_compliance;  ///< per element, w.r.t. the physical density; 0 on passive
    SolveResult solve;
};

/// Compliance of the physical (filtered) field and its adjoint gradient
/// -dE/dtheta~ / E_strong * u_e' k0_e u_e.
Sensitivities compliance_and_sensitivities(const Mesh& mesh, const DensityField& physical,
                                           const OptimizationConfig& config, const LoadCase& load_case,
                                           const Material& strong);

enum class OcStatus {
    Ok,
    UpperLimited,  ///< target above the mass reachable inside the move limits
    LowerLimited,  ///< target below it
    Degenerate,    ///< all sensitivities zero, theta returned unchanged
};

struct OcResult {
    std::vector<double> theta;
    double lambda = 0.0;
    double mass = 0.0;  ///< dm . theta
    OcStatus status = OcStatus::Ok;
};

/// Optimality-criteria step on the design variables with mass functional
/// M(theta) = dm . theta. The multiplier is found by bisection in log space.
OcResult oc_update(std::span<const double> theta, std::span<const double> d_compliance,
                   std::span<const double> d_mass, double mass_bound, double move_limit, double theta_min);

struct IterationRecord {
    int iteration = 0;
    double compliance = 0.0;
    double mass_fraction = 0.0;
    double max_change = 0.0;
    double min_theta = 0.0;
    double max_theta = 0.0;
    OcStatus oc_status = OcStatus::Ok;
};

struct OptimizationResult {
    DensityField design;    ///< raw design variables
    DensityField physical;  ///< filtered densities used for analysis
    std::vector<IterationRecord> history;
    bool converged = false;
    int iterations = 0;
    double final_compliance = 0.0;  ///< analysis of the final physical field
    MassReport final_mass;
    SolveResult final_solve;
};

using IterationObserver = std::function<void(const IterationRecord&, const DensityField& design)>;

/// filter -> solve -> sensitivities -> chain rule -> OC, until the largest
/// design change drops below change_tolerance or max_iterations is reached.
/// The observer sees each updated design.
OptimizationResult optimize(const Mesh& mesh, const LoadCase& load_case, const Material& strong,
                            const OptimizationConfig& config, const IterationObserver& observer = {});

}  // namespace fiberopt
