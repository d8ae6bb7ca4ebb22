#pragma once

#include <string>
#include <utility>

#include <Eigen/Core>

namespace fiberopt {

/// Isotropic linear elastic material. Units: MPa, dimensionless, g/cm^3.
struct Material {
    std::string name;
    double youngs_modulus = 0.0;
    double poisson_ratio = 0.0;
    double density = 0.0;
};

/// 6x6 stiffness in Voigt order xx, yy, zz, yz, xz, xy (engineering shear).
using VoigtStiffness = Eigen::Matrix<double, 6, 6>;

/// Throws ConfigError unless E > 0, -1 < nu < 0.5 and density > 0.
void validate_material(const Material& m);

/// "PMMA" or "E-glass". Throws ConfigError for anything else.
Material catalog(const std::string& name);

/// Lame parameters (lambda, mu) for (E, nu).
std::pair<double, double> lame_parameters(double youngs_modulus, double poisson_ratio);

VoigtStiffness isotropic_stiffness(double youngs_modulus, double poisson_ratio);

/// Modified SIMP interpolation E_min + theta^p (E_strong - E_min).
double simp_modulus(double theta, double penalty, double e_strong, double e_min);

/// d/dtheta of simp_modulus.
double simp_modulus_derivative(double theta, double penalty, double e_strong, double e_min);

/// The density figure in g/cm^3 is numerically the mass in mg of one mm^3.
inline double mass_mg(double density_g_cm3, double volume_mm3) { return density_g_cm3 * volume_mm3; }

}  // namespace fiberopt
