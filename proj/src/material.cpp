#include "fiberopt/material.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fiberopt/error.hpp"

namespace fiberopt {

void validate_material(const Material& m) {
    if (!(m.youngs_modulus > 0.0)) {
        throw ConfigError(fmt::format("material '{}': Young's modulus must be positive", m.name));
    }
    if (!(m.poisson_ratio > -1.0 && m.poisson_ratio < 0.5)) {
        throw ConfigError(fmt::format("material '{}': Poisson ratio {} outside (-1, 0.5)", m.name, m.poisson_ratio));
    }
    if (!(m.density > 0.0)) {
        throw ConfigError(fmt::format("material '{}': density must be positive", m.name));
    }
}

Material catalog(const std::string& name) {
    if (name == "PMMA") return {"PMMA", 2550.0, 0.3, 1.19};
    if (name == "E-glass") return {"E-glass", 72000.0, 0.2, 2.54};
    throw ConfigError(fmt::format("unknown material '{}'", name));
}

std::pair<double, double> lame_parameters(double youngs_modulus, double poisson_ratio) {
    const double lambda = youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
    const double mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
    return {lambda, mu};
}

VoigtStiffness isotropic_stiffness(double youngs_modulus, double poisson_ratio) {
    validate_material({"", youngs_modulus, poisson_ratio, 1.0});
    const auto [lambda, mu] = lame_parameters(youngs_modulus, poisson_ratio);
    VoigtStiffness c = VoigtStiffness::Zero();
    c.topLeftCorner<3, 3>().setConstant(lambda);
    for (int i = 0; i < 3; ++i) {
        c(i, i) = lambda + 2.0 * mu;
        c(i + 3, i + 3) = mu;
    }
    return c;
}

double simp_modulus(double theta, double penalty, double e_strong, double e_min) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::domain_error(fmt::format("density {} outside [0, 1]", theta));
    return e_min + std::pow(theta, penalty) * (e_strong - e_min);
}

double simp_modulus_derivative(double theta, double penalty, double e_strong, double e_min) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw std::domain_error(fmt::format("density {} outside [0, 1]", theta));
    return penalty * std::pow(theta, penalty - 1.0) * (e_strong - e_min);
}

}  // namespace fiberopt
