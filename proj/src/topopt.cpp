#include "fiberopt/topopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "fiberopt/error.hpp"

namespace fiberopt {

void validate(const OptimizationConfig& c) {
    if (!(c.mass_fraction > 0.0 && c.mass_fraction <= 1.0))
        throw ConfigError(fmt::format("mass_fraction {} out of range (0, 1]", c.mass_fraction));
    if (!(c.move_limit > 0.0 && c.move_limit <= 1.0))
        throw ConfigError(fmt::format("move_limit {} out of range (0, 1]", c.move_limit));
    if (!(c.penalty >= 1.0)) throw ConfigError(fmt::format("penalty {} must be >= 1", c.penalty));
    if (!(c.theta_min > 0.0 && c.theta_min < 1.0))
        throw ConfigError(fmt::format("theta_min {} out of range (0, 1)", c.theta_min));
    if (!(c.min_modulus_ratio > 0.0 && c.min_modulus_ratio < 1.0))
        throw ConfigError(fmt::format("min_modulus_ratio {} out of range (0, 1)", c.min_modulus_ratio));
    if (!(c.filter_radius >= 0.0)) throw ConfigError("filter_radius must be >= 0");
    if (c.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(c.change_tolerance > 0.0)) throw ConfigError("change_tolerance must be positive");
    if (!(c.solver.tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
}

DensityField make_density_field(const Mesh& mesh, double design_value) {
    DensityField f;
    f.theta.resize(mesh.num_elements());
    f.passive.resize(mesh.num_elements());
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        f.passive[e] = mesh.elements[e].region == Region::Passive;
        f.theta[e] = f.passive[e] ? 1.0 : design_value;
    }
    return f;
}

MassReport mass(const DensityField& field, std::span<const double> volumes, double density) {
    if (volumes.size() != field.size()) throw std::invalid_argument("mass: length mismatch");
    MassReport r;
    double full_volume = 0.0;
    for (std::size_t e = 0; e < field.size(); ++e) {
        if (field.passive[e]) continue;
        r.volume += field.theta[e] * volumes[e];
        full_volume += volumes[e];
    }
    r.mass = mass_mg(density, r.volume);
    r.full_mass = mass_mg(density, full_volume);
    r.fraction = full_volume > 0.0 ? r.volume / full_volume : 0.0;
    return r;
}

DensityField filter_densities(const FilterGraph& graph, const DensityField& field) {
    DensityField out = field;
    for (std::size_t e = 0; e < field.size(); ++e) {
        if (field.passive[e]) continue;
        double s = 0.0;
        for (const auto& [j, w] : graph.rows[e]) s += w * field.theta[j];
        // weights sum to 1 only up to rounding
        out.theta[e] = std::clamp(s, 0.0, 1.0);
    }
    return out;
}

std::vector<double> chain_rule_filter(const FilterGraph& graph, std::span<const double> d_filtered) {
    std::vector<double> out(d_filtered.size(), 0.0);
    for (std::size_t e = 0; e < graph.rows.size(); ++e)
        for (const auto& [j, w] : graph.rows[e]) out[j] += w * d_filtered[e];
    return out;
}

std::vector<VoigtStiffness> simp_stiffness(const DensityField& physical, const Material& strong,
                                           const OptimizationConfig& config) {
    const VoigtStiffness c0 = isotropic_stiffness(strong.youngs_modulus, strong.poisson_ratio);
    const double e_strong = strong.youngs_modulus;
    const double e_min = config.min_modulus_ratio * e_strong;
    std::vector<VoigtStiffness> out(physical.size());
    for (std::size_t e = 0; e < out.size(); ++e) {
        out[e] = (simp_modulus(physical.theta[e], config.penalty, e_strong, e_min) / e_strong) * c0;
    }
    return out;
}

Sensitivities compliance_and_sensitivities(const Mesh& mesh, const DensityField& physical,
                                           const OptimizationConfig& config, const LoadCase& load_case,
                                           const Material& strong) {
    const std::vector<VoigtStiffness> stiffness = simp_stiffness(physical, strong, config);
    Sensitivities s;
    s.solve = analyze(mesh, stiffness, load_case, config.solver);
    s.compliance = s.solve.compliance;

    const VoigtStiffness c0 = isotropic_stiffness(strong.youngs_modulus, strong.poisson_ratio);
    const double e_strong = strong.youngs_modulus;
    const double e_min = config.min_modulus_ratio * e_strong;
    s.d_compliance.assign(physical.size(), 0.0);
    for (std::size_t e = 0; e < physical.size(); ++e) {
        if (physical.passive[e]) continue;
        double volume = 0.0;
        const StrainDisplacement b = strain_displacement_tet4(element_coords(mesh, e), &volume);
        const Voigt strain = b * gather(mesh, e, s.solve.displacement);
        const double energy = volume * strain.dot(c0 * strain);
        const double de = simp_modulus_derivative(physical.theta[e], config.penalty, e_strong, e_min);
        s.d_compliance[e] = -de / e_strong * energy;
    }
    return s;
}

OcResult oc_update(std::span<const double> theta, std::span<const double> d_compliance,
                   std::span<const double> d_mass, double mass_bound, double move_limit, double theta_min) {
    const std::size_t n = theta.size();
    if (d_compliance.size() != n || d_mass.size() != n) throw std::invalid_argument("oc_update: length mismatch");

    OcResult r;
    r.theta.assign(theta.begin(), theta.end());
    std::vector<double> lo(n), hi(n), ratio(n);
    bool any_signal = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(d_mass[i] > 0.0)) throw std::invalid_argument("oc_update: mass gradient must be positive");
        lo[i] = std::max(theta_min, theta[i] - move_limit);
        hi[i] = std::min(1.0, theta[i] + move_limit);
        ratio[i] = std::max(0.0, -d_compliance[i]) / d_mass[i];
        any_signal = any_signal || ratio[i] > 0.0;
    }
    auto mass_of = [&](const std::vector<double>& t) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += d_mass[i] * t[i];
        return m;
    };
    if (!any_signal) {
        r.status = OcStatus::Degenerate;
        r.mass = mass_of(r.theta);
        return r;
    }

    auto update = [&](double lambda, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = std::clamp(theta[i] * std::sqrt(ratio[i] / lambda), lo[i], hi[i]);
        }
    };

    // Below l1 every element with signal sits at its upper bound, above l2
    // every element sits at its lower bound.
    double l1 = std::numeric_limits<double>::infinity();
    double l2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (ratio[i] <= 0.0) continue;
        const double base = theta[i] * theta[i] * ratio[i];
        l1 = std::min(l1, base / (hi[i] * hi[i]));
        l2 = std::max(l2, base / (lo[i] * lo[i]));
    }
    l1 *= 0.5;
    l2 *= 2.0;

    std::vector<double> trial(n);
    update(l1, trial);
    const double upper = mass_of(trial);
    if (mass_bound >= upper) {
        r.theta = trial;
        r.lambda = l1;
        r.mass = upper;
        r.status = mass_bound > upper * (1.0 + 1e-9) ? OcStatus::UpperLimited : OcStatus::Ok;
        return r;
    }
    update(l2, trial);
    const double lower = mass_of(trial);
    if (mass_bound <= lower) {
        r.theta = trial;
        r.lambda = l2;
        r.mass = lower;
        r.status = mass_bound < lower * (1.0 - 1e-9) ? OcStatus::LowerLimited : OcStatus::Ok;
        return r;
    }

    for (int it = 0; it < 400 && l2 > l1 * (1.0 + 1e-15); ++it) {
        const double mid = std::sqrt(l1 * l2);
        if (mid <= l1 || mid >= l2) break;
        update(mid, trial);
        if (mass_of(trial) > mass_bound) {
            l1 = mid;
        } else {
            l2 = mid;
        }
    }
    update(l2, r.theta);
    r.lambda = l2;
    r.mass = mass_of(r.theta);
    return r;
}

namespace {

IterationRecord summarize(int iteration, double compliance, double mass_fraction, double change,
                          const DensityField& design, OcStatus status) {
    IterationRecord rec;
    rec.iteration = iteration;
    rec.compliance = compliance;
    rec.mass_fraction = mass_fraction;
    rec.max_change = change;
    rec.min_theta = 1.0;
    rec.max_theta = 0.0;
    for (std::size_t e = 0; e < design.size(); ++e) {
        if (design.passive[e]) continue;
        rec.min_theta = std::min(rec.min_theta, design.theta[e]);
        rec.max_theta = std::max(rec.max_theta, design.theta[e]);
    }
    rec.oc_status = status;
    return rec;
}

}  // namespace

OptimizationResult optimize(const Mesh& mesh, const LoadCase& load_case, const Material& strong,
                            const OptimizationConfig& config, const IterationObserver& observer) {
    validate(config);
    validate_material(strong);

    const FilterGraph graph = build_filter_graph(mesh, config.filter_radius);
    const std::vector<double> volumes = element_volumes(mesh);

    std::vector<std::size_t> design_ids;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e)
        if (mesh.elements[e].region == Region::Design) design_ids.push_back(e);
    if (design_ids.empty()) throw ConfigError("no design elements to optimize");

    std::vector<double> element_mass(mesh.num_elements(), 0.0);
    for (std::size_t e : design_ids) element_mass[e] = mass_mg(strong.density, volumes[e]);
    const std::vector<double> dm_full = chain_rule_filter(graph, element_mass);

    OptimizationResult result;
    result.design = make_density_field(mesh, std::max(config.theta_min, config.mass_fraction));
    const double full_mass = mass(result.design, volumes, strong.density).full_mass;
    const double mass_bound = config.mass_fraction * full_mass;

    const std::size_t nd = design_ids.size();
    std::vector<double> theta(nd), dc(nd), dm(nd);
    for (std::size_t i = 0; i < nd; ++i) dm[i] = dm_full[design_ids[i]];

    for (int it = 1; it <= config.max_iterations; ++it) {
        const DensityField physical = filter_densities(graph, result.design);
        const Sensitivities sens = compliance_and_sensitivities(mesh, physical, config, load_case, strong);
        const std::vector<double> dc_full = chain_rule_filter(graph, sens.d_compliance);

        for (std::size_t i = 0; i < nd; ++i) {
            theta[i] = result.design.theta[design_ids[i]];
            dc[i] = dc_full[design_ids[i]];
        }
        const OcResult oc = oc_update(theta, dc, dm, mass_bound, config.move_limit, config.theta_min);

        double change = 0.0;
        for (std::size_t i = 0; i < nd; ++i) {
            change = std::max(change, std::abs(oc.theta[i] - theta[i]));
            result.design.theta[design_ids[i]] = oc.theta[i];
        }
        const double fraction = mass(physical, volumes, strong.density).fraction;
        result.history.push_back(summarize(it, sens.compliance, fraction, change, result.design, oc.status));
        result.iterations = it;
        if (observer) observer(result.history.back(), result.design);
        if (change < config.change_tolerance) {
            result.converged = true;
            break;
        }
    }

    result.physical = filter_densities(graph, result.design);
    result.final_solve = analyze(mesh, simp_stiffness(result.physical, strong, config), load_case, config.solver);
    result.final_compliance = result.final_solve.compliance;
    result.final_mass = mass(result.physical, volumes, strong.density);
    return result;
}

}  // namespace fiberopt
