#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fiberopt/fem.hpp"
#include "fiberopt/material.hpp"
#include "fiberopt/topopt.hpp"

namespace fiberopt {

enum class MaterialLabel : std::uint8_t { Weak = 0, Strong = 1 };

/// Binary strong/weak assignment after thresholding.
struct ReinforcementDesign {
    std::vector<MaterialLabel> assignment;
    double strong_volume = 0.0;         ///< mm^3 over all strong elements, passive included
    double strong_design_volume = 0.0;  ///< mm^3 over strong design elements
    double strong_mass_fraction = 0.0;  ///< strong design volume / design volume
};

/// Strong iff theta_e >= cutoff on design elements; passive elements get
/// passive_label.
ReinforcementDesign threshold(const DensityField& field, std::span<const double> volumes, double cutoff,
                              MaterialLabel passive_label = MaterialLabel::Strong);

/// Design with every element labeled the same.
ReinforcementDesign uniform_design(std::span<const double> volumes, const std::vector<bool>& passive,
                                   MaterialLabel label);

/// Strong elements get the strong stiffness, all others the weak one.
std::vector<VoigtStiffness> fill_voids(const ReinforcementDesign& design, const Material& strong,
                                       const Material& weak);

SolveResult analyze_design(const Mesh& mesh, std::span<const VoigtStiffness> stiffness, const LoadCase& load_case,
                           const SolverSettings& settings);

struct DisplacementStats {
    double max = 0.0;
    double mean = 0.0;
    double variance = 0.0;  ///< population variance of node magnitudes
};

DisplacementStats displacement_stats(std::span<const double> magnitudes);

struct Histogram {
    std::vector<double> edges;  ///< bins + 1 equal-width edges from 0
    std::vector<std::size_t> baseline;
    std::vector<std::size_t> reinforced;
};

/// Shared equal-width bins over [0, max(a, b)]; the maximum lands in the
/// last bin.
Histogram shared_histogram(std::span<const double> a, std::span<const double> b, int bins);

struct ComparisonReport {
    DisplacementStats baseline;
    DisplacementStats reinforced;
    double max_reduction_percent = 0.0;
    double mean_reduction_percent = 0.0;
    Histogram histogram;
};

/// Per-node |u| statistics of both runs. Throws std::invalid_argument on
/// mismatched node counts or bins < 1.
ComparisonReport compare(const SolveResult& baseline, const SolveResult& reinforced, int bins);

double percent_reduction(double baseline, double reinforced);

std::string report_json(const ComparisonReport& report);
std::string report_text(const ComparisonReport& report);
std::string histogram_csv(const Histogram& histogram);

}  // namespace fiberopt
