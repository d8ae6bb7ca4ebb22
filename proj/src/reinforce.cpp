#include "fiberopt/reinforce.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "fiberopt/format.hpp"

namespace fiberopt {

namespace {

void tally(ReinforcementDesign& d, std::span<const double> volumes, const std::vector<bool>& passive) {
    double design_volume = 0.0;
    for (std::size_t e = 0; e < volumes.size(); ++e) {
        const bool strong = d.assignment[e] == MaterialLabel::Strong;
        if (strong) d.strong_volume += volumes[e];
        if (!passive[e]) {
            design_volume += volumes[e];
            if (strong) d.strong_design_volume += volumes[e];
        }
    }
    d.strong_mass_fraction = design_volume > 0.0 ? d.strong_design_volume / design_volume : 0.0;
}

}  // namespace

ReinforcementDesign threshold(const DensityField& field, std::span<const double> volumes, double cutoff,
                              MaterialLabel passive_label) {
    if (!(cutoff > 0.0 && cutoff < 1.0)) throw std::invalid_argument(fmt::format("cutoff {} outside (0, 1)", cutoff));
    if (volumes.size() != field.size()) throw std::invalid_argument("threshold: length mismatch");
    ReinforcementDesign d;
    d.assignment.resize(field.size());
    for (std::size_t e = 0; e < field.size(); ++e) {
        if (field.passive[e]) {
            d.assignment[e] = passive_label;
        } else {
            d.assignment[e] = field.theta[e] >= cutoff ? MaterialLabel::Strong : MaterialLabel::Weak;
        }
    }
    tally(d, volumes, field.passive);
    return d;
}

ReinforcementDesign uniform_design(std::span<const double> volumes, const std::vector<bool>& passive,
                                   MaterialLabel label) {
    ReinforcementDesign d;
    d.assignment.assign(volumes.size(), label);
    tally(d, volumes, passive);
    return d;
}

std::vector<VoigtStiffness> fill_voids(const ReinforcementDesign& design, const Material& strong,
                                       const Material& weak) {
    const VoigtStiffness cs = isotropic_stiffness(strong.youngs_modulus, strong.poisson_ratio);
    const VoigtStiffness cw = isotropic_stiffness(weak.youngs_modulus, weak.poisson_ratio);
    std::vector<VoigtStiffness> out(design.assignment.size());
    for (std::size_t e = 0; e < out.size(); ++e) out[e] = design.assignment[e] == MaterialLabel::Strong ? cs : cw;
    return out;
}

SolveResult analyze_design(const Mesh& mesh, std::span<const VoigtStiffness> stiffness, const LoadCase& load_case,
                           const SolverSettings& settings) {
    return analyze(mesh, stiffness, load_case, settings);
}

DisplacementStats displacement_stats(std::span<const double> magnitudes) {
    DisplacementStats s;
    if (magnitudes.empty()) return s;
    double sum = 0.0;
    for (double m : magnitudes) {
        s.max = std::max(s.max, m);
        sum += m;
    }
    s.mean = sum / static_cast<double>(magnitudes.size());
    double sq = 0.0;
    for (double m : magnitudes) sq += (m - s.mean) * (m - s.mean);
    s.variance = sq / static_cast<double>(magnitudes.size());
    return s;
}

Histogram shared_histogram(std::span<const double> a, std::span<const double> b, int bins) {
    if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
    double top = 0.0;
    for (double x : a) top = std::max(top, x);
    for (double x : b) top = std::max(top, x);
    // All-zero fields still get a well-formed histogram.
    const double width = top > 0.0 ? top / bins : 1.0 / bins;

    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) h.edges[i] = i == bins && top > 0.0 ? top : width * i;
    auto fill = [&](std::span<const double> values, std::vector<std::size_t>& counts) {
        counts.assign(static_cast<std::size_t>(bins), 0);
        for (double x : values) {
            auto bin = static_cast<int>(x / width);
            ++counts[static_cast<std::size_t>(std::clamp(bin, 0, bins - 1))];
        }
    };
    fill(a, h.baseline);
    fill(b, h.reinforced);
    return h;
}

double percent_reduction(double baseline, double reinforced) {
    return baseline > 0.0 ? 100.0 * (1.0 - reinforced / baseline) : 0.0;
}

ComparisonReport compare(const SolveResult& baseline, const SolveResult& reinforced, int bins) {
    if (baseline.displacement.size() != reinforced.displacement.size()) {
        throw std::invalid_argument("compare: baseline and reinforced node counts differ");
    }
    const std::vector<double> mb = displacement_magnitudes(baseline.displacement);
    const std::vector<double> mr = displacement_magnitudes(reinforced.displacement);
    ComparisonReport r;
    r.baseline = displacement_stats(mb);
    r.reinforced = displacement_stats(mr);
    r.max_reduction_percent = percent_reduction(r.baseline.max, r.reinforced.max);
    r.mean_reduction_percent = percent_reduction(r.baseline.mean, r.reinforced.mean);
    r.histogram = shared_histogram(mb, mr, bins);
    return r;
}

std::string report_json(const ComparisonReport& report) {
    using nlohmann::ordered_json;
    auto stats = [](const DisplacementStats& s) {
        return ordered_json{{"max_displacement_mm", sig9(s.max)},
                            {"mean_displacement_mm", sig9(s.mean)},
                            {"variance_mm2", sig9(s.variance)}};
    };
    ordered_json edges = ordered_json::array();
    for (double e : report.histogram.edges) edges.push_back(sig9(e));
    ordered_json doc{{"baseline", stats(report.baseline)},
                     {"reinforced", stats(report.reinforced)},
                     {"max_reduction_percent", sig9(report.max_reduction_percent)},
                     {"mean_reduction_percent", sig9(report.mean_reduction_percent)},
                     {"histogram",
                      {{"bin_edges_mm", edges},
                       {"baseline_counts", report.histogram.baseline},
                       {"reinforced_counts", report.histogram.reinforced}}}};
    return doc.dump(2) + "\n";
}

std::string report_text(const ComparisonReport& report) {
    std::string out;
    out += fmt::format("{:<28}{:>16}{:>16}{:>14}\n", "node |u| (mm)", "baseline", "reinforced", "reduction %");
    out += fmt::format("{:<28}{:>16}{:>16}{:>14}\n", "maximum", fmt9(report.baseline.max),
                       fmt9(report.reinforced.max), fmt9(report.max_reduction_percent));
    out += fmt::format("{:<28}{:>16}{:>16}{:>14}\n", "mean", fmt9(report.baseline.mean), fmt9(report.reinforced.mean),
                       fmt9(report.mean_reduction_percent));
    out += fmt::format("{:<28}{:>16}{:>16}\n", "variance (mm^2)", fmt9(report.baseline.variance),
                       fmt9(report.reinforced.variance));
    return out;
}

std::string histogram_csv(const Histogram& h) {
    std::string out = "bin_left,bin_right,count_baseline,count_reinforced\n";
    for (std::size_t i = 0; i < h.baseline.size(); ++i) {
        out += fmt::format("{},{},{},{}\n", fmt9(h.edges[i]), fmt9(h.edges[i + 1]), h.baseline[i], h.reinforced[i]);
    }
    return out;
}

}  // namespace fiberopt
