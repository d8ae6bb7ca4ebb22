#include "fiberopt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "fiberopt/error.hpp"

namespace fiberopt {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& msg) {
    const auto mark = node.Mark();
    if (mark.line >= 0) throw ConfigError(fmt::format("line {}: field '{}': {}", mark.line + 1, field, msg));
    throw ConfigError(fmt::format("field '{}': {}", field, msg));
}

void allow_keys(const YAML::Node& node, const std::string& field, std::initializer_list<const char*> keys) {
    if (!node.IsMap()) fail(node, field, "expected a mapping");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) fail(kv.first, field + "." + key, "unknown key");
    }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
    if (!node.IsScalar()) fail(node, field, "expected a scalar");
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        fail(node, field, fmt::format("cannot read '{}' as {}", node.Scalar(),
                                      std::is_integral_v<T> ? "an integer" : "a number"));
    }
}

template <typename T>
void optional_scalar(const YAML::Node& parent, const char* key, const std::string& prefix, T& out) {
    if (const YAML::Node n = parent[key]) out = scalar<T>(n, prefix + "." + key);
}

Vec3 vec3(const YAML::Node& node, const std::string& field) {
    if (!node.IsSequence() || node.size() != 3) fail(node, field, "expected a list of three numbers");
    return {scalar<double>(node[0], field), scalar<double>(node[1], field), scalar<double>(node[2], field)};
}

Material material(const YAML::Node& node, const std::string& field) {
    try {
        if (node.IsScalar()) return catalog(node.as<std::string>());
        allow_keys(node, field, {"name", "E", "nu", "density"});
        Material m;
        m.name = node["name"] ? scalar<std::string>(node["name"], field + ".name") : "custom";
        if (!node["E"] || !node["nu"] || !node["density"]) fail(node, field, "needs E, nu and density");
        m.youngs_modulus = scalar<double>(node["E"], field + ".E");
        m.poisson_ratio = scalar<double>(node["nu"], field + ".nu");
        m.density = scalar<double>(node["density"], field + ".density");
        validate_material(m);
        return m;
    } catch (const ConfigError& ex) {
        const std::string what = ex.what();
        if (what.rfind("line ", 0) == 0) throw;
        fail(node, field, what);
    }
}

std::array<bool, 3> components(const YAML::Node& node, const std::string& field) {
    const auto text = scalar<std::string>(node, field);
    std::array<bool, 3> mask{false, false, false};
    if (text.empty()) fail(node, field, "empty component list");
    for (char c : text) {
        if (c < 'x' || c > 'z') fail(node, field, fmt::format("component '{}' is not one of x, y, z", c));
        mask[c - 'x'] = true;
    }
    return mask;
}

void parse_mesh(const YAML::Node& node, const std::filesystem::path& base_dir, MeshSource& src) {
    allow_keys(node, "mesh", {"box", "file", "format", "passive"});
    if (static_cast<bool>(node["box"]) == static_cast<bool>(node["file"])) {
        fail(node, "mesh", "exactly one of 'box' or 'file' is required");
    }
    if (const YAML::Node box = node["box"]) {
        allow_keys(box, "mesh.box", {"divisions", "size"});
        if (!box["divisions"] || !box["size"]) fail(box, "mesh.box", "needs divisions and size");
        const YAML::Node div = box["divisions"];
        if (!div.IsSequence() || div.size() != 3) fail(div, "mesh.box.divisions", "expected three integers");
        BoxSpec spec;
        for (int a = 0; a < 3; ++a) {
            spec.divisions[a] = scalar<int>(div[a], "mesh.box.divisions");
            if (spec.divisions[a] < 1) fail(div[a], "mesh.box.divisions", "must be >= 1");
        }
        spec.size = vec3(box["size"], "mesh.box.size");
        if (!(spec.size.array() > 0.0).all()) fail(box["size"], "mesh.box.size", "must be positive");
        src.box = spec;
    } else {
        std::filesystem::path p = scalar<std::string>(node["file"], "mesh.file");
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        src.file = p;
        if (!node["format"]) fail(node, "mesh.format", "required with 'file' (gmsh or json)");
        try {
            src.format = parse_mesh_format(scalar<std::string>(node["format"], "mesh.format"));
        } catch (const ConfigError& ex) {
            fail(node["format"], "mesh.format", ex.what());
        }
    }
    if (const YAML::Node passive = node["passive"]) {
        if (!passive.IsSequence()) fail(passive, "mesh.passive", "expected a list of boxes");
        for (const auto& b : passive) {
            allow_keys(b, "mesh.passive[]", {"min", "max"});
            if (!b["min"] || !b["max"]) fail(b, "mesh.passive[]", "needs min and max");
            src.passive_boxes.push_back({vec3(b["min"], "mesh.passive[].min"), vec3(b["max"], "mesh.passive[].max")});
        }
    }
}

}  // namespace

RunConfig parse_config_string(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& ex) {
        throw ConfigError(fmt::format("line {}: malformed YAML: {}", ex.mark.line + 1, ex.msg));
    }
    if (!root.IsMap()) throw ConfigError("config must be a YAML mapping");
    allow_keys(root, "config", {"mesh", "materials", "supports", "loads", "optimization", "solver", "reinforce", "output"});

    RunConfig cfg;
    if (!root["mesh"]) throw ConfigError("field 'mesh': required");
    parse_mesh(root["mesh"], base_dir, cfg.mesh);

    cfg.strong = catalog("E-glass");
    cfg.weak = catalog("PMMA");
    if (const YAML::Node m = root["materials"]) {
        allow_keys(m, "materials", {"strong", "weak"});
        if (m["strong"]) cfg.strong = material(m["strong"], "materials.strong");
        if (m["weak"]) cfg.weak = material(m["weak"], "materials.weak");
    }

    const YAML::Node supports = root["supports"];
    if (!supports || !supports.IsSequence() || supports.size() == 0) {
        throw ConfigError("field 'supports': at least one support is required");
    }
    for (const auto& s : supports) {
        allow_keys(s, "supports[]", {"set", "fix"});
        if (!s["set"]) fail(s, "supports[].set", "required");
        Support sup;
        sup.tag = scalar<std::string>(s["set"], "supports[].set");
        if (s["fix"]) sup.components = components(s["fix"], "supports[].fix");
        cfg.load_case.supports.push_back(sup);
    }

    if (const YAML::Node loads = root["loads"]) {
        if (!loads.IsSequence()) fail(loads, "loads", "expected a list");
        for (const auto& l : loads) {
            allow_keys(l, "loads[]", {"set", "force"});
            if (!l["set"] || !l["force"]) fail(l, "loads[]", "needs set and force");
            cfg.load_case.loads.push_back({scalar<std::string>(l["set"], "loads[].set"), vec3(l["force"], "loads[].force")});
        }
    }

    if (const YAML::Node o = root["optimization"]) {
        allow_keys(o, "optimization", {"mass_fraction", "penalty", "filter_radius", "move_limit", "theta_min",
                                       "min_modulus_ratio", "max_iterations", "change_tolerance"});
        auto& oc = cfg.optimization;
        if (o["mass_fraction"]) {
            oc.mass_fraction = scalar<double>(o["mass_fraction"], "optimization.mass_fraction");
            cfg.has_mass_fraction = true;
            if (!(oc.mass_fraction > 0.0 && oc.mass_fraction <= 1.0)) {
                fail(o["mass_fraction"], "optimization.mass_fraction",
                     fmt::format("{} out of range (0, 1]", oc.mass_fraction));
            }
        }
        optional_scalar(o, "penalty", "optimization", oc.penalty);
        optional_scalar(o, "filter_radius", "optimization", oc.filter_radius);
        optional_scalar(o, "move_limit", "optimization", oc.move_limit);
        optional_scalar(o, "theta_min", "optimization", oc.theta_min);
        optional_scalar(o, "min_modulus_ratio", "optimization", oc.min_modulus_ratio);
        optional_scalar(o, "max_iterations", "optimization", oc.max_iterations);
        optional_scalar(o, "change_tolerance", "optimization", oc.change_tolerance);
    }
    if (const YAML::Node s = root["solver"]) {
        allow_keys(s, "solver", {"tolerance", "max_iterations"});
        optional_scalar(s, "tolerance", "solver", cfg.optimization.solver.tolerance);
        optional_scalar(s, "max_iterations", "solver", cfg.optimization.solver.max_iterations);
        if (cfg.optimization.solver.max_iterations < 0) fail(s, "solver.max_iterations", "must be >= 0");
    }
    {
        // Range checks that do not depend on mass_fraction being present.
        OptimizationConfig probe = cfg.optimization;
        probe.mass_fraction = 0.5;
        try {
            validate(probe);
        } catch (const ConfigError& ex) {
            fail(root["optimization"] ? root["optimization"] : root["solver"], "optimization", ex.what());
        }
    }

    if (const YAML::Node r = root["reinforce"]) {
        allow_keys(r, "reinforce", {"cutoff", "passive_label", "histogram_bins"});
        optional_scalar(r, "cutoff", "reinforce", cfg.cutoff);
        if (!(cfg.cutoff > 0.0 && cfg.cutoff < 1.0)) fail(r["cutoff"], "reinforce.cutoff", "must lie in (0, 1)");
        optional_scalar(r, "histogram_bins", "reinforce", cfg.histogram_bins);
        if (cfg.histogram_bins < 1) fail(r["histogram_bins"], "reinforce.histogram_bins", "must be >= 1");
        if (const YAML::Node p = r["passive_label"]) {
            const auto label = scalar<std::string>(p, "reinforce.passive_label");
            if (label == "strong") {
                cfg.passive_label = MaterialLabel::Strong;
            } else if (label == "weak") {
                cfg.passive_label = MaterialLabel::Weak;
            } else {
                fail(p, "reinforce.passive_label", "expected 'strong' or 'weak'");
            }
        }
    }
    if (const YAML::Node out = root["output"]) {
        allow_keys(out, "output", {"directory"});
        if (out["directory"]) {
            std::filesystem::path p = scalar<std::string>(out["directory"], "output.directory");
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            cfg.output_dir = p;
        }
    }
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_string(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string effective_config_yaml(const RunConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    auto seq3 = [&](const auto& v) {
        out << YAML::Flow << YAML::BeginSeq << v[0] << v[1] << v[2] << YAML::EndSeq;
    };
    auto mat = [&](const Material& m) {
        out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << m.name << YAML::Key << "E" << YAML::Value
            << m.youngs_modulus << YAML::Key << "nu" << YAML::Value << m.poisson_ratio << YAML::Key << "density"
            << YAML::Value << m.density << YAML::EndMap;
    };

    out << YAML::BeginMap;
    out << YAML::Key << "mesh" << YAML::Value << YAML::BeginMap;
    if (c.mesh.box) {
        out << YAML::Key << "box" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "divisions" << YAML::Value;
        seq3(c.mesh.box->divisions);
        out << YAML::Key << "size" << YAML::Value;
        seq3(c.mesh.box->size);
        out << YAML::EndMap;
    } else {
        out << YAML::Key << "file" << YAML::Value << std::filesystem::absolute(*c.mesh.file).string();
        out << YAML::Key << "format" << YAML::Value
            << (c.mesh.format == MeshFormat::GmshAsciiV2 ? "gmsh" : "json");
    }
    out << YAML::Key << "passive" << YAML::Value << YAML::BeginSeq;
    for (const auto& b : c.mesh.passive_boxes) {
        out << YAML::BeginMap << YAML::Key << "min" << YAML::Value;
        seq3(b.lo);
        out << YAML::Key << "max" << YAML::Value;
        seq3(b.hi);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;

    out << YAML::Key << "materials" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "strong" << YAML::Value;
    mat(c.strong);
    out << YAML::Key << "weak" << YAML::Value;
    mat(c.weak);
    out << YAML::EndMap;

    out << YAML::Key << "supports" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : c.load_case.supports) {
        std::string fix;
        for (int a = 0; a < 3; ++a)
            if (s.components[a]) fix += static_cast<char>('x' + a);
        out << YAML::BeginMap << YAML::Key << "set" << YAML::Value << s.tag << YAML::Key << "fix" << YAML::Value
            << fix << YAML::EndMap;
    }
    out << YAML::EndSeq;

    out << YAML::Key << "loads" << YAML::Value << YAML::BeginSeq;
    for (const auto& l : c.load_case.loads) {
        out << YAML::BeginMap << YAML::Key << "set" << YAML::Value << l.tag << YAML::Key << "force" << YAML::Value;
        seq3(l.force);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;

    const auto& o = c.optimization;
    out << YAML::Key << "optimization" << YAML::Value << YAML::BeginMap;
    if (c.has_mass_fraction) out << YAML::Key << "mass_fraction" << YAML::Value << o.mass_fraction;
    out << YAML::Key << "penalty" << YAML::Value << o.penalty;
    out << YAML::Key << "filter_radius" << YAML::Value << o.filter_radius;
    out << YAML::Key << "move_limit" << YAML::Value << o.move_limit;
    out << YAML::Key << "theta_min" << YAML::Value << o.theta_min;
    out << YAML::Key << "min_modulus_ratio" << YAML::Value << o.min_modulus_ratio;
    out << YAML::Key << "max_iterations" << YAML::Value << o.max_iterations;
    out << YAML::Key << "change_tolerance" << YAML::Value << o.change_tolerance;
    out << YAML::EndMap;

    out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "tolerance" << YAML::Value << o.solver.tolerance;
    out << YAML::Key << "max_iterations" << YAML::Value << o.solver.max_iterations;
    out << YAML::EndMap;

    out << YAML::Key << "reinforce" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "cutoff" << YAML::Value << c.cutoff;
    out << YAML::Key << "passive_label" << YAML::Value
        << (c.passive_label == MaterialLabel::Strong ? "strong" : "weak");
    out << YAML::Key << "histogram_bins" << YAML::Value << c.histogram_bins;
    out << YAML::EndMap;

    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "directory" << YAML::Value << std::filesystem::absolute(c.output_dir).string();
    out << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

void check_tags(const Mesh& mesh, const LoadCase& load_case) {
    for (const auto& s : load_case.supports) {
        if (!mesh.node_sets.count(s.tag) && !mesh.facet_sets.count(s.tag)) {
            throw ConfigError(fmt::format("support set '{}' not found in mesh", s.tag));
        }
    }
    for (const auto& l : load_case.loads) {
        if (!mesh.facet_sets.count(l.tag)) {
            throw ConfigError(fmt::format("load facet set '{}' not found in mesh", l.tag));
        }
    }
}

Mesh build_mesh(const RunConfig& config, int refinement) {
    if (refinement < 1) throw ConfigError("refinement level must be >= 1");
    Mesh mesh;
    if (config.mesh.box) {
        const auto& b = *config.mesh.box;
        mesh = generate_box_mesh(b.divisions[0] * refinement, b.divisions[1] * refinement,
                                 b.divisions[2] * refinement, b.size);
    } else {
        if (refinement != 1) throw ConfigError("mesh refinement needs a box mesh source");
        try {
            mesh = load_mesh(*config.mesh.file, config.mesh.format);
        } catch (const MeshError& ex) {
            throw ConfigError(fmt::format("mesh '{}': {}", config.mesh.file->string(), ex.what()));
        }
    }
    for (const auto& b : config.mesh.passive_boxes) mark_passive_box(mesh, b.lo, b.hi);
    check_tags(mesh, config.load_case);
    return mesh;
}

}  // namespace fiberopt
