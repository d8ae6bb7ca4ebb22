#include "fiberopt/mesh_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "fiberopt/error.hpp"

namespace fiberopt {

using nlohmann::json;

MeshFormat parse_mesh_format(const std::string& name) {
    if (name == "gmsh" || name == "msh" || name == "gmsh_ascii_v2") return MeshFormat::GmshAsciiV2;
    if (name == "json" || name == "native_json") return MeshFormat::NativeJson;
    throw ConfigError(fmt::format("unknown mesh format '{}'", name));
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MeshError(fmt::format("cannot open mesh file '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Region parse_region(const std::string& s) {
    if (s == "design") return Region::Design;
    if (s == "passive") return Region::Passive;
    throw MeshError(fmt::format("unknown region '{}'", s));
}

const char* region_name(Region r) { return r == Region::Passive ? "passive" : "design"; }

}  // namespace

Mesh parse_mesh_json(const std::string& text) {
    Mesh mesh;
    try {
        const json doc = json::parse(text);
        for (const auto& p : doc.at("nodes")) {
            if (!p.is_array() || p.size() != 3) throw MeshError("node must be [x, y, z]");
            mesh.nodes.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        }
        for (const auto& e : doc.at("elements")) {
            const auto& conn = e.at("conn");
            if (conn.size() != 4) {
                throw MeshError(fmt::format("unsupported element with {} nodes (only TET4)", conn.size()));
            }
            Tet tet;
            for (int i = 0; i < 4; ++i) tet.conn[i] = conn[i].get<int>();
            tet.region = parse_region(e.value("region", std::string("design")));
            mesh.elements.push_back(tet);
        }
        if (doc.contains("facet_sets")) {
            for (const auto& [tag, tris] : doc.at("facet_sets").items()) {
                auto& out = mesh.facet_sets[tag];
                for (const auto& t : tris) {
                    if (t.size() != 3) throw MeshError(fmt::format("facet in set '{}' is not a triangle", tag));
                    out.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
                }
            }
        }
        if (doc.contains("node_sets")) {
            for (const auto& [tag, ids] : doc.at("node_sets").items()) {
                mesh.node_sets[tag] = ids.get<std::vector<int>>();
            }
        }
    } catch (const json::exception& ex) {
        throw MeshError(fmt::format("malformed mesh JSON: {}", ex.what()));
    }
    finalize_mesh(mesh);
    return mesh;
}

Mesh parse_mesh_gmsh(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::map<int, std::string> physical_names;
    std::map<long, int> node_index;
    Mesh mesh;
    bool have_nodes = false;
    bool have_elements = false;

    auto expect_end = [&](const std::string& end) {
        if (!std::getline(in, line) || line.rfind(end, 0) != 0) {
            throw MeshError(fmt::format("gmsh: missing {}", end));
        }
    };

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "$MeshFormat") {
            std::getline(in, line);
            std::istringstream ls(line);
            double version = 0;
            int file_type = -1;
            ls >> version >> file_type;
            if (!ls || version < 2.0 || version >= 3.0 || file_type != 0) {
                throw MeshError(fmt::format("gmsh: only ASCII format 2.x is supported, got '{}'", line));
            }
            expect_end("$EndMeshFormat");
        } else if (line == "$PhysicalNames") {
            int count = 0;
            in >> count;
            for (int i = 0; i < count; ++i) {
                int dim = 0, tag = 0;
                std::string name;
                in >> dim >> tag;
                std::getline(in, name);
                auto q0 = name.find('"'), q1 = name.rfind('"');
                if (q0 == std::string::npos || q1 == q0) throw MeshError("gmsh: malformed physical name");
                physical_names[tag] = name.substr(q0 + 1, q1 - q0 - 1);
            }
            expect_end("$EndPhysicalNames");
        } else if (line == "$Nodes") {
            long count = 0;
            if (!(in >> count) || count < 0) throw MeshError("gmsh: bad node count");
            for (long i = 0; i < count; ++i) {
                long id = 0;
                double x = 0, y = 0, z = 0;
                if (!(in >> id >> x >> y >> z)) throw MeshError("gmsh: truncated $Nodes section");
                if (!node_index.emplace(id, static_cast<int>(mesh.nodes.size())).second) {
                    throw MeshError(fmt::format("gmsh: duplicate node id {}", id));
                }
                mesh.nodes.emplace_back(x, y, z);
            }
            std::getline(in, line);
            expect_end("$EndNodes");
            have_nodes = true;
        } else if (line == "$Elements") {
            if (!have_nodes) throw MeshError("gmsh: $Elements before $Nodes");
            long count = 0;
            if (!(in >> count) || count < 0) throw MeshError("gmsh: bad element count");
            auto node = [&](long id) {
                auto it = node_index.find(id);
                if (it == node_index.end()) throw MeshError(fmt::format("gmsh: dangling node id {}", id));
                return it->second;
            };
            for (long i = 0; i < count; ++i) {
                long id = 0;
                int type = 0, ntags = 0;
                if (!(in >> id >> type >> ntags) || ntags < 0) throw MeshError("gmsh: truncated $Elements section");
                std::vector<int> tags(ntags);
                for (auto& t : tags) in >> t;
                const int physical = ntags > 0 ? tags[0] : 0;
                auto name_of = [&]() {
                    auto it = physical_names.find(physical);
                    return it != physical_names.end() ? it->second : std::to_string(physical);
                };
                if (type == 4) {
                    Tet tet;
                    for (auto& c : tet.conn) {
                        long nid = 0;
                        in >> nid;
                        c = node(nid);
                    }
                    tet.region = name_of() == "passive" ? Region::Passive : Region::Design;
                    mesh.elements.push_back(tet);
                } else if (type == 2) {
                    Triangle t{};
                    for (auto& c : t) {
                        long nid = 0;
                        in >> nid;
                        c = node(nid);
                    }
                    mesh.facet_sets[name_of()].push_back(t);
                } else {
                    throw MeshError(fmt::format("gmsh: unsupported element type {} (only 4 and 2)", type));
                }
                if (!in) throw MeshError("gmsh: truncated $Elements section");
            }
            std::getline(in, line);
            expect_end("$EndElements");
            have_elements = true;
        }
    }
    if (!have_nodes || !have_elements) throw MeshError("gmsh: missing $Nodes or $Elements section");

    for (const auto& [tag, tris] : mesh.facet_sets) {
        std::set<int> ids;
        for (const auto& t : tris) ids.insert(t.begin(), t.end());
        mesh.node_sets[tag] = {ids.begin(), ids.end()};
    }
    finalize_mesh(mesh);
    return mesh;
}

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
    const std::string text = read_file(path);
    return format == MeshFormat::GmshAsciiV2 ? parse_mesh_gmsh(text) : parse_mesh_json(text);
}

std::string mesh_to_json(const Mesh& mesh) {
    json doc;
    doc["nodes"] = json::array();
    for (const auto& p : mesh.nodes) doc["nodes"].push_back({p.x(), p.y(), p.z()});
    doc["elements"] = json::array();
    for (const auto& e : mesh.elements) {
        doc["elements"].push_back({{"conn", e.conn}, {"region", region_name(e.region)}});
    }
    doc["facet_sets"] = json::object();
    for (const auto& [tag, tris] : mesh.facet_sets) doc["facet_sets"][tag] = tris;
    doc["node_sets"] = json::object();
    for (const auto& [tag, ids] : mesh.node_sets) doc["node_sets"][tag] = ids;
    return doc.dump() + "\n";
}

std::string mesh_to_gmsh(const Mesh& mesh) {
    // Physical tags: 1 design, 2 passive, 3.. facet sets in tag order.
    std::string out = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n";
    out += fmt::format("{}\n", 2 + mesh.facet_sets.size());
    out += "3 1 \"design\"\n3 2 \"passive\"\n";
    std::map<std::string, int> facet_tag;
    int next = 3;
    for (const auto& [tag, tris] : mesh.facet_sets) {
        facet_tag[tag] = next;
        out += fmt::format("2 {} \"{}\"\n", next++, tag);
    }
    out += "$EndPhysicalNames\n$Nodes\n";
    out += fmt::format("{}\n", mesh.nodes.size());
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        const auto& p = mesh.nodes[i];
        out += fmt::format("{} {:.17g} {:.17g} {:.17g}\n", i + 1, p.x(), p.y(), p.z());
    }
    out += "$EndNodes\n$Elements\n";
    std::size_t facets = 0;
    for (const auto& [tag, tris] : mesh.facet_sets) facets += tris.size();
    out += fmt::format("{}\n", facets + mesh.elements.size());
    std::size_t id = 1;
    for (const auto& [tag, tris] : mesh.facet_sets) {
        const int phys = facet_tag[tag];
        for (const auto& t : tris) {
            out += fmt::format("{} 2 2 {} {} {} {} {}\n", id++, phys, phys, t[0] + 1, t[1] + 1, t[2] + 1);
        }
    }
    for (const auto& e : mesh.elements) {
        const int phys = e.region == Region::Passive ? 2 : 1;
        out += fmt::format("{} 4 2 {} {} {} {} {} {}\n", id++, phys, phys, e.conn[0] + 1, e.conn[1] + 1,
                           e.conn[2] + 1, e.conn[3] + 1);
    }
    out += "$EndElements\n";
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
    out << text;
    if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path, MeshFormat format) {
    write_text_file(path, format == MeshFormat::GmshAsciiV2 ? mesh_to_gmsh(mesh) : mesh_to_json(mesh));
}

Mesh canonical_form(const Mesh& mesh) {
    std::vector<int> order(mesh.nodes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& p = mesh.nodes[a];
        const auto& q = mesh.nodes[b];
        return std::tie(p.x(), p.y(), p.z()) < std::tie(q.x(), q.y(), q.z());
    });
    std::vector<int> remap(order.size());
    Mesh out;
    out.nodes.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        remap[order[i]] = static_cast<int>(i);
        out.nodes.push_back(mesh.nodes[order[i]]);
    }
    for (const auto& e : mesh.elements) {
        Tet t{{remap[e.conn[0]], remap[e.conn[1]], remap[e.conn[2]], remap[e.conn[3]]}, e.region};
        std::sort(t.conn.begin(), t.conn.end());
        out.elements.push_back(t);
    }
    std::sort(out.elements.begin(), out.elements.end(),
              [](const Tet& a, const Tet& b) { return std::tie(a.conn, a.region) < std::tie(b.conn, b.region); });
    for (const auto& [tag, tris] : mesh.facet_sets) {
        auto& dst = out.facet_sets[tag];
        for (const auto& t : tris) {
            Triangle s{remap[t[0]], remap[t[1]], remap[t[2]]};
            std::sort(s.begin(), s.end());
            dst.push_back(s);
        }
        std::sort(dst.begin(), dst.end());
    }
    for (const auto& [tag, ids] : mesh.node_sets) {
        auto& dst = out.node_sets[tag];
        for (int i : ids) dst.push_back(remap[i]);
        std::sort(dst.begin(), dst.end());
    }
    return out;
}

bool same_canonical(const Mesh& a, const Mesh& b) {
    const Mesh ca = canonical_form(a);
    const Mesh cb = canonical_form(b);
    if (ca.nodes != cb.nodes || ca.facet_sets != cb.facet_sets || ca.node_sets != cb.node_sets) return false;
    if (ca.elements.size() != cb.elements.size()) return false;
    for (std::size_t e = 0; e < ca.elements.size(); ++e) {
        if (ca.elements[e].conn != cb.elements[e].conn || ca.elements[e].region != cb.elements[e].region) {
            return false;
        }
    }
    return true;
}

std::string vtk_to_string(const Mesh& mesh, const VtkFields& fields, const std::string& title) {
    const std::size_t np = mesh.num_nodes();
    const std::size_t ne = mesh.num_elements();
    for (const auto& [name, v] : fields.point_vectors)
        if (v.size() != np) throw std::invalid_argument(fmt::format("point field '{}' has wrong length", name));
    for (const auto& [name, v] : fields.point_scalars)
        if (v.size() != np) throw std::invalid_argument(fmt::format("point field '{}' has wrong length", name));
    for (const auto& [name, v] : fields.cell_scalars)
        if (v.size() != ne) throw std::invalid_argument(fmt::format("cell field '{}' has wrong length", name));

    std::string out;
    out.reserve(64 * (np + ne));
    out += "# vtk DataFile Version 3.0\n";
    out += title + "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out += fmt::format("POINTS {} double\n", np);
    for (const auto& p : mesh.nodes) out += fmt::format("{:.9g} {:.9g} {:.9g}\n", p.x(), p.y(), p.z());
    out += fmt::format("CELLS {} {}\n", ne, 5 * ne);
    for (const auto& e : mesh.elements) {
        out += fmt::format("4 {} {} {} {}\n", e.conn[0], e.conn[1], e.conn[2], e.conn[3]);
    }
    out += fmt::format("CELL_TYPES {}\n", ne);
    for (std::size_t e = 0; e < ne; ++e) out += "10\n";

    if (!fields.cell_scalars.empty()) {
        out += fmt::format("CELL_DATA {}\n", ne);
        for (const auto& [name, v] : fields.cell_scalars) {
            out += fmt::format("SCALARS {} double 1\nLOOKUP_TABLE default\n", name);
            for (double x : v) out += fmt::format("{:.9g}\n", x);
        }
    }
    if (!fields.point_vectors.empty() || !fields.point_scalars.empty()) {
        out += fmt::format("POINT_DATA {}\n", np);
        for (const auto& [name, v] : fields.point_vectors) {
            out += fmt::format("VECTORS {} double\n", name);
            for (const auto& x : v) out += fmt::format("{:.9g} {:.9g} {:.9g}\n", x.x(), x.y(), x.z());
        }
        for (const auto& [name, v] : fields.point_scalars) {
            out += fmt::format("SCALARS {} double 1\nLOOKUP_TABLE default\n", name);
            for (double x : v) out += fmt::format("{:.9g}\n", x);
        }
    }
    return out;
}

void export_vtk(const Mesh& mesh, const VtkFields& fields, const std::filesystem::path& path) {
    write_text_file(path, vtk_to_string(mesh, fields));
}

}  // namespace fiberopt
