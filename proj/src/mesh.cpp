#include "fiberopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "fiberopt/error.hpp"

namespace fiberopt {

namespace {

constexpr double kCoincidentTol = 1e-9;

// Faces of a tet with outward orientation for a positively oriented element.
constexpr std::array<std::array<int, 3>, 4> kTetFaces{{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

Triangle sorted(Triangle t) {
    std::sort(t.begin(), t.end());
    return t;
}

struct TriangleHash {
    std::size_t operator()(const Triangle& t) const noexcept {
        std::size_t h = static_cast<std::size_t>(t[0]);
        h = h * 1000003u ^ static_cast<std::size_t>(t[1]);
        h = h * 1000003u ^ static_cast<std::size_t>(t[2]);
        return h;
    }
};

using FaceCount = std::unordered_map<Triangle, int, TriangleHash>;

FaceCount count_faces(const Mesh& mesh) {
    FaceCount count;
    count.reserve(mesh.elements.size() * 4);
    for (const auto& tet : mesh.elements) {
        for (const auto& f : kTetFaces) {
            ++count[sorted({tet.conn[f[0]], tet.conn[f[1]], tet.conn[f[2]]})];
        }
    }
    return count;
}

}  // namespace

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

double element_volume(const Mesh& mesh, std::size_t e) {
    if (e >= mesh.elements.size()) {
        throw MeshError(fmt::format("element index {} out of range", e));
    }
    const auto& c = mesh.elements[e].conn;
    return std::abs(signed_volume(mesh.nodes[c[0]], mesh.nodes[c[1]], mesh.nodes[c[2]], mesh.nodes[c[3]]));
}

Vec3 element_centroid(const Mesh& mesh, std::size_t e) {
    const auto& c = mesh.elements[e].conn;
    return 0.25 * (mesh.nodes[c[0]] + mesh.nodes[c[1]] + mesh.nodes[c[2]] + mesh.nodes[c[3]]);
}

std::vector<double> element_volumes(const Mesh& mesh) {
    std::vector<double> v(mesh.num_elements());
    for (std::size_t e = 0; e < v.size(); ++e) v[e] = element_volume(mesh, e);
    return v;
}

void finalize_mesh(Mesh& mesh) {
    if (mesh.nodes.empty() || mesh.elements.empty()) {
        throw MeshError("empty mesh");
    }
    const int n = static_cast<int>(mesh.nodes.size());
    auto check_index = [n](int i, const char* what) {
        if (i < 0 || i >= n) throw MeshError(fmt::format("dangling node index {} in {}", i, what));
    };

    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        auto& c = mesh.elements[e].conn;
        for (int i : c) check_index(i, "element");
        std::array<int, 4> s = c;
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
            throw MeshError(fmt::format("element {} repeats a node", e));
        }
        const auto& x = mesh.nodes;
        double v = signed_volume(x[c[0]], x[c[1]], x[c[2]], x[c[3]]);
        // Relative to the cube of the longest edge.
        double h = 0.0;
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b) h = std::max(h, (x[c[a]] - x[c[b]]).norm());
        if (std::abs(v) <= 1e-12 * h * h * h) {
            throw MeshError(fmt::format("element {} is degenerate (volume {})", e, v));
        }
        if (v < 0.0) std::swap(c[2], c[3]);
    }

    std::vector<char> referenced(mesh.nodes.size(), 0);
    for (const auto& tet : mesh.elements)
        for (int i : tet.conn) referenced[i] = 1;
    if (auto it = std::find(referenced.begin(), referenced.end(), 0); it != referenced.end()) {
        throw MeshError(fmt::format("node {} is not used by any element", it - referenced.begin()));
    }

    for (const auto& [tag, tris] : mesh.facet_sets) {
        for (const auto& t : tris)
            for (int i : t) check_index(i, "facet set");
    }
    for (const auto& [tag, ids] : mesh.node_sets) {
        for (int i : ids) check_index(i, "node set");
    }

    if (!mesh.facet_sets.empty()) {
        const FaceCount faces = count_faces(mesh);
        for (const auto& [tag, tris] : mesh.facet_sets) {
            for (const auto& t : tris) {
                auto it = faces.find(sorted(t));
                if (it == faces.end() || it->second != 1) {
                    throw MeshError(fmt::format("facet ({}, {}, {}) in set '{}' is not a boundary face", t[0],
                                                t[1], t[2], tag));
                }
            }
        }
    }

    // Coincidence check on a hash grid whose cells are much larger than the
    // tolerance; any coincident pair lands in adjacent cells.
    constexpr double kCell = 1e-6;
    using Key = std::array<long long, 3>;
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept {
            return static_cast<std::size_t>(k[0] * 73856093LL ^ k[1] * 19349663LL ^ k[2] * 83492791LL);
        }
    };
    std::unordered_map<Key, std::vector<int>, KeyHash> grid;
    grid.reserve(mesh.nodes.size());
    auto key_of = [](const Vec3& p) {
        return Key{static_cast<long long>(std::floor(p.x() / kCell)), static_cast<long long>(std::floor(p.y() / kCell)),
                   static_cast<long long>(std::floor(p.z() / kCell))};
    };
    for (int i = 0; i < n; ++i) {
        const Key k = key_of(mesh.nodes[i]);
        for (long long dz = -1; dz <= 1; ++dz)
            for (long long dy = -1; dy <= 1; ++dy)
                for (long long dx = -1; dx <= 1; ++dx) {
                    auto it = grid.find(Key{k[0] + dx, k[1] + dy, k[2] + dz});
                    if (it == grid.end()) continue;
                    for (int j : it->second) {
                        if ((mesh.nodes[i] - mesh.nodes[j]).norm() <= kCoincidentTol) {
                            throw MeshError(fmt::format("nodes {} and {} coincide", j, i));
                        }
                    }
                }
        grid[k].push_back(i);
    }
}

Mesh generate_box_mesh(int nx, int ny, int nz, const Vec3& dims) {
    if (nx < 1 || ny < 1 || nz < 1) {
        throw ConfigError(fmt::format("box subdivisions must be >= 1, got ({}, {}, {})", nx, ny, nz));
    }
    if (!(dims.x() > 0.0 && dims.y() > 0.0 && dims.z() > 0.0)) {
        throw ConfigError("box dimensions must be positive");
    }

    Mesh mesh;
    const int sx = nx + 1, sy = ny + 1, sz = nz + 1;
    auto node_id = [&](int i, int j, int k) { return i + sx * (j + sy * k); };

    mesh.nodes.resize(static_cast<std::size_t>(sx) * sy * sz);
    for (int k = 0; k < sz; ++k)
        for (int j = 0; j < sy; ++j)
            for (int i = 0; i < sx; ++i) {
                // Last row snapped to the exact dimension.
                double x = i == nx ? dims.x() : dims.x() * i / nx;
                double y = j == ny ? dims.y() : dims.y() * j / ny;
                double z = k == nz ? dims.z() : dims.z() * k / nz;
                mesh.nodes[node_id(i, j, k)] = Vec3(x, y, z);
            }

    // Kuhn split: one tet per ordering of the three axes, all sharing the
    // 000-111 diagonal. The pattern is translation invariant, so faces conform.
    static constexpr std::array<std::array<int, 3>, 6> kPerms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    mesh.elements.reserve(static_cast<std::size_t>(6) * nx * ny * nz);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                for (const auto& perm : kPerms) {
                    std::array<int, 3> c{i, j, k};
                    std::array<int, 4> conn{};
                    conn[0] = node_id(c[0], c[1], c[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++c[perm[s]];
                        conn[s + 1] = node_id(c[0], c[1], c[2]);
                    }
                    const auto& x = mesh.nodes;
                    if (signed_volume(x[conn[0]], x[conn[1]], x[conn[2]], x[conn[3]]) < 0.0) {
                        std::swap(conn[2], conn[3]);
                    }
                    mesh.elements.push_back({conn, Region::Design});
                }

    auto grid_of = [&](int id) {
        return std::array<int, 3>{id % sx, (id / sx) % sy, id / (sx * sy)};
    };
    const std::array<int, 3> last{nx, ny, nz};
    static const std::array<std::string, 3> kAxis{"x", "y", "z"};

    for (const auto& tet : mesh.elements) {
        for (const auto& f : kTetFaces) {
            Triangle t{tet.conn[f[0]], tet.conn[f[1]], tet.conn[f[2]]};
            auto g0 = grid_of(t[0]), g1 = grid_of(t[1]), g2 = grid_of(t[2]);
            for (int a = 0; a < 3; ++a) {
                if (g0[a] == 0 && g1[a] == 0 && g2[a] == 0) mesh.facet_sets[kAxis[a] + "-"].push_back(t);
                if (g0[a] == last[a] && g1[a] == last[a] && g2[a] == last[a])
                    mesh.facet_sets[kAxis[a] + "+"].push_back(t);
            }
        }
    }
    for (int id = 0; id < static_cast<int>(mesh.nodes.size()); ++id) {
        auto g = grid_of(id);
        for (int a = 0; a < 3; ++a) {
            if (g[a] == 0) mesh.node_sets[kAxis[a] + "-"].push_back(id);
            if (g[a] == last[a]) mesh.node_sets[kAxis[a] + "+"].push_back(id);
        }
    }
    return mesh;
}

std::size_t mark_passive_box(Mesh& mesh, const Vec3& lo, const Vec3& hi) {
    std::size_t marked = 0;
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        Vec3 c = element_centroid(mesh, e);
        if ((c.array() >= lo.array()).all() && (c.array() <= hi.array()).all()) {
            mesh.elements[e].region = Region::Passive;
            ++marked;
        }
    }
    return marked;
}

std::vector<int> resolve_node_tag(const Mesh& mesh, const std::string& tag) {
    if (auto it = mesh.node_sets.find(tag); it != mesh.node_sets.end()) {
        std::vector<int> ids = it->second;
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    }
    if (auto it = mesh.facet_sets.find(tag); it != mesh.facet_sets.end()) {
        std::set<int> ids;
        for (const auto& t : it->second) ids.insert(t.begin(), t.end());
        return {ids.begin(), ids.end()};
    }
    throw MeshError(fmt::format("unknown node or facet set '{}'", tag));
}

FilterGraph build_filter_graph(const Mesh& mesh, double radius) {
    if (radius < 0.0) throw ConfigError("filter radius must be >= 0");

    const std::size_t ne = mesh.num_elements();
    FilterGraph graph;
    graph.rows.resize(ne);

    std::vector<int> design;
    for (std::size_t e = 0; e < ne; ++e)
        if (mesh.elements[e].region == Region::Design) design.push_back(static_cast<int>(e));

    if (radius == 0.0) {
        for (int e : design) graph.rows[e] = {{e, 1.0}};
        return graph;
    }

    std::vector<Vec3> centroid(ne);
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    for (int e : design) {
        centroid[e] = element_centroid(mesh, e);
        lo = lo.cwiseMin(centroid[e]);
    }

    // Bucket centroids on a grid with cell size r; neighbors lie in the 27
    // surrounding cells.
    using Cell = std::array<long, 3>;
    auto cell_of = [&](const Vec3& p) {
        return Cell{static_cast<long>(std::floor((p.x() - lo.x()) / radius)),
                    static_cast<long>(std::floor((p.y() - lo.y()) / radius)),
                    static_cast<long>(std::floor((p.z() - lo.z()) / radius))};
    };
    std::map<Cell, std::vector<int>> buckets;
    for (int e : design) buckets[cell_of(centroid[e])].push_back(e);

    for (int e : design) {
        const Cell c = cell_of(centroid[e]);
        auto& row = graph.rows[e];
        for (long dz = -1; dz <= 1; ++dz)
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    auto it = buckets.find(Cell{c[0] + dx, c[1] + dy, c[2] + dz});
                    if (it == buckets.end()) continue;
                    for (int j : it->second) {
                        double w = radius - (centroid[e] - centroid[j]).norm();
                        if (w > 0.0) row.push_back({j, w});
                    }
                }
        std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.element < b.element; });
        double sum = 0.0;
        for (const auto& entry : row) sum += entry.weight;
        for (auto& entry : row) entry.weight /= sum;
    }
    return graph;
}

std::map<int, Vec3> distribute_load(const Mesh& mesh, const std::string& facet_tag, const Vec3& total_force) {
    auto it = mesh.facet_sets.find(facet_tag);
    if (it == mesh.facet_sets.end() || it->second.empty()) {
        throw MeshError(fmt::format("unknown or empty facet set '{}'", facet_tag));
    }
    const auto& tris = it->second;
    std::vector<double> area(tris.size());
    double total_area = 0.0;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const auto& x = mesh.nodes;
        area[t] = 0.5 * (x[tris[t][1]] - x[tris[t][0]]).cross(x[tris[t][2]] - x[tris[t][0]]).norm();
        total_area += area[t];
    }
    if (!(total_area > 0.0)) {
        throw MeshError(fmt::format("facet set '{}' has zero area", facet_tag));
    }

    std::map<int, Vec3> nodal;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const Vec3 share = total_force * (area[t] / total_area / 3.0);
        for (int i : tris[t]) {
            auto [pos, inserted] = nodal.try_emplace(i, Vec3::Zero());
            pos->second += share;
        }
    }

    // Fold the accumulated rounding residual into the last node.
    Vec3 before = Vec3::Zero();
    for (auto p = nodal.begin(); p != std::prev(nodal.end()); ++p) before += p->second;
    std::prev(nodal.end())->second = total_force - before;
    return nodal;
}

}  // namespace fiberopt
