#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fiberopt {

using Vec3 = Eigen::Vector3d;

/// Elements in the passive region are excluded from the design domain.
enum class Region { Design, Passive };

struct Tet {
    std::array<int, 4> conn;
    Region region = Region::Design;
};

using Triangle = std::array<int, 3>;

/// Tetrahedral mesh in mm. Facet sets carry Neumann surfaces, node sets
/// carry Dirichlet supports.
struct Mesh {
    std::vector<Vec3> nodes;
    std::vector<Tet> elements;
    std::map<std::string, std::vector<Triangle>> facet_sets;
    std::map<std::string, std::vector<int>> node_sets;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_elements() const { return elements.size(); }
    std::size_t num_dofs() const { return 3 * nodes.size(); }
};

/// Checks every mesh invariant and flips negatively oriented tets in place.
/// Throws MeshError on dangling indices, degenerate tets, facets not on the
/// boundary, coincident or unused nodes, or an empty mesh.
void finalize_mesh(Mesh& mesh);

/// Signed volume of the tet (a, b, c, d); positive for right-handed order.
double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

double element_volume(const Mesh& mesh, std::size_t e);
Vec3 element_centroid(const Mesh& mesh, std::size_t e);
std::vector<double> element_volumes(const Mesh& mesh);

/// Structured nx*ny*nz box with each hex cell split into six tets along the
/// main diagonal. Creates facet and node sets "x-", "x+", "y-", "y+", "z-",
/// "z+" for the six faces.
Mesh generate_box_mesh(int nx, int ny, int nz, const Vec3& dims);

/// Marks every element whose centroid lies inside [lo, hi] as passive.
/// Returns the number of elements marked.
std::size_t mark_passive_box(Mesh& mesh, const Vec3& lo, const Vec3& hi);

/// Node indices of a node set, or the nodes of the facet set with that tag.
/// Sorted, unique. Throws MeshError if the tag is unknown.
std::vector<int> resolve_node_tag(const Mesh& mesh, const std::string& tag);

/// Row-normalized cone filter over design elements. Neighbor lists are sorted
/// by element index. Passive elements get an empty row.
struct FilterGraph {
    struct Entry {
        int element;
        double weight;
    };
    std::vector<std::vector<Entry>> rows;
};

FilterGraph build_filter_graph(const Mesh& mesh, double radius);

/// Splits a total force over the triangles of a facet set in proportion to
/// area, one third of each triangle's share to each of its nodes. The sum
/// of the returned contributions, taken in node order, equals total_force up
/// to a single rounding.
std::map<int, Vec3> distribute_load(const Mesh& mesh, const std::string& facet_tag,
                                    const Vec3& total_force);

}  // namespace fiberopt
