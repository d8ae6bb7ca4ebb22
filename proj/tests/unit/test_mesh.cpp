#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "fiberopt/error.hpp"
#include "fiberopt/mesh.hpp"
#include "fiberopt/mesh_io.hpp"
#include "oracles.hpp"

using namespace fiberopt;

namespace {

const char* kUnitTetJson = R"({
  "nodes": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
  "elements": [{"conn": [0,1,2,3], "region": "design"}],
  "facet_sets": {"bottom": [[0,2,1]]},
  "node_sets": {"origin": [0]}
})";

Mesh single_tet(const Vec3& shift = Vec3::Zero(), double scale = 1.0) {
    Mesh m;
    m.nodes = {shift, shift + scale * Vec3(1, 0, 0), shift + scale * Vec3(0, 1, 0), shift + scale * Vec3(0, 0, 1)};
    m.elements = {Tet{{0, 1, 2, 3}}};
    return m;
}

// Disjoint tets, each contributing its z = const face to facet set "top".
Mesh disjoint_tets(const std::vector<std::pair<Vec3, double>>& placements) {
    Mesh m;
    for (const auto& [origin, s] : placements) {
        const int b = static_cast<int>(m.nodes.size());
        m.nodes.push_back(origin);
        m.nodes.push_back(origin + Vec3(s, 0, 0));
        m.nodes.push_back(origin + Vec3(0, s, 0));
        m.nodes.push_back(origin + Vec3(0, 0, -s));
        m.elements.push_back(Tet{{b, b + 1, b + 2, b + 3}});
        m.facet_sets["top"].push_back({b, b + 1, b + 2});
    }
    finalize_mesh(m);
    return m;
}

}  // namespace

TEST_CASE("native json: unit tetrahedron") {
    const Mesh m = parse_mesh_json(kUnitTetJson);
    CHECK(m.num_elements() == 1);
    CHECK(m.num_nodes() == 4);
    CHECK(element_volume(m, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(m.node_sets.at("origin") == std::vector<int>{0});
}

TEST_CASE("native json: negative orientation is flipped") {
    std::string text = kUnitTetJson;
    text.replace(text.find("[0,1,2,3]"), 9, "[0,2,1,3]");
    const Mesh m = parse_mesh_json(text);
    const Mesh ref = parse_mesh_json(kUnitTetJson);
    const auto& n = m.nodes;
    const auto& c = m.elements[0].conn;
    CHECK(signed_volume(n[c[0]], n[c[1]], n[c[2]], n[c[3]]) > 0.0);
    CHECK(element_volume(m, 0) == doctest::Approx(1.0 / 6.0));
    CHECK(same_canonical(m, ref));
}

TEST_CASE("native json: rejects malformed input") {
    CHECK_THROWS_AS(parse_mesh_json("{"), MeshError);
    CHECK_THROWS_AS(parse_mesh_json(R"({"nodes": [], "elements": []})"), MeshError);
    CHECK_THROWS_AS(parse_mesh_json(R"({"nodes": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
        "elements": [{"conn": [0,1,2,7]}]})"),
                    MeshError);
    CHECK_THROWS_AS(parse_mesh_json(R"({"nodes": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
        "elements": [{"conn": [0,1,2]}]})"),
                    MeshError);
    // hexahedra and other volume types are not accepted
    CHECK_THROWS_AS(parse_mesh_json(R"({"nodes": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]],
        "elements": [{"conn": [0,1,2,3,0,1,2,3]}]})"),
                    MeshError);
}

TEST_CASE("finalize_mesh invariants") {
    SUBCASE("degenerate tet") {
        Mesh m = single_tet();
        m.nodes[3] = Vec3(0.3, 0.3, 0.0);
        CHECK_THROWS_AS(finalize_mesh(m), MeshError);
    }
    SUBCASE("coincident nodes") {
        Mesh m = single_tet();
        m.nodes.push_back(Vec3(1, 0, 0));
        m.nodes.push_back(Vec3(2, 2, 2));
        m.nodes.push_back(Vec3(3, 2, 2));
        m.nodes.push_back(Vec3(2, 3, 2));
        m.elements.push_back(Tet{{4, 5, 6, 7}});
        CHECK_THROWS_AS(finalize_mesh(m), MeshError);
    }
    SUBCASE("unused node") {
        Mesh m = single_tet();
        m.nodes.push_back(Vec3(5, 5, 5));
        CHECK_THROWS_AS(finalize_mesh(m), MeshError);
    }
    SUBCASE("interior facet") {
        Mesh m = generate_box_mesh(1, 1, 1, Vec3(1, 1, 1));
        // the main diagonal is shared by all six tets, so any face containing
        // both of its ends is interior
        const int a = 0, g = 7;
        int other = -1;
        for (const auto& t : m.elements) {
            const bool has_a = std::find(t.conn.begin(), t.conn.end(), a) != t.conn.end();
            const bool has_g = std::find(t.conn.begin(), t.conn.end(), g) != t.conn.end();
            if (has_a && has_g) {
                for (int n : t.conn)
                    if (n != a && n != g) other = n;
                break;
            }
        }
        REQUIRE(other >= 0);
        m.facet_sets["bad"] = {{a, g, other}};
        CHECK_THROWS_AS(finalize_mesh(m), MeshError);
    }
    SUBCASE("empty") {
        Mesh m;
        CHECK_THROWS_AS(finalize_mesh(m), MeshError);
    }
}

TEST_CASE("box generator: counts and volume") {
    const Mesh one = generate_box_mesh(1, 1, 1, Vec3(1, 1, 1));
    CHECK(one.num_elements() == 6);
    CHECK(one.num_nodes() == 8);
    double v = 0.0;
    for (double x : element_volumes(one)) v += x;
    CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

    const Mesh two = generate_box_mesh(2, 1, 1, Vec3(2, 1, 1));
    CHECK(two.num_elements() == 12);
    v = 0.0;
    for (double x : element_volumes(two)) v += x;
    CHECK(v == doctest::Approx(2.0).epsilon(1e-15));

    const Mesh fine = generate_box_mesh(4, 4, 4, Vec3(1, 1, 1));
    double sum = 0.0;
    for (std::size_t e = 0; e < fine.num_elements(); ++e) {
        const auto& c = fine.elements[e].conn;
        sum += std::abs(oracle::tet_signed_volume(fine.nodes[c[0]], fine.nodes[c[1]], fine.nodes[c[2]], fine.nodes[c[3]]));
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("box generator: volume additivity over shapes") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> div(1, 5);
    std::uniform_real_distribution<double> len(0.1, 30.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 dims(len(rng), len(rng), len(rng));
        const Mesh m = generate_box_mesh(div(rng), div(rng), div(rng), dims);
        double v = 0.0;
        for (double x : element_volumes(m)) v += x;
        const double exact = dims.prod();
        CHECK(std::abs(v - exact) <= 1e-10 * exact);
    }
}

TEST_CASE("box generator: face sets") {
    const Mesh m = generate_box_mesh(3, 2, 2, Vec3(3, 2, 2));
    for (const char* tag : {"x-", "x+", "y-", "y+", "z-", "z+"}) {
        REQUIRE(m.facet_sets.count(tag));
        REQUIRE(m.node_sets.count(tag));
    }
    CHECK(m.facet_sets.at("x+").size() == 2 * 2 * 2);
    CHECK(m.facet_sets.at("y-").size() == 2 * 3 * 2);
    for (int n : m.node_sets.at("x+")) CHECK(m.nodes[n].x() == 3.0);
    for (int n : m.node_sets.at("z-")) CHECK(m.nodes[n].z() == 0.0);
    CHECK(m.node_sets.at("x-").size() == 3 * 3);
}

TEST_CASE("box generator: rejects bad input") {
    CHECK_THROWS_AS(generate_box_mesh(0, 1, 1, Vec3(1, 1, 1)), ConfigError);
    CHECK_THROWS_AS(generate_box_mesh(1, -2, 1, Vec3(1, 1, 1)), ConfigError);
    CHECK_THROWS_AS(generate_box_mesh(1, 1, 1, Vec3(1, 0, 1)), ConfigError);
}

TEST_CASE("element volume") {
    const Mesh unit = parse_mesh_json(kUnitTetJson);
    CHECK(element_volume(unit, 0) == doctest::Approx(1.0 / 6.0));

    Mesh big = single_tet(Vec3::Zero(), 2.0);
    finalize_mesh(big);
    CHECK(element_volume(big, 0) == doctest::Approx(8.0 / 6.0));

    CHECK_THROWS(element_volume(unit, 1));

    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        Mesh m;
        for (int i = 0; i < 4; ++i) m.nodes.push_back(Vec3(u(rng), u(rng), u(rng)));
        m.elements = {Tet{{0, 1, 2, 3}}};
        const double ref = oracle::tet_signed_volume(m.nodes[0], m.nodes[1], m.nodes[2], m.nodes[3]);
        CHECK(signed_volume(m.nodes[0], m.nodes[1], m.nodes[2], m.nodes[3]) ==
              doctest::Approx(ref).epsilon(1e-12));
        if (std::abs(ref) < 1e-3) continue;
        finalize_mesh(m);
        CHECK(element_volume(m, 0) == doctest::Approx(std::abs(ref)).epsilon(1e-12));
    }
}

TEST_CASE("mark_passive_box and tags") {
    Mesh m = generate_box_mesh(4, 1, 1, Vec3(4, 1, 1));
    const std::size_t n = mark_passive_box(m, Vec3(3, -1, -1), Vec3(5, 2, 2));
    CHECK(n == 6);
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        CHECK((m.elements[e].region == Region::Passive) == (element_centroid(m, e).x() > 3.0));
    }
    CHECK(resolve_node_tag(m, "x-").size() == 4);
    CHECK_THROWS_AS(resolve_node_tag(m, "nope"), MeshError);
}

TEST_CASE("filter graph: identity at zero radius") {
    const Mesh m = generate_box_mesh(2, 2, 2, Vec3(1, 1, 1));
    const FilterGraph g = build_filter_graph(m, 0.0);
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
        REQUIRE(g.rows[e].size() == 1);
        CHECK(g.rows[e][0].element == static_cast<int>(e));
        CHECK(g.rows[e][0].weight == 1.0);
    }
    CHECK_THROWS_AS(build_filter_graph(m, -1.0), ConfigError);
}

TEST_CASE("filter graph: two elements one unit apart") {
    Mesh m;
    for (int k = 0; k < 2; ++k) {
        const Vec3 o(k, 0, 0);
        m.nodes.push_back(o);
        m.nodes.push_back(o + Vec3(0.5, 0, 0));
        m.nodes.push_back(o + Vec3(0, 0.5, 0));
        m.nodes.push_back(o + Vec3(0, 0, 0.5));
        m.elements.push_back(Tet{{4 * k, 4 * k + 1, 4 * k + 2, 4 * k + 3}});
    }
    finalize_mesh(m);
    const FilterGraph g = build_filter_graph(m, 1.5);
    REQUIRE(g.rows[0].size() == 2);
    CHECK(g.rows[0][0].element == 0);
    CHECK(g.rows[0][0].weight == doctest::Approx(0.75));
    CHECK(g.rows[0][1].weight == doctest::Approx(0.25));
    CHECK(g.rows[1][0].weight == doctest::Approx(0.25));
    CHECK(g.rows[1][1].weight == doctest::Approx(0.75));
}

TEST_CASE("filter graph: matches exhaustive pairwise oracle") {
    for (double r : {0.6, 0.3, 1.1}) {
        Mesh m = generate_box_mesh(4, 4, 4, Vec3(1, 1, 1));
        mark_passive_box(m, Vec3(0, 0, 0.75), Vec3(0.25, 1, 1));
        const FilterGraph g = build_filter_graph(m, r);
        const auto ref = oracle::filter_weights(m, r);
        for (std::size_t e = 0; e < m.num_elements(); ++e) {
            REQUIRE(g.rows[e].size() == ref[e].size());
            double sum = 0.0;
            int prev = -1;
            for (const auto& [j, w] : g.rows[e]) {
                CHECK(j > prev);
                prev = j;
                REQUIRE(ref[e].count(j));
                CHECK(w == doctest::Approx(ref[e].at(j)).epsilon(1e-12));
                CHECK(w > 0.0);
                sum += w;
                // structural symmetry
                bool back = false;
                for (const auto& entry : g.rows[j]) back = back || entry.element == static_cast<int>(e);
                CHECK(back);
            }
            if (m.elements[e].region == Region::Design) {
                CHECK(std::abs(sum - 1.0) <= 1e-12);
            } else {
                CHECK(g.rows[e].empty());
            }
        }
    }
}

TEST_CASE("distribute_load: single triangle") {
    Mesh m = single_tet();
    m.facet_sets["f"] = {{0, 2, 1}};
    finalize_mesh(m);
    const auto f = distribute_load(m, "f", Vec3(0, 0, -150));
    REQUIRE(f.size() == 3);
    for (const auto& [n, v] : f) {
        CHECK(v.z() == doctest::Approx(-50.0));
        CHECK(v.x() == 0.0);
        CHECK(v.y() == 0.0);
    }
}

TEST_CASE("distribute_load: two equal triangles") {
    const Mesh m = disjoint_tets({{Vec3(0, 0, 0), 1.0}, {Vec3(5, 0, 0), 1.0}});
    const auto f = distribute_load(m, "top", Vec3(0, 0, -900));
    REQUIRE(f.size() == 6);
    for (const auto& [n, v] : f) CHECK(v.z() == doctest::Approx(-150.0));
}

TEST_CASE("distribute_load: unequal triangles follow area") {
    const Mesh m = disjoint_tets({{Vec3(0, 0, 0), 1.0}, {Vec3(5, 0, 0), 2.0}, {Vec3(0, 9, 0), 0.7}});
    const Vec3 total(0, 0, -450);
    const auto f = distribute_load(m, "top", total);
    const std::vector<double> areas{0.5, 2.0, 0.5 * 0.49};
    const double area = areas[0] + areas[1] + areas[2];
    Vec3 sum = Vec3::Zero();
    for (const auto& [n, v] : f) {
        sum += v;
        const double expect = total.z() * areas[static_cast<std::size_t>(n / 4)] / area / 3.0;
        CHECK(v.z() == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(sum.z() == total.z());
    CHECK(sum.x() == 0.0);
    CHECK(sum.y() == 0.0);
}

TEST_CASE("distribute_load: exact conservation on box faces") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1000.0, 1000.0);
    const Mesh m = generate_box_mesh(5, 3, 7, Vec3(1.3, 0.7, 2.9));
    for (const char* tag : {"x-", "x+", "y+", "z-"}) {
        const Vec3 total(u(rng), u(rng), u(rng));
        const auto f = distribute_load(m, tag, total);
        Vec3 sum = Vec3::Zero();
        for (const auto& [n, v] : f) sum += v;
        CHECK(sum.x() == total.x());
        CHECK(sum.y() == total.y());
        CHECK(sum.z() == total.z());
    }
}

TEST_CASE("distribute_load: errors") {
    const Mesh m = generate_box_mesh(1, 1, 1, Vec3(1, 1, 1));
    CHECK_THROWS_AS(distribute_load(m, "missing", Vec3(1, 0, 0)), MeshError);
}

TEST_CASE("gmsh round trip of a generated box") {
    Mesh m = generate_box_mesh(2, 1, 1, Vec3(2, 1, 1));
    mark_passive_box(m, Vec3(1, 0, 0), Vec3(2, 1, 1));
    const Mesh back = parse_mesh_gmsh(mesh_to_gmsh(m));
    CHECK(back.num_elements() == m.num_elements());
    CHECK(same_canonical(m, back));

    const auto path = std::filesystem::temp_directory_path() / "fiberopt_roundtrip.msh";
    save_mesh(m, path, MeshFormat::GmshAsciiV2);
    CHECK(same_canonical(m, load_mesh(path, MeshFormat::GmshAsciiV2)));
    std::filesystem::remove(path);
}

TEST_CASE("gmsh reader details") {
    const std::string text =
        "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
        "$PhysicalNames\n2\n2 5 \"load\"\n3 9 \"passive\"\n$EndPhysicalNames\n"
        "$Nodes\n4\n10 0 0 0\n20 1 0 0\n30 0 1 0\n40 0 0 1\n$EndNodes\n"
        "$Elements\n2\n"
        "2 2 2 5 1 10 30 20\n"
        "3 4 2 9 1 10 20 30 40\n"
        "$EndElements\n";
    const Mesh m = parse_mesh_gmsh(text);
    CHECK(m.num_nodes() == 4);
    REQUIRE(m.num_elements() == 1);
    CHECK(m.elements[0].region == Region::Passive);
    REQUIRE(m.facet_sets.count("load"));
    CHECK(m.node_sets.at("load").size() == 3);

    std::string hex = text;
    hex.replace(hex.find("2 2 2 5 1 10 30 20"), 18, "2 15 2 5 1 10");
    CHECK_THROWS_AS(parse_mesh_gmsh(hex), MeshError);

    std::string v4 = text;
    v4.replace(v4.find("2.2 0 8"), 7, "4.1 0 8");
    CHECK_THROWS_AS(parse_mesh_gmsh(v4), MeshError);

    std::string dangling = text;
    dangling.replace(dangling.find("10 20 30 40\n$End"), 11, "10 20 30 99");
    CHECK_THROWS_AS(parse_mesh_gmsh(dangling), MeshError);

    CHECK_THROWS_AS(parse_mesh_gmsh("$MeshFormat\n2.2 0 8\n"), MeshError);
}

TEST_CASE("native json round trip is the identity on canonical forms") {
    Mesh m = generate_box_mesh(3, 2, 2, Vec3(1.5, 1.0, 0.5));
    mark_passive_box(m, Vec3(0, 0, 0), Vec3(0.5, 1, 1));
    const Mesh back = parse_mesh_json(mesh_to_json(m));
    CHECK(same_canonical(m, back));
    CHECK(back.nodes == m.nodes);

    Mesh shuffled = back;
    std::vector<int> perm(shuffled.num_nodes());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(perm.size() - 1 - i);
    Mesh p;
    p.nodes.resize(shuffled.num_nodes());
    for (std::size_t i = 0; i < perm.size(); ++i) p.nodes[perm[i]] = shuffled.nodes[i];
    for (auto t : shuffled.elements) {
        for (int& c : t.conn) c = perm[c];
        p.elements.push_back(t);
    }
    for (const auto& [tag, tris] : shuffled.facet_sets)
        for (auto t : tris) p.facet_sets[tag].push_back({perm[t[0]], perm[t[1]], perm[t[2]]});
    for (const auto& [tag, ids] : shuffled.node_sets)
        for (int i : ids) p.node_sets[tag].push_back(perm[i]);
    finalize_mesh(p);
    CHECK(same_canonical(m, p));
    CHECK(same_canonical(m, parse_mesh_json(mesh_to_json(p))));
}

TEST_CASE("mesh format names") {
    CHECK(parse_mesh_format("gmsh") == MeshFormat::GmshAsciiV2);
    CHECK(parse_mesh_format("json") == MeshFormat::NativeJson);
    CHECK_THROWS_AS(parse_mesh_format("stl"), ConfigError);
}

TEST_CASE("vtk skeleton and fields") {
    const Mesh m = parse_mesh_json(kUnitTetJson);
    const std::string bare = vtk_to_string(m, {});
    CHECK(bare.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
    CHECK(bare.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
    CHECK(bare.find("POINTS 4 double") != std::string::npos);
    CHECK(bare.find("CELLS 1 5\n4 0 1 2 3\n") != std::string::npos);
    CHECK(bare.find("CELL_TYPES 1\n10\n") != std::string::npos);
    CHECK(bare.find("CELL_DATA") == std::string::npos);
    CHECK(bare.find("POINT_DATA") == std::string::npos);

    VtkFields f;
    f.cell_scalars.push_back({"theta", {0.5}});
    const std::string cells = vtk_to_string(m, f);
    CHECK(cells.find("CELL_DATA 1\nSCALARS theta double 1\nLOOKUP_TABLE default\n0.5\n") != std::string::npos);

    VtkFields g;
    g.point_vectors.push_back({"u", std::vector<Vec3>(4, Vec3::Zero())});
    const std::string points = vtk_to_string(m, g);
    CHECK(points.find("POINT_DATA 4\nVECTORS u double\n0 0 0\n0 0 0\n0 0 0\n0 0 0\n") != std::string::npos);

    CHECK(vtk_to_string(m, g) == points);

    VtkFields bad;
    bad.cell_scalars.push_back({"theta", {0.5, 0.5}});
    CHECK_THROWS_AS(vtk_to_string(m, bad), std::invalid_argument);
    CHECK_THROWS(export_vtk(m, f, "/nonexistent-dir/x.vtk"));
}
