#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>
#include <string>

#include "podocp/mesh.hpp"

using namespace podocp;

namespace {

double total_area(const Mesh& m) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t) a += m.signed_area(t);
  return a;
}

double subdomain_area(const Mesh& m, int tag) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.num_triangles(); ++t)
    if (m.subdomain_tags[t] == tag) a += m.signed_area(t);
  return a;
}

}  // namespace

TEST(StructuredMesh, GraetzSubdomainsPartitionTriangles) {
  const Mesh m = build_structured_mesh(CaseId::graetz, 20, 10);
  EXPECT_EQ(m.num_triangles(), 2u * 20 * 10);
  EXPECT_EQ(m.num_vertices(), 21u * 11);
  std::map<int, int> counts;
  for (int s : m.subdomain_tags) ++counts[s];
  ASSERT_EQ(counts.size(), 3u);
  // 10x10 cells in the square, 10x6 in the middle strip, 10x4 in the outer strips
  EXPECT_EQ(counts[tags::kGraetzOmega1], 200);
  EXPECT_EQ(counts[tags::kGraetzOmega2], 120);
  EXPECT_EQ(counts[tags::kGraetzOmega3], 80);
  EXPECT_NEAR(subdomain_area(m, tags::kGraetzOmega3), 0.4, 1e-14);
  EXPECT_NEAR(subdomain_area(m, tags::kGraetzOmega2), 0.6, 1e-14);
  EXPECT_NEAR(total_area(m), 2.0, 1e-13);
}

TEST(StructuredMesh, SmallestCavity) {
  const Mesh m = build_structured_mesh(CaseId::stokes_cavity, 2, 2);
  EXPECT_EQ(m.num_triangles(), 8u);
  EXPECT_EQ(m.num_vertices(), 9u);
  int inlet = 0;
  for (const auto& e : m.boundary_edges) {
    if (e.tag != tags::kStokesInlet) continue;
    ++inlet;
    EXPECT_DOUBLE_EQ(m.vertices[e.vertices[0]].y(), 1.0);
    EXPECT_DOUBLE_EQ(m.vertices[e.vertices[1]].y(), 1.0);
  }
  EXPECT_EQ(inlet, 2);
}

TEST(StructuredMesh, TrianglesPositiveAndEdgesTaggedOnce) {
  for (auto [id, nx, ny] : {std::tuple{CaseId::graetz, 10, 5}, std::tuple{CaseId::stokes_cavity, 7, 3}}) {
    const Mesh m = build_structured_mesh(id, nx, ny);
    for (std::size_t t = 0; t < m.num_triangles(); ++t) EXPECT_GT(m.signed_area(t), 0.0);
    EXPECT_EQ(m.boundary_edges.size(), static_cast<std::size_t>(2 * (nx + ny)));
    std::set<std::pair<int, int>> seen;
    for (const auto& e : m.boundary_edges) {
      EXPECT_TRUE(seen.insert(std::minmax(e.vertices[0], e.vertices[1])).second);
      EXPECT_GT(e.tag, 0);
    }
  }
}

TEST(StructuredMesh, GraetzBoundaryTags) {
  const Mesh m = build_structured_mesh(CaseId::graetz, 8, 5);
  double control_length = 0.0, outflow_length = 0.0, dirichlet_length = 0.0;
  for (const auto& e : m.boundary_edges) {
    const Point a = m.vertices[e.vertices[0]], b = m.vertices[e.vertices[1]];
    const double len = (b - a).norm();
    if (e.tag == tags::kGraetzControl) {
      control_length += len;
      EXPECT_GE(std::min(a.x(), b.x()), 1.0);
    } else if (e.tag == tags::kGraetzOutflow) {
      outflow_length += len;
      EXPECT_DOUBLE_EQ(a.x(), 2.0);
    } else {
      EXPECT_EQ(e.tag, tags::kGraetzDirichlet);
      dirichlet_length += len;
      EXPECT_LE(std::max(a.x(), b.x()), 1.0);
    }
  }
  EXPECT_NEAR(control_length, 2.0, 1e-14);
  EXPECT_NEAR(outflow_length, 1.0, 1e-14);
  EXPECT_NEAR(dirichlet_length, 3.0, 1e-14);
}

TEST(StructuredMesh, RejectsMisalignedInterface) {
  try {
    build_structured_mesh(CaseId::graetz, 20, 7);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("y=0.2"), std::string::npos) << e.what();
  }
  try {
    build_structured_mesh(CaseId::graetz, 7, 10);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x=1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(build_structured_mesh(CaseId::stokes_cavity, 1, 4), ConfigError);
  EXPECT_THROW(parse_case("channel"), ConfigError);
}

TEST(GeometricMaps, ReferenceParameterGivesIdentity) {
  Parameter mu = reference_parameter(CaseId::graetz);
  for (const auto& map : subdomain_maps(CaseId::graetz, mu)) {
    EXPECT_TRUE(map.linear.isIdentity(0.0));
    EXPECT_TRUE(map.offset.isZero(0.0));
    EXPECT_EQ(map.jacobian_det, 1.0);
  }
  for (const auto& map : subdomain_maps(CaseId::stokes_cavity, reference_parameter(CaseId::stokes_cavity)))
    EXPECT_TRUE(map.linear.isIdentity(0.0));
}

TEST(GeometricMaps, StretchDeterminants) {
  const auto maps = subdomain_maps(CaseId::graetz, Parameter{{1.0 / 12.0, 2.0, 2.5}});
  ASSERT_EQ(maps.size(), 3u);
  EXPECT_EQ(maps[0].jacobian_det, 1.0);
  EXPECT_EQ(maps[1].jacobian_det, 2.5);
  EXPECT_EQ(maps[2].jacobian_det, 2.5);
  // the interface x = 1 stays fixed
  EXPECT_NEAR(maps[1].apply(Point(1.0, 0.3)).x(), 1.0, 1e-15);
  EXPECT_NEAR(maps[1].apply(Point(2.0, 0.3)).x(), 3.5, 1e-15);

  const Mesh cavity = build_structured_mesh(CaseId::stokes_cavity, 6, 6);
  const auto smaps = subdomain_maps(CaseId::stokes_cavity, Parameter{{1e-2, 0.5}});
  EXPECT_NEAR(total_area(deformed_mesh(cavity, smaps)), 0.5, 1e-14);
}

TEST(GeometricMaps, InverseComposesToIdentity) {
  const auto maps = subdomain_maps(CaseId::graetz, Parameter{{0.1, 1.5, 0.7}});
  for (const auto& map : maps) {
    for (const Point& x : {Point(0.3, 0.9), Point(1.7, 0.1), Point(2.0, 1.0)}) {
      EXPECT_LT((map.inverse_apply(map.apply(x)) - x).norm(), 1e-12);
    }
  }
}

TEST(GeometricMaps, RejectsParameterOutsideBox) {
  EXPECT_THROW(subdomain_maps(CaseId::graetz, Parameter{{0.1, 2.0, 3.5}}), ConfigError);
  EXPECT_THROW(subdomain_maps(CaseId::stokes_cavity, Parameter{{0.2, 1.0}}), ConfigError);
  EXPECT_THROW(subdomain_maps(CaseId::stokes_cavity, Parameter{{0.01}}), ConfigError);
}

TEST(GeometricMaps, DeformedAreaIsSumOfScaledSubdomains) {
  const Mesh ref = build_structured_mesh(CaseId::graetz, 10, 5);
  for (double s : {0.5, 1.3, 3.0}) {
    const auto maps = subdomain_maps(CaseId::graetz, Parameter{{0.1, 2.0, s}});
    const Mesh phys = deformed_mesh(ref, maps);
    double expected = 0.0;
    for (const auto& m : maps) expected += m.jacobian_det * subdomain_area(ref, m.subdomain_id);
    EXPECT_NEAR(total_area(phys), expected, 1e-12);
    EXPECT_NEAR(total_area(phys), 1.0 + s, 1e-12);
    // topology and tags unchanged
    EXPECT_EQ(phys.triangles, ref.triangles);
    EXPECT_EQ(phys.subdomain_tags, ref.subdomain_tags);
    for (std::size_t t = 0; t < phys.num_triangles(); ++t) EXPECT_GT(phys.signed_area(t), 0.0);
  }
}

TEST(GeometricMaps, ConstantPullbackKeepsValue) {
  const Mesh ref = build_structured_mesh(CaseId::graetz, 10, 5);
  const auto maps = subdomain_maps(CaseId::graetz, Parameter{{0.1, 2.0, 2.2}});
  auto constant = [](const Point&) { return 3.25; };
  for (const auto& map : maps)
    for (const Point& x : {Point(0.5, 0.5), Point(1.5, 0.1)}) EXPECT_EQ(constant(map.apply(x)), constant(x));
}

TEST(MeshExport, OneRecordPerLine) {
  const Mesh m = build_structured_mesh(CaseId::stokes_cavity, 2, 2);
  std::ostringstream os;
  write_mesh_text(os, m);
  std::istringstream is(os.str());
  std::string line;
  std::map<std::string, int> kinds;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++kinds[line.substr(0, line.find(' '))];
  }
  EXPECT_EQ(kinds["vertex"], 9);
  EXPECT_EQ(kinds["triangle"], 8);
  EXPECT_EQ(kinds["edge"], 8);
}
