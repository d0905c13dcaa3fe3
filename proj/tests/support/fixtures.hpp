#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "meshseq/canonical.hpp"
#include "meshseq/geometry.hpp"
#include "meshseq/rng.hpp"

namespace meshseq::fixture {

// Random triangle soup with distinct grid points per face.
inline QuantizedMesh random_qmesh(RandomStream& rng, std::size_t faces, int n = 128) {
  QuantizedMesh q{GridSpec(n), {}};
  auto coord = [&] { return static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(n))); };
  while (q.faces.size() < faces) {
    QFace f;
    f.arity = 3;
    for (int k = 0; k < 3; ++k) f.v[k] = {coord(), coord(), coord()};
    if (f.v[0] == f.v[1] || f.v[1] == f.v[2] || f.v[0] == f.v[2]) continue;
    q.faces.push_back(f);
  }
  return q;
}

// Random canonical mesh with exactly `faces` faces.
inline QuantizedMesh random_canonical(RandomStream& rng, std::size_t faces, int n = 128) {
  for (;;) {
    auto q = canonicalize(random_qmesh(rng, faces, n));
    if (q.faces.size() == faces) return q;
  }
}

inline Mesh random_mesh(RandomStream& rng, std::size_t n_vertices, std::size_t n_faces) {
  Mesh m;
  for (std::size_t i = 0; i < n_vertices; ++i) {
    m.vertices.push_back({rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 4 - 2});
  }
  for (std::size_t f = 0; f < n_faces; ++f) {
    Triangle t{};
    for (auto& i : t) i = static_cast<std::uint32_t>(rng.below(n_vertices));
    m.faces.push_back(t);
  }
  return m;
}

inline Mesh unit_cube(double tx = 0, double ty = 0, double tz = 0) {
  Mesh m;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back({(i & 1) + tx, ((i >> 1) & 1) + ty, ((i >> 2) & 1) + tz});
  }
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

// Closed cylinder: 4 * segments faces.
inline Mesh cylinder(int segments, double radius = 0.5, double height = 1.0) {
  Mesh m;
  for (int ring = 0; ring < 2; ++ring) {
    for (int s = 0; s < segments; ++s) {
      const double a = 2 * std::numbers::pi * s / segments;
      m.vertices.push_back({radius * std::cos(a), ring * height, radius * std::sin(a)});
    }
  }
  const auto bottom = static_cast<std::uint32_t>(m.vertices.size());
  m.vertices.push_back({0, 0, 0});
  m.vertices.push_back({0, height, 0});
  const auto n = static_cast<std::uint32_t>(segments);
  for (std::uint32_t s = 0; s < n; ++s) {
    const auto t = (s + 1) % n;
    m.faces.push_back({s, t, n + s});
    m.faces.push_back({t, n + t, n + s});
    m.faces.push_back({bottom, t, s});
    m.faces.push_back({bottom + 1, n + s, n + t});
  }
  return m;
}

// Cone: 2 * segments faces.
inline Mesh cone(int segments, double radius = 0.5, double height = 1.0) {
  Mesh m;
  for (int s = 0; s < segments; ++s) {
    const double a = 2 * std::numbers::pi * s / segments;
    m.vertices.push_back({radius * std::cos(a), 0, radius * std::sin(a)});
  }
  const auto n = static_cast<std::uint32_t>(segments);
  m.vertices.push_back({0, height, 0});
  m.vertices.push_back({0, 0, 0});
  for (std::uint32_t s = 0; s < n; ++s) {
    const auto t = (s + 1) % n;
    m.faces.push_back({s, n, t});
    m.faces.push_back({n + 1, s, t});
  }
  return m;
}

// UV sphere: 2 * rings * segments faces minus the pole slivers.
inline Mesh uv_sphere(int rings, int segments, double radius = 1.0) {
  Mesh m;
  m.vertices.push_back({0, radius, 0});
  for (int r = 1; r < rings; ++r) {
    const double phi = std::numbers::pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double th = 2 * std::numbers::pi * s / segments;
      m.vertices.push_back({radius * std::sin(phi) * std::cos(th), radius * std::cos(phi),
                            radius * std::sin(phi) * std::sin(th)});
    }
  }
  m.vertices.push_back({0, -radius, 0});
  const auto seg = static_cast<std::uint32_t>(segments);
  auto ring_vertex = [&](int r, std::uint32_t s) { return 1 + static_cast<std::uint32_t>(r - 1) * seg + s % seg; };
  for (std::uint32_t s = 0; s < seg; ++s) m.faces.push_back({0, ring_vertex(1, s + 1), ring_vertex(1, s)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (std::uint32_t s = 0; s < seg; ++s) {
      m.faces.push_back({ring_vertex(r, s), ring_vertex(r, s + 1), ring_vertex(r + 1, s)});
      m.faces.push_back({ring_vertex(r, s + 1), ring_vertex(r + 1, s + 1), ring_vertex(r + 1, s)});
    }
  }
  const auto south = static_cast<std::uint32_t>(m.vertices.size() - 1);
  for (std::uint32_t s = 0; s < seg; ++s) m.faces.push_back({south, ring_vertex(rings - 1, s), ring_vertex(rings - 1, s + 1)});
  return m;
}

// Sixteen distinct small meshes (20..48 faces) used by the overfit runs.
inline std::vector<Mesh> overfit_corpus() {
  std::vector<Mesh> meshes;
  for (int s = 5; s <= 12; ++s) {
    auto m = cylinder(s, 0.5, 0.6 + 0.1 * (s - 5));
    m.source_id = "cylinder_" + std::to_string(s);
    meshes.push_back(std::move(m));
  }
  for (int s = 10; s <= 24; s += 2) {
    auto m = cone(s, 0.5, 0.4 + 0.1 * (s - 10) / 2);
    m.source_id = "cone_" + std::to_string(s);
    meshes.push_back(std::move(m));
  }
  return meshes;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace meshseq::fixture
