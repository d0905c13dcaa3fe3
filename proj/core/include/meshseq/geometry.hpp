#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace meshseq {

using Vec3 = std::array<double, 3>;
using Triangle = std::array<std::uint32_t, 3>;

// Continuous-coordinate triangle soup; the ingestion form.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> faces;
  std::string source_id;

  std::size_t face_count() const { return faces.size(); }
  bool operator==(const Mesh&) const = default;
};

// Throws Error(kInvalidMesh / kEmptyMesh) when any invariant fails: face
// indices in range, finite coordinates, at least one face.
void validate(const Mesh& mesh);

struct BoundingBox {
  Vec3 lo;
  Vec3 hi;

  Vec3 extent() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }
  Vec3 center() const {
    return {(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2};
  }
};

// Bounding box over vertices referenced by faces.
BoundingBox bounding_box(const Mesh& mesh);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace meshseq
