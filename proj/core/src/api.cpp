#include "meshseq/api.hpp"

#include "meshseq/canonical.hpp"
#include "meshseq/dataset.hpp"
#include "meshseq/error.hpp"

namespace meshseq::api {

Mesh mesh_from_arrays(std::span<const double> vertices, std::span<const std::int64_t> faces) {
  if (vertices.size() % 3 != 0 || faces.size() % 3 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "arrays must have 3 columns");
  }
  Mesh mesh;
  for (std::size_t i = 0; i < vertices.size(); i += 3) {
    mesh.vertices.push_back({vertices[i], vertices[i + 1], vertices[i + 2]});
  }
  for (std::size_t i = 0; i < faces.size(); i += 3) {
    Triangle t{};
    for (int k = 0; k < 3; ++k) {
      const auto idx = faces[i + static_cast<std::size_t>(k)];
      if (idx < 0 || static_cast<std::size_t>(idx) >= mesh.vertices.size()) {
        throw Error(ErrorCode::kIndexOutOfRange, "face index " + std::to_string(idx) + " out of range");
      }
      t[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(idx);
    }
    mesh.faces.push_back(t);
  }
  validate(mesh);
  return mesh;
}

std::vector<Token> tokenize(std::span<const double> vertices, std::span<const std::int64_t> faces,
                            int resolution, std::size_t max_faces, const CodecOptions& codec) {
  const Mesh mesh = mesh_from_arrays(vertices, faces);
  if (!face_count_gate(mesh, max_faces)) {
    throw Error(ErrorCode::kTooManyFaces, std::to_string(mesh.face_count()) + " faces exceed max_faces");
  }
  PipelineOptions options;
  options.resolution = resolution;
  options.codec = codec;
  options.codec.max_faces = max_faces;
  const auto prepared = prepare_mesh(mesh, options);
  return encode(prepared.qmesh, Vocabulary(resolution), options.codec).tokens;
}

ArrayMesh detokenize(std::span<const Token> tokens, int resolution, const CodecOptions& codec) {
  const auto decoded = decode(tokens, Vocabulary(resolution), codec, true);
  const Mesh mesh = dequantize(decoded.mesh);
  ArrayMesh out;
  for (const auto& v : mesh.vertices) out.vertices.insert(out.vertices.end(), v.begin(), v.end());
  for (const auto& f : mesh.faces) {
    for (auto i : f) out.faces.push_back(i);
  }
  return out;
}

EvalReport evaluate(std::span<const Mesh> gen, std::span<const Mesh> ref, const EvalParams& params) {
  return meshseq::evaluate(gen, ref, params);
}

}  // namespace meshseq::api
