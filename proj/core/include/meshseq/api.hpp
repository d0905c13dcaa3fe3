#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "meshseq/codec.hpp"
#include "meshseq/geometry.hpp"
#include "meshseq/metrics.hpp"

// Flat-array entry points for scripting-language bindings. They compose the
// same core calls as the command line tool; nothing is reimplemented here.
namespace meshseq::api {

// vertices: P x 3 row-major, faces: F x 3 row-major 0-based indices.
// normalize -> quantize -> canonicalize -> encode. Errors propagate as
// meshseq::Error with the same codes as the pipeline.
std::vector<Token> tokenize(std::span<const double> vertices, std::span<const std::int64_t> faces,
                            int resolution = 128, std::size_t max_faces = 800,
                            const CodecOptions& codec = {});

struct ArrayMesh {
  std::vector<double> vertices;      // P x 3
  std::vector<std::int64_t> faces;   // F x 3
};

// decode (strict) -> dequantize.
ArrayMesh detokenize(std::span<const Token> tokens, int resolution = 128,
                     const CodecOptions& codec = {});

EvalReport evaluate(std::span<const Mesh> gen, std::span<const Mesh> ref, const EvalParams& params = {});

Mesh mesh_from_arrays(std::span<const double> vertices, std::span<const std::int64_t> faces);

}  // namespace meshseq::api
