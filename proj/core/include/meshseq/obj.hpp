#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "meshseq/geometry.hpp"

namespace meshseq {

struct ObjOptions {
  // Fan-triangulate k-gons (k > 3); when false they are rejected.
  bool triangulate = true;
};

// Minimal OBJ dialect: only `v` and `f` records are honored. Indices in the
// result are 0-based. Throws Error on malformed input; never returns a
// partially valid mesh.
Mesh parse_obj(std::string_view text, const ObjOptions& options = {});

// Deterministic text: `v` records with 6 decimals, then 1-based `f` records.
std::string write_obj(const Mesh& mesh);

Mesh read_obj_file(const std::filesystem::path& path,
                   const ObjOptions& options = {});
void write_obj_file(const std::filesystem::path& path, const Mesh& mesh);

}  // namespace meshseq
