#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshseq/canonical.hpp"

namespace meshseq {

using Token = std::int32_t;

// Coordinate tokens 0..N-1 followed by seven special tokens.
struct Vocabulary {
  int resolution = 128;

  explicit Vocabulary(int n = 128) : resolution(GridSpec(n).resolution) {}

  Token bos() const { return resolution; }
  Token eos() const { return resolution + 1; }
  Token pad() const { return resolution + 2; }
  Token tri_open() const { return resolution + 3; }
  Token tri_close() const { return resolution + 4; }
  Token quad_open() const { return resolution + 5; }
  Token quad_close() const { return resolution + 6; }
  int size() const { return resolution + 7; }

  bool is_coordinate(Token t) const { return t >= 0 && t < resolution; }
  bool operator==(const Vocabulary&) const = default;
};

enum class GrammarMode : std::uint8_t { kTriangle = 0, kHybrid = 1 };

// Per-vertex emission order of the three coordinate components.
enum class ComponentOrder : std::uint8_t { kXYZ = 0, kZYX = 1 };

struct CodecOptions {
  GrammarMode mode = GrammarMode::kTriangle;
  ComponentOrder order = ComponentOrder::kXYZ;
  std::size_t max_faces = 800;
};

struct TokenSequence {
  std::vector<Token> tokens;
  GrammarMode mode = GrammarMode::kTriangle;

  bool operator==(const TokenSequence&) const = default;
};

// Tokens emitted per face (including group delimiters in hybrid mode).
std::size_t face_token_count(int arity, GrammarMode mode);

// Requires a canonical mesh. Triangle mode: [BOS, 9n coordinates, EOS].
TokenSequence encode(const QuantizedMesh& qmesh, const Vocabulary& vocab,
                     const CodecOptions& options = {});

struct DecodeResult {
  QuantizedMesh mesh;
  std::size_t consumed = 0;   // tokens that contributed to mesh (incl. BOS/EOS)
  std::size_t discarded = 0;  // trailing tokens dropped by a permissive decode
  bool terminated = false;    // EOS was reached
  std::string violation;      // empty when the sequence was strict-valid
};

// Strict decoding throws Error(kMalformedSequence) on any grammar violation.
// Permissive decoding stops at the first violation and drops a trailing
// partial face.
DecodeResult decode(std::span<const Token> tokens, const Vocabulary& vocab,
                    const CodecOptions& options, bool strict = true);

// Streaming grammar automaton shared by decode, validate and constrained
// sampling.
class GrammarState {
 public:
  GrammarState(const Vocabulary& vocab, GrammarMode mode);

  // Tokens admitted next. `remaining` (if given) counts the tokens still
  // allowed including the one about to be chosen; new faces are refused when
  // they could not be closed and terminated within it.
  std::vector<std::uint8_t> mask(std::optional<std::size_t> remaining = std::nullopt) const;
  bool admits(Token t, std::optional<std::size_t> remaining = std::nullopt) const;

  // Throws Error(kMalformedSequence) if `t` is not admitted.
  void advance(Token t);

  std::size_t position() const { return position_; }
  // Offset of the next token within the current face group (0 at a boundary).
  std::size_t offset() const { return offset_; }
  std::size_t faces() const { return faces_; }
  bool at_boundary() const { return phase_ == Phase::kBoundary; }
  bool finished() const { return phase_ == Phase::kDone; }

 private:
  enum class Phase : std::uint8_t { kStart, kBoundary, kInFace, kExpectClose, kDone };

  Vocabulary vocab_;
  GrammarMode mode_;
  Phase phase_ = Phase::kStart;
  std::size_t position_ = 0;
  std::size_t offset_ = 0;
  std::size_t coords_left_ = 0;
  Token close_token_ = -1;
  std::size_t faces_ = 0;
};

std::vector<std::uint8_t> grammar_mask(const GrammarState& state,
                                       std::optional<std::size_t> remaining = std::nullopt);

struct ValidationReport {
  bool valid = false;
  std::size_t n_faces = 0;
  std::optional<std::size_t> first_violation;  // token index
  std::string message;
};

ValidationReport validate(std::span<const Token> tokens, const Vocabulary& vocab,
                          GrammarMode mode = GrammarMode::kTriangle);

}  // namespace meshseq
