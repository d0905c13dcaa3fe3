#include "meshseq/codec.hpp"

#include <string>

#include "meshseq/error.hpp"

namespace meshseq {

std::size_t face_token_count(int arity, GrammarMode mode) {
  const auto coords = static_cast<std::size_t>(arity) * 3;
  return mode == GrammarMode::kHybrid ? coords + 2 : coords;
}

namespace {

void emit_vertex(std::vector<Token>& out, const GridPoint& p, ComponentOrder order) {
  if (order == ComponentOrder::kXYZ) {
    out.insert(out.end(), {p.x, p.y, p.z});
  } else {
    out.insert(out.end(), {p.z, p.y, p.x});
  }
}

GridPoint read_vertex(const Token* t, ComponentOrder order) {
  const auto u = [](Token v) { return static_cast<std::uint16_t>(v); };
  if (order == ComponentOrder::kXYZ) return {u(t[0]), u(t[1]), u(t[2])};
  return {u(t[2]), u(t[1]), u(t[0])};
}

}  // namespace

TokenSequence encode(const QuantizedMesh& qmesh, const Vocabulary& vocab,
                     const CodecOptions& options) {
  if (qmesh.grid.resolution != vocab.resolution) {
    throw Error(ErrorCode::kInvalidArgument, "grid resolution does not match vocabulary");
  }
  if (qmesh.faces.size() > options.max_faces) {
    throw Error(ErrorCode::kTooManyFaces,
                std::to_string(qmesh.faces.size()) + " faces exceed max_faces " +
                    std::to_string(options.max_faces));
  }
  if (!is_canonical(qmesh)) {
    throw Error(ErrorCode::kNonCanonical, "encode requires a canonical mesh");
  }
  TokenSequence seq;
  seq.mode = options.mode;
  std::size_t total = 2;
  for (const auto& f : qmesh.faces) total += face_token_count(f.arity, options.mode);
  seq.tokens.reserve(total);
  seq.tokens.push_back(vocab.bos());
  for (const auto& f : qmesh.faces) {
    if (options.mode == GrammarMode::kTriangle) {
      if (f.arity != 3) {
        throw Error(ErrorCode::kUnsupportedFace, "quad face in triangle-only mode");
      }
      for (int k = 0; k < 3; ++k) emit_vertex(seq.tokens, f.v[k], options.order);
    } else {
      const bool tri = f.arity == 3;
      seq.tokens.push_back(tri ? vocab.tri_open() : vocab.quad_open());
      for (int k = 0; k < f.arity; ++k) emit_vertex(seq.tokens, f.v[k], options.order);
      seq.tokens.push_back(tri ? vocab.tri_close() : vocab.quad_close());
    }
  }
  seq.tokens.push_back(vocab.eos());
  return seq;
}

GrammarState::GrammarState(const Vocabulary& vocab, GrammarMode mode)
    : vocab_(vocab), mode_(mode) {}

bool GrammarState::admits(Token t, std::optional<std::size_t> remaining) const {
  if (remaining && *remaining == 0) return false;
  switch (phase_) {
    case Phase::kStart:
      return t == vocab_.bos();
    case Phase::kBoundary: {
      if (t == vocab_.eos()) return faces_ > 0;
      // Opening a face must leave room to finish it and emit EOS.
      auto fits = [&](int arity) {
        if (!remaining) return true;
        return face_token_count(arity, mode_) + 1 <= *remaining;
      };
      if (mode_ == GrammarMode::kTriangle) return vocab_.is_coordinate(t) && fits(3);
      if (t == vocab_.tri_open()) return fits(3);
      if (t == vocab_.quad_open()) return fits(4);
      return false;
    }
    case Phase::kInFace:
      return vocab_.is_coordinate(t);
    case Phase::kExpectClose:
      return t == close_token_;
    case Phase::kDone:
      return false;
  }
  return false;
}

std::vector<std::uint8_t> GrammarState::mask(std::optional<std::size_t> remaining) const {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(vocab_.size()), 0);
  for (Token t = 0; t < vocab_.size(); ++t) m[static_cast<std::size_t>(t)] = admits(t, remaining);
  return m;
}

void GrammarState::advance(Token t) {
  if (!admits(t)) {
    throw Error(ErrorCode::kMalformedSequence,
                "token " + std::to_string(t) + " not admitted at position " +
                    std::to_string(position_));
  }
  ++position_;
  switch (phase_) {
    case Phase::kStart:
      phase_ = Phase::kBoundary;
      offset_ = 0;
      break;
    case Phase::kBoundary:
      if (t == vocab_.eos()) {
        phase_ = Phase::kDone;
      } else if (mode_ == GrammarMode::kTriangle) {
        phase_ = Phase::kInFace;
        coords_left_ = 8;
        offset_ = 1;
      } else {
        const bool tri = t == vocab_.tri_open();
        phase_ = Phase::kInFace;
        coords_left_ = tri ? 9 : 12;
        close_token_ = tri ? vocab_.tri_close() : vocab_.quad_close();
        offset_ = 1;
      }
      break;
    case Phase::kInFace:
      ++offset_;
      if (--coords_left_ == 0) {
        if (mode_ == GrammarMode::kTriangle) {
          phase_ = Phase::kBoundary;
          offset_ = 0;
          ++faces_;
        } else {
          phase_ = Phase::kExpectClose;
        }
      }
      break;
    case Phase::kExpectClose:
      phase_ = Phase::kBoundary;
      offset_ = 0;
      ++faces_;
      break;
    case Phase::kDone:
      break;
  }
}

std::vector<std::uint8_t> grammar_mask(const GrammarState& state,
                                       std::optional<std::size_t> remaining) {
  return state.mask(remaining);
}

DecodeResult decode(std::span<const Token> tokens, const Vocabulary& vocab,
                    const CodecOptions& options, bool strict) {
  DecodeResult result;
  result.mesh.grid = GridSpec(vocab.resolution);
  if (tokens.empty() || tokens.front() != vocab.bos()) {
    throw Error(ErrorCode::kMalformedSequence, "sequence does not start with BOS");
  }
  GrammarState state(vocab, options.mode);
  std::size_t committed = 0;   // tokens belonging to complete faces (+ BOS/EOS)
  std::vector<Token> coords;
  coords.reserve(12);

  auto fail = [&](std::size_t at, const std::string& why) {
    result.violation = "token " + std::to_string(at) + ": " + why;
    if (strict) throw Error(ErrorCode::kMalformedSequence, result.violation);
  };

  std::size_t i = 0;
  for (; i < tokens.size(); ++i) {
    const Token t = tokens[i];
    if (!state.admits(t)) {
      if (t == vocab.eos() && state.at_boundary()) {
        fail(i, "empty body");
      } else if (state.finished()) {
        fail(i, "tokens after EOS");
      } else if (t == vocab.eos()) {
        fail(i, "interior length is not a whole number of faces");
      } else if (!vocab.is_coordinate(t) && !state.at_boundary()) {
        fail(i, "special token inside a face");
      } else {
        fail(i, "unexpected token " + std::to_string(t));
      }
      break;
    }
    const bool was_boundary = state.at_boundary();
    state.advance(t);
    if (was_boundary && t != vocab.eos()) coords.clear();
    if (vocab.is_coordinate(t)) coords.push_back(t);
    if (state.at_boundary() && i > 0) {
      // A face group just closed.
      QFace face;
      face.arity = static_cast<std::uint8_t>(coords.size() / 3);
      for (int k = 0; k < face.arity; ++k) face.v[k] = read_vertex(&coords[3 * k], options.order);
      result.mesh.faces.push_back(face);
      committed = i + 1;
    } else if (i == 0) {
      committed = 1;
    }
    if (state.finished()) {
      result.terminated = true;
      committed = i + 1;
      ++i;
      break;
    }
  }
  if (result.violation.empty()) {
    if (i < tokens.size()) {
      fail(i, "tokens after EOS");
    } else if (!result.terminated) {
      fail(tokens.size(), state.at_boundary() ? "missing EOS"
                                              : "interior length is not a whole number of faces");
    }
  }
  result.consumed = committed;
  result.discarded = tokens.size() - committed;
  return result;
}

ValidationReport validate(std::span<const Token> tokens, const Vocabulary& vocab,
                          GrammarMode mode) {
  ValidationReport report;
  if (tokens.empty()) {
    report.first_violation = 0;
    report.message = "empty sequence";
    return report;
  }
  GrammarState state(vocab, mode);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!state.admits(tokens[i])) {
      report.first_violation = i;
      report.n_faces = state.faces();
      if (state.finished()) {
        report.message = "tokens after EOS";
      } else if (tokens[i] == vocab.eos() && state.at_boundary()) {
        report.message = "empty body";
      } else {
        report.message = "unexpected token " + std::to_string(tokens[i]);
      }
      return report;
    }
    state.advance(tokens[i]);
  }
  report.n_faces = state.faces();
  if (!state.finished()) {
    report.first_violation = tokens.size();
    report.message = state.at_boundary() ? "missing EOS" : "truncated face";
    return report;
  }
  report.valid = true;
  return report;
}

}  // namespace meshseq
