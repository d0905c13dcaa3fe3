// Python bindings over meshseq::api. No logic lives here: arrays are copied
// into the core's flat layout and results copied back.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "meshseq/api.hpp"
#include "meshseq/config_json.hpp"
#include "meshseq/error.hpp"

namespace py = pybind11;
using namespace meshseq;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Indices = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

void require_columns(const py::array& a, const char* what) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error(std::string(what) + " must have shape (n, 3)");
}

CodecOptions codec_options(const std::string& mode, const std::string& order, std::size_t max_faces) {
  return {parse_mode(mode), parse_order(order), max_faces};
}

Mesh to_mesh(const py::handle& item) {
  auto pair = item.cast<py::tuple>();
  if (pair.size() != 2) throw py::value_error("meshes are (vertices, faces) pairs");
  const auto v = pair[0].cast<Doubles>();
  const auto f = pair[1].cast<Indices>();
  require_columns(v, "vertices");
  require_columns(f, "faces");
  return api::mesh_from_arrays({v.data(), static_cast<std::size_t>(v.size())},
                               {f.data(), static_cast<std::size_t>(f.size())});
}

}  // namespace

PYBIND11_MODULE(meshseq, m) {
  m.doc() = "Mesh tokenizer and generation metrics";

  // MeshseqError carries the core error code as `.code`.
  static py::exception<Error> error(m, "MeshseqError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error.ptr())(std::string(e.what()));
      instance.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  m.def(
      "tokenize",
      [](const Doubles& vertices, const Indices& faces, int resolution, std::size_t max_faces, const std::string& mode,
         const std::string& order) {
        require_columns(vertices, "vertices");
        require_columns(faces, "faces");
        const auto codec = codec_options(mode, order, max_faces);
        std::vector<Token> ids;
        {
          py::gil_scoped_release release;
          ids = api::tokenize({vertices.data(), static_cast<std::size_t>(vertices.size())},
                              {faces.data(), static_cast<std::size_t>(faces.size())}, resolution, max_faces, codec);
        }
        return std::vector<int>(ids.begin(), ids.end());
      },
      py::arg("vertices"), py::arg("faces"), py::arg("resolution") = 128, py::arg("max_faces") = 800,
      py::arg("mode") = "triangle", py::arg("order") = "xyz",
      "normalize -> quantize -> canonicalize -> encode; returns token ids");

  m.def(
      "detokenize",
      [](const std::vector<int>& ids, int resolution, const std::string& mode, const std::string& order) {
        const std::vector<Token> tokens(ids.begin(), ids.end());
        api::ArrayMesh mesh;
        {
          py::gil_scoped_release release;
          mesh = api::detokenize(tokens, resolution, codec_options(mode, order, 800));
        }
        const auto nv = static_cast<py::ssize_t>(mesh.vertices.size() / 3);
        const auto nf = static_cast<py::ssize_t>(mesh.faces.size() / 3);
        Doubles v({nv, py::ssize_t{3}});
        Indices f({nf, py::ssize_t{3}});
        std::copy(mesh.vertices.begin(), mesh.vertices.end(), v.mutable_data());
        std::copy(mesh.faces.begin(), mesh.faces.end(), f.mutable_data());
        return py::make_tuple(v, f);
      },
      py::arg("ids"), py::arg("resolution") = 128, py::arg("mode") = "triangle", py::arg("order") = "xyz",
      "strict decode -> dequantize; returns (vertices, faces)");

  m.def(
      "evaluate",
      [](const py::list& gen, const py::list& ref, std::size_t points, int jsd_grid, std::uint64_t seed,
         bool normalize) {
        std::vector<Mesh> g, r;
        for (const auto& item : gen) g.push_back(to_mesh(item));
        for (const auto& item : ref) r.push_back(to_mesh(item));
        EvalParams params{points, jsd_grid, seed, normalize};
        std::string json;
        {
          py::gil_scoped_release release;
          json = api::evaluate(g, r, params).to_json();
        }
        return py::module_::import("json").attr("loads")(json);
      },
      py::arg("gen"), py::arg("ref"), py::arg("points") = 2048, py::arg("jsd_grid") = 28, py::arg("seed") = 0,
      py::arg("normalize") = true, "COV / MMD / 1-NNA / JSD report as a dict");
}
