#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlarhmm/model.hpp"

namespace nlarhmm {

using Json = nlohmann::json;

// Deterministic JSON text: keys sorted, doubles with 17 significant digits,
// arrays of scalars on one line. Writing a parsed document reproduces it
// byte for byte.
namespace detail {

inline void write_number(std::string& out, double x) {
  if (!std::isfinite(x)) throw DataError("json: cannot write a non-finite number");
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  out.append(buf, static_cast<std::size_t>(n));
}

inline bool is_scalar_array(const Json& j) {
  for (const auto& e : j) {
    if (e.is_structured()) return false;
  }
  return true;
}

inline void write_json(std::string& out, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(key).dump() + ": ";
        write_json(out, value, indent + 2);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      if (is_scalar_array(j)) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i > 0) out += ", ";
          write_json(out, j[i], indent);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        write_json(out, j[i], indent + 2);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float:
      write_number(out, j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string to_json_text(const Json& j) {
  std::string out;
  detail::write_json(out, j, 0);
  out += "\n";
  return out;
}

// ---- primitives ----------------------------------------------------------

inline Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

inline Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vector(m.row(r).transpose())));
  return j;
}

inline Vector vector_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string("json: '") + what + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError(std::string("json: '") + what + "' must contain numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline Matrix matrix_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string("json: '") + what + "' must be an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[static_cast<std::size_t>(r)], what);
    if (row.size() != cols) throw DataError(std::string("json: '") + what + "' has ragged rows");
    m.row(r) = row.transpose();
  }
  return m;
}

inline const Json& require_key(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(std::string("json: missing key '") + key + "'");
  return j.at(key);
}

// ---- layout, basis, dynamics -------------------------------------------

inline Json to_json(const ObservationLayout& layout) {
  Json blocks = Json::array();
  for (const auto& b : layout.blocks()) blocks.push_back({{"name", b.name}, {"kind", to_string(b.kind)}, {"dim", b.dim}});
  return {{"blocks", blocks}};
}

inline ObservationLayout layout_from_json(const Json& j) {
  ObservationLayout layout;
  for (const auto& b : require_key(j, "blocks")) {
    const BlockKind kind = block_kind_from_string(require_key(b, "kind").get<std::string>());
    const int dim = b.contains("dim") ? b.at("dim").get<int>()
                                      : (kind == BlockKind::Quaternion ? 4 : (kind == BlockKind::Scalar ? 1 : 0));
    layout.add(require_key(b, "name").get<std::string>(), kind, dim);
  }
  return layout;
}

inline Json to_json(const BasisFamily& basis) {
  return std::visit(
      [](const auto& b) -> Json {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, LinearBasis>) {
          return {{"kind", "linear"}, {"d", b.d}};
        } else if constexpr (std::is_same_v<T, PolynomialBasis>) {
          return {{"kind", "poly"}, {"d", b.d}, {"k", b.k}};
        } else {
          return {{"kind", "grbf"}, {"centers", to_json(b.centers)}, {"widths", to_json(b.widths)}};
        }
      },
      basis.kind());
}

inline BasisFamily basis_from_json(const Json& j) {
  const auto kind = require_key(j, "kind").get<std::string>();
  if (kind == "linear") return BasisFamily::linear(require_key(j, "d").get<int>());
  if (kind == "poly") return BasisFamily::polynomial(require_key(j, "d").get<int>(), require_key(j, "k").get<int>());
  if (kind == "grbf") {
    return BasisFamily::grbf(matrix_from_json(require_key(j, "centers"), "centers"),
                             vector_from_json(require_key(j, "widths"), "widths"));
  }
  throw DataError("json: unknown basis kind '" + kind + "'");
}

inline Json to_json(const BlockDynamics& part) {
  return std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, QuaternionDynamics>) {
          return {{"kind", "quaternion"}, {"rotvec", to_json(Vector(p.rotvec()))}, {"sigma", to_json(p.noise().covariance())}};
        } else {
          return {{"kind", "cartesian"},
                  {"basis", to_json(p.basis())},
                  {"omega", to_json(p.weights())},
                  {"sigma", to_json(p.noise().covariance())}};
        }
      },
      part);
}

inline BlockDynamics block_dynamics_from_json(const Json& j) {
  const auto kind = require_key(j, "kind").get<std::string>();
  const Matrix sigma = matrix_from_json(require_key(j, "sigma"), "sigma");
  if (kind == "quaternion") {
    const Vector r = vector_from_json(require_key(j, "rotvec"), "rotvec");
    require_same_size(r.size(), 3, "json rotvec");
    return QuaternionDynamics(RotationVector(r), GaussianNoise::restored(sigma));
  }
  if (kind == "cartesian") {
    return CartesianDynamics(basis_from_json(require_key(j, "basis")), matrix_from_json(require_key(j, "omega"), "omega"),
                             GaussianNoise::restored(sigma));
  }
  throw DataError("json: unknown dynamics kind '" + kind + "'");
}

// A single-block emission is written as the bare block payload; several
// blocks are written as {"kind": "composite", "parts": [...]}.
inline Json to_json(const EmissionDynamics& e) {
  if (e.parts().size() == 1) return to_json(e.parts().front());
  Json parts = Json::array();
  for (const auto& p : e.parts()) parts.push_back(to_json(p));
  return {{"kind", "composite"}, {"parts", parts}};
}

inline EmissionDynamics emission_from_json(const Json& j, const ObservationLayout& layout) {
  std::vector<BlockDynamics> parts;
  if (require_key(j, "kind").get<std::string>() == "composite") {
    for (const auto& p : require_key(j, "parts")) parts.push_back(block_dynamics_from_json(p));
  } else {
    parts.push_back(block_dynamics_from_json(j));
  }
  return CompositeDynamics(layout, std::move(parts));
}

inline Json to_json(const Standardization& s) {
  Json pass = Json::array();
  for (bool b : s.passthrough) pass.push_back(b);
  return {{"mean", to_json(s.mean)}, {"scale", to_json(s.scale)}, {"passthrough", pass}};
}

inline Standardization standardization_from_json(const Json& j) {
  Standardization s;
  s.mean = vector_from_json(require_key(j, "mean"), "mean");
  s.scale = vector_from_json(require_key(j, "scale"), "scale");
  for (const auto& b : require_key(j, "passthrough")) s.passthrough.push_back(b.get<bool>());
  if (s.scale.size() != s.mean.size() || s.passthrough.size() != static_cast<std::size_t>(s.mean.size())) {
    throw DataError("json: standardization fields differ in length");
  }
  if (!(s.scale.array() > 0.0).all()) throw DataError("json: standardization scales must be positive");
  return s;
}

// ---- model ---------------------------------------------------------------

inline Json to_json(const ModelParams& m) {
  Json em = Json::array();
  for (const auto& e : m.emissions()) em.push_back(to_json(e));
  Json j = {{"S", m.num_modes()},
            {"pi", to_json(m.init().weights())},
            {"trans", to_json(m.trans().probs())},
            {"layout", to_json(m.layout())},
            {"emissions", em}};
  j["standardization"] = m.standardization() ? to_json(*m.standardization()) : Json(nullptr);
  return j;
}

inline ModelParams model_from_json(const Json& j) {
  try {
    const int S = require_key(j, "S").get<int>();
    const ObservationLayout layout = layout_from_json(require_key(j, "layout"));
    std::vector<EmissionDynamics> em;
    for (const auto& e : require_key(j, "emissions")) em.push_back(emission_from_json(e, layout));
    if (static_cast<int>(em.size()) != S) throw DataError("json: number of emissions != S");
    std::optional<Standardization> st;
    if (j.contains("standardization") && !j.at("standardization").is_null()) {
      st = standardization_from_json(j.at("standardization"));
    }
    return ModelParams(InitialDistribution(vector_from_json(require_key(j, "pi"), "pi")),
                       TransitionMatrix(matrix_from_json(require_key(j, "trans"), "trans")), std::move(em), std::move(st));
  } catch (const Json::exception& e) {
    throw DataError(std::string("json: malformed model: ") + e.what());
  }
}

inline std::string model_to_string(const ModelParams& m) { return to_json_text(to_json(m)); }

inline ModelParams model_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("json: ") + e.what());
  }
  return model_from_json(j);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw DataError("failed writing '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void save_model(const ModelParams& m, const std::string& path) { write_text_file(path, model_to_string(m)); }

inline ModelParams load_model(const std::string& path) {
  try {
    return model_from_string(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace nlarhmm
