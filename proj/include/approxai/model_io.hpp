#pragma once
// JSON model files, schema_version 1:
//
//   {
//     "schema_version": 1,
//     "input_shape": [4],
//     "layers": [
//       {"kind": "dense", "weights": [[...], ...], "bias": [...], "activation": "relu"},
//       {"kind": "conv2d", "kernel": [[...], ...], "bias": 0.0, "stride": 1,
//        "activation": "identity"},
//       {"kind": "flatten"}, {"kind": "relu"}, {"kind": "softmax"}, {"kind": "identity"}
//     ]
//   }

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "approxai/error.hpp"
#include "approxai/model.hpp"
#include "approxai/rng.hpp"

namespace approxai {

inline constexpr int model_schema_version = 1;

namespace detail {

inline std::string_view kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
    case LayerKind::identity: return "identity";
  }
  return "identity";
}

inline std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

[[noreturn]] inline void field_error(const std::string& field, const std::string& what) {
  throw Error(Errc::parse_error, "field '" + field + "': " + what);
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) field_error(path + key, "missing");
  return obj.at(key);
}

inline double as_number(const nlohmann::json& v, const std::string& field) {
  if (!v.is_number()) field_error(field, "expected a number");
  return v.get<double>();
}

inline Matrix<double> as_matrix(const nlohmann::json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) field_error(field, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  if (!v[0].is_array() || v[0].empty()) field_error(field + "[0]", "expected a non-empty row");
  const std::size_t cols = v[0].size();
  Matrix<double> m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string row_field = field + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != cols) field_error(row_field, "ragged row");
    for (std::size_t c = 0; c < cols; ++c) {
      m(r, c) = as_number(v[r][c], row_field + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

inline Activation parse_activation(const nlohmann::json& layer, const std::string& path) {
  if (!layer.contains("activation")) return Activation::identity;
  const auto& v = layer.at("activation");
  if (!v.is_string()) field_error(path + "activation", "expected a string");
  const auto name = v.get<std::string>();
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "softmax") return Activation::softmax;
  field_error(path + "activation", "unknown activation '" + name + "'");
}

inline std::size_t line_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

}  // namespace detail

[[nodiscard]] inline TinyModel model_from_json(const nlohmann::json& doc) {
  using detail::field_error;
  const auto& version = detail::require(doc, "schema_version", "");
  if (!version.is_number_integer()) field_error("schema_version", "expected an integer");
  if (version.get<int>() != model_schema_version) {
    throw Error(Errc::schema_version, "unsupported schema_version " + version.dump() +
                                          " (expected " + std::to_string(model_schema_version) + ")");
  }
  const auto& shape_json = detail::require(doc, "input_shape", "");
  if (!shape_json.is_array() || shape_json.empty()) field_error("input_shape", "expected a non-empty array");
  Shape shape;
  for (std::size_t i = 0; i < shape_json.size(); ++i) {
    const auto& e = shape_json[i];
    if (!e.is_number_integer() || e.get<long long>() <= 0) {
      field_error("input_shape[" + std::to_string(i) + "]", "expected a positive integer");
    }
    shape.push_back(e.get<std::size_t>());
  }

  const auto& layers_json = detail::require(doc, "layers", "");
  if (!layers_json.is_array()) field_error("layers", "expected an array");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < layers_json.size(); ++i) {
    const auto& lj = layers_json[i];
    const std::string path = "layers[" + std::to_string(i) + "].";
    const auto& kind_json = detail::require(lj, "kind", path);
    if (!kind_json.is_string()) field_error(path + "kind", "expected a string");
    const auto kind = kind_json.get<std::string>();
    Layer layer;
    if (kind == "dense") {
      layer.kind = LayerKind::dense;
      layer.weights = detail::as_matrix(detail::require(lj, "weights", path), path + "weights");
      const auto& bias = detail::require(lj, "bias", path);
      if (!bias.is_array()) field_error(path + "bias", "expected an array");
      for (std::size_t b = 0; b < bias.size(); ++b) {
        layer.bias.push_back(detail::as_number(bias[b], path + "bias[" + std::to_string(b) + "]"));
      }
      layer.activation = detail::parse_activation(lj, path);
    } else if (kind == "conv2d") {
      layer.kind = LayerKind::conv2d;
      layer.weights = detail::as_matrix(detail::require(lj, "kernel", path), path + "kernel");
      layer.bias = {lj.contains("bias") ? detail::as_number(lj.at("bias"), path + "bias") : 0.0};
      if (lj.contains("stride")) {
        const auto& stride = lj.at("stride");
        if (!stride.is_number_integer()) field_error(path + "stride", "expected an integer");
        const auto s = stride.get<long long>();
        if (s <= 0) field_error(path + "stride", "must be positive, got " + std::to_string(s));
        if (s != 1) field_error(path + "stride", "only stride 1 is supported");
        layer.stride = static_cast<int>(s);
      }
      layer.activation = detail::parse_activation(lj, path);
    } else if (kind == "flatten") {
      layer.kind = LayerKind::flatten;
    } else if (kind == "relu") {
      layer.kind = LayerKind::relu;
    } else if (kind == "softmax") {
      layer.kind = LayerKind::softmax;
    } else if (kind == "identity") {
      layer.kind = LayerKind::identity;
    } else {
      field_error(path + "kind", "unknown layer kind '" + kind + "'");
    }
    layers.push_back(std::move(layer));
  }
  return TinyModel(std::move(shape), std::move(layers));
}

[[nodiscard]] inline nlohmann::json model_to_json(const TinyModel& m) {
  nlohmann::json doc;
  doc["schema_version"] = model_schema_version;
  doc["input_shape"] = m.input_shape();
  auto matrix_json = [](const Matrix<double>& w) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < w.rows(); ++r) {
      rows.push_back(std::vector<double>(w.row(r).begin(), w.row(r).end()));
    }
    return rows;
  };
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& layer : m.layers()) {
    nlohmann::json lj;
    lj["kind"] = detail::kind_name(layer.kind);
    if (layer.kind == LayerKind::dense) {
      lj["weights"] = matrix_json(layer.weights);
      lj["bias"] = layer.bias;
      lj["activation"] = detail::activation_name(layer.activation);
    } else if (layer.kind == LayerKind::conv2d) {
      lj["kernel"] = matrix_json(layer.weights);
      lj["bias"] = layer.bias.at(0);
      lj["stride"] = layer.stride;
      lj["activation"] = detail::activation_name(layer.activation);
    }
    layers.push_back(std::move(lj));
  }
  doc["layers"] = std::move(layers);
  return doc;
}

[[nodiscard]] inline TinyModel parse_model(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::parse_error, "line " + std::to_string(detail::line_of(text, e.byte)) + ": " +
                                       e.what());
  }
  return model_from_json(doc);
}

[[nodiscard]] inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::parse_error, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[nodiscard]] inline TinyModel load_model(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_model(text);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + std::string(e.what()));
  }
}

/// Canonical text: sorted keys, shortest round-trip numbers, no whitespace.
[[nodiscard]] inline std::string canonical_model_text(const TinyModel& m) {
  return model_to_json(m).dump();
}

[[nodiscard]] inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
[[nodiscard]] inline std::string model_digest(const TinyModel& m) {
  return hex64(fnv1a64(canonical_model_text(m)));
}

inline void save_model(const TinyModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::invalid_argument, "cannot write '" + path + "'");
  out << model_to_json(m).dump(2) << '\n';
}

}  // namespace approxai
