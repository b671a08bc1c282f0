#pragma once

// JSON schema for predictor inputs and parameters (see docs/schemas.md).
// Matrices are {"rows": r, "cols": c, "data": [row-major values]}.

#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "gvc/error.hpp"
#include "gvc/predictor.hpp"

namespace gvc {

using nlohmann::json;

inline json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ConfigError(fmt::format("matrix: {} values for a {}x{} matrix", data.size(), rows, cols));
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data.at(static_cast<std::size_t>(r * cols + c)).get<double>();
  return m;
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline json to_json(const ModalSequence& s) {
  return {{"modality", to_string(s.modality)}, {"timestamps", s.timestamps}, {"data", matrix_to_json(s.data)}};
}

inline ModalSequence modal_sequence_from_json(const json& j) {
  ModalSequence s;
  s.modality = modality_from_string(j.at("modality").get<std::string>());
  s.timestamps = j.at("timestamps").get<std::vector<double>>();
  s.data = matrix_from_json(j.at("data"));
  s.validate();
  return s;
}

inline json to_json(const AttentionParams& p) {
  return {{"source", to_string(p.source)},
          {"target", to_string(p.target)},
          {"w_q", matrix_to_json(p.w_q)},
          {"w_k", matrix_to_json(p.w_k)},
          {"w_v", matrix_to_json(p.w_v)}};
}

inline AttentionParams attention_params_from_json(const json& j) {
  AttentionParams p;
  p.source = modality_from_string(j.at("source").get<std::string>());
  p.target = modality_from_string(j.at("target").get<std::string>());
  p.w_q = matrix_from_json(j.at("w_q"));
  p.w_k = matrix_from_json(j.at("w_k"));
  p.w_v = matrix_from_json(j.at("w_v"));
  p.validate();
  return p;
}

inline json to_json(const AttentionBlock& b) {
  json j{{"attention", to_json(b.attention)}};
  j["norm"] = b.norm ? json{{"scale", vector_to_json(b.norm->scale)},
                            {"shift", vector_to_json(b.norm->shift)},
                            {"epsilon", b.norm->epsilon}}
                     : json(nullptr);
  j["feed_forward"] = b.feed_forward ? json{{"w1", matrix_to_json(b.feed_forward->w1)},
                                            {"b1", vector_to_json(b.feed_forward->b1)},
                                            {"w2", matrix_to_json(b.feed_forward->w2)},
                                            {"b2", vector_to_json(b.feed_forward->b2)}}
                                     : json(nullptr);
  return j;
}

inline AttentionBlock attention_block_from_json(const json& j) {
  AttentionBlock b;
  b.attention = attention_params_from_json(j.at("attention"));
  if (j.contains("norm") && !j.at("norm").is_null()) {
    const auto& n = j.at("norm");
    b.norm = LayerNorm{vector_from_json(n.at("scale")), vector_from_json(n.at("shift")), n.value("epsilon", 1e-5)};
  }
  if (j.contains("feed_forward") && !j.at("feed_forward").is_null()) {
    const auto& f = j.at("feed_forward");
    b.feed_forward = FeedForward{matrix_from_json(f.at("w1")), vector_from_json(f.at("b1")),
                                 matrix_from_json(f.at("w2")), vector_from_json(f.at("b2"))};
  }
  return b;
}

inline json to_json(const FusionCoreParams& p) {
  json cross = json::array();
  for (const auto& b : p.cross) cross.push_back(to_json(b));
  return {{"host", to_string(p.host)},
          {"num_heads", p.num_heads},
          {"cross", std::move(cross)},
          {"self", to_json(p.self)},
          {"w_concatenate", matrix_to_json(p.w_concatenate)}};
}

inline FusionCoreParams fusion_core_params_from_json(const json& j) {
  FusionCoreParams p;
  p.host = modality_from_string(j.at("host").get<std::string>());
  p.num_heads = j.value("num_heads", 1);
  const auto& cross = j.at("cross");
  if (cross.size() != 3) throw ConfigError("fusion core: 'cross' must list exactly three blocks");
  for (std::size_t i = 0; i < 3; ++i) p.cross[i] = attention_block_from_json(cross.at(i));
  p.self = attention_block_from_json(j.at("self"));
  p.w_concatenate = matrix_from_json(j.at("w_concatenate"));
  p.validate();
  return p;
}

inline json to_json(const ConvKernel& k) {
  json taps = json::array();
  for (const auto& t : k.taps) taps.push_back(matrix_to_json(t));
  return {{"taps", std::move(taps)}, {"bias", vector_to_json(k.bias)}};
}

inline ConvKernel conv_kernel_from_json(const json& j) {
  ConvKernel k;
  for (const auto& t : j.at("taps")) k.taps.push_back(matrix_from_json(t));
  k.bias = vector_from_json(j.at("bias"));
  return k;
}

inline json to_json(const PredictorParams& p) {
  json align = json::object();
  json cores = json::object();
  for (auto m : kModalities) {
    const auto mi = static_cast<std::size_t>(m);
    align[std::string(to_string(m))] = to_json(p.align[mi]);
    cores[std::string(to_string(m))] = to_json(p.cores[mi]);
  }
  return {{"model_dim", p.model_dim},
          {"timestamp_period", p.timestamp_period},
          {"horizon", p.horizon},
          {"align", std::move(align)},
          {"cores", std::move(cores)},
          {"fc_weights", matrix_to_json(p.fc_weights)},
          {"fc_bias", vector_to_json(p.fc_bias)}};
}

inline PredictorParams predictor_params_from_json(const json& j) {
  PredictorParams p;
  p.model_dim = j.at("model_dim").get<int>();
  p.timestamp_period = j.value("timestamp_period", kDefaultTimestampPeriod);
  p.horizon = j.value("horizon", 1.0);
  for (auto m : kModalities) {
    const auto mi = static_cast<std::size_t>(m);
    const std::string key(to_string(m));
    p.align[mi] = conv_kernel_from_json(j.at("align").at(key));
    p.cores[mi] = fusion_core_params_from_json(j.at("cores").at(key));
    if (p.cores[mi].host != m) throw ConfigError(fmt::format("cores.{}: host field says {}", key, to_string(p.cores[mi].host)));
  }
  p.fc_weights = matrix_from_json(j.at("fc_weights"));
  p.fc_bias = vector_from_json(j.at("fc_bias"));
  return p;
}

}  // namespace gvc
