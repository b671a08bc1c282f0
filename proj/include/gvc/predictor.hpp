#pragma once

// Forward pass of the multimodal attention predictor: per-modality 1-D
// convolution to a shared width, positional + timestamp encoding, crossmodal
// and self attention, per-modality fusion cores and a final affine head.
// Parameters are supplied by the caller (or drawn at random); nothing here
// trains.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gvc/error.hpp"

namespace gvc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Modality { HM, EB, VO, GD };

inline constexpr std::array<Modality, 4> kModalities{Modality::HM, Modality::EB, Modality::VO, Modality::GD};

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::HM: return "HM";
    case Modality::EB: return "EB";
    case Modality::VO: return "VO";
    case Modality::GD: return "GD";
  }
  return "?";
}

inline Modality modality_from_string(std::string_view s) {
  for (auto m : kModalities) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError(fmt::format("unknown modality '{}' (expected HM, EB, VO or GD)", s));
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// One modality's raw input: T time steps by d_m features.
struct ModalSequence {
  Modality modality{Modality::HM};
  Matrix data;
  std::vector<double> timestamps;  // seconds, strictly increasing

  void validate() const {
    if (data.rows() < 1 || data.cols() < 1) {
      throw ConfigError(fmt::format("{} sequence is empty", to_string(modality)));
    }
    if (!all_finite(data)) throw ConfigError(fmt::format("{} sequence has non-finite values", to_string(modality)));
    if (static_cast<Eigen::Index>(timestamps.size()) != data.rows()) {
      throw ConfigError(fmt::format("{} sequence: {} timestamps for {} rows", to_string(modality), timestamps.size(),
                                    data.rows()));
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
      if (!(timestamps[i] > timestamps[i - 1])) {
        throw ConfigError(fmt::format("{} sequence: timestamps must strictly increase", to_string(modality)));
      }
    }
  }
};

struct EncodedSequence {
  Modality modality{Modality::HM};
  Matrix data;  // [T x d]
};

// taps[j] is [d_in x d_out]; tap j sees input row t + j - width/2.
struct ConvKernel {
  std::vector<Matrix> taps;
  Vector bias;

  int width() const { return static_cast<int>(taps.size()); }
};

// 1-D convolution along time with zero "same" padding: T rows in, T rows out.
inline Matrix align_dimensions(const ModalSequence& seq, const ConvKernel& kernel, int target_dim) {
  const auto T = seq.data.rows();
  if (T < 1 || seq.data.cols() < 1) throw ConfigError("align_dimensions: empty sequence");
  const int width = kernel.width();
  if (width < 1 || width % 2 == 0) throw ConfigError(fmt::format("align_dimensions: kernel width {} must be odd", width));
  if (width > 2 * T - 1) {
    throw ConfigError(fmt::format("align_dimensions: kernel width {} exceeds 2T-1 = {}", width, 2 * T - 1));
  }
  for (const auto& tap : kernel.taps) {
    if (tap.rows() != seq.data.cols() || tap.cols() != target_dim) {
      throw ConfigError(fmt::format("align_dimensions: tap is {}x{}, expected {}x{}", tap.rows(), tap.cols(),
                                    seq.data.cols(), target_dim));
    }
  }
  if (kernel.bias.size() != 0 && kernel.bias.size() != target_dim) {
    throw ConfigError("align_dimensions: bias length does not match target_dim");
  }

  Matrix out = Matrix::Zero(T, target_dim);
  if (kernel.bias.size() != 0) out.rowwise() += kernel.bias.transpose();
  const int half = width / 2;
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 0; j < width; ++j) {
      const Eigen::Index src = t + j - half;
      if (src < 0 || src >= T) continue;
      out.row(t).noalias() += seq.data.row(src) * kernel.taps[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

namespace detail {

// Interleaved sinusoid of a (possibly fractional) position.
inline void sinusoid_row(double position, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  const auto d = row.size();
  for (Eigen::Index i = 0; i < d / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
    row(2 * i) = std::sin(position * freq);
    row(2 * i + 1) = std::cos(position * freq);
  }
}

inline void require_even_dim(int d, std::string_view who) {
  if (d < 2 || d % 2 != 0) throw ConfigError(fmt::format("{}: dimension {} must be even and >= 2", who, d));
}

}  // namespace detail

// PE(p)_{2i} = sin(p / 10000^{2i/d}), PE(p)_{2i+1} = cos(p / 10000^{2i/d})
inline Matrix positional_encoding(int T, int d) {
  if (T < 1) throw ConfigError("positional_encoding: T must be >= 1");
  detail::require_even_dim(d, "positional_encoding");
  Matrix pe(T, d);
  for (int p = 0; p < T; ++p) detail::sinusoid_row(static_cast<double>(p), pe.row(p));
  return pe;
}

inline constexpr double kDefaultTimestampPeriod = 60.0;

// Same sinusoid evaluated at phase 2*pi * (t mod period) / period, so rows
// repeat with the given period.
inline Matrix timestamp_encoding(std::span<const double> timestamps, int d, double period = kDefaultTimestampPeriod) {
  detail::require_even_dim(d, "timestamp_encoding");
  if (!(period > 0.0)) throw ConfigError("timestamp_encoding: period must be positive");
  if (timestamps.empty()) throw ConfigError("timestamp_encoding: no timestamps");
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (!(timestamps[i] > timestamps[i - 1])) throw ConfigError("timestamp_encoding: timestamps must strictly increase");
  }
  Matrix te(static_cast<Eigen::Index>(timestamps.size()), d);
  for (std::size_t r = 0; r < timestamps.size(); ++r) {
    double frac = std::fmod(timestamps[r], period) / period;
    if (frac < 0.0) frac += 1.0;
    detail::sinusoid_row(2.0 * std::numbers::pi * frac, te.row(static_cast<Eigen::Index>(r)));
  }
  return te;
}

// E = M + PE + TE
inline EncodedSequence encode_modality(Modality modality, const Matrix& aligned, const Matrix& pe, const Matrix& te) {
  if (aligned.rows() != pe.rows() || aligned.cols() != pe.cols() || aligned.rows() != te.rows() ||
      aligned.cols() != te.cols()) {
    throw ConfigError(fmt::format("encode_modality: shapes {}x{}, {}x{}, {}x{} differ", aligned.rows(),
                                  aligned.cols(), pe.rows(), pe.cols(), te.rows(), te.cols()));
  }
  return {modality, aligned + pe + te};
}

// Projections for attention from `source` (keys/values) to `target` (queries).
struct AttentionParams {
  Modality source{Modality::HM};
  Modality target{Modality::HM};
  Matrix w_q;  // [d_target x d_k]
  Matrix w_k;  // [d_source x d_k]
  Matrix w_v;  // [d_source x d_v]

  int d_k() const { return static_cast<int>(w_q.cols()); }
  int d_v() const { return static_cast<int>(w_v.cols()); }

  void validate() const {
    if (w_q.cols() < 1 || w_v.cols() < 1) throw ConfigError("attention: d_k and d_v must be >= 1");
    if (w_k.cols() != w_q.cols()) throw ConfigError("attention: W_Q and W_K must have the same column count d_k");
    if (w_k.rows() != w_v.rows()) throw ConfigError("attention: W_K and W_V must take the same source width");
    if (!all_finite(w_q) || !all_finite(w_k) || !all_finite(w_v)) throw ConfigError("attention: non-finite weights");
  }
};

// Row-wise softmax with the row max subtracted first.
inline Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double m = scores.row(r).maxCoeff();
    out.row(r) = (scores.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

namespace detail {

inline void check_attention_inputs(const Matrix& target, const Matrix& source, const AttentionParams& p) {
  p.validate();
  if (target.rows() < 1 || source.rows() < 1) throw ConfigError("attention: empty target or source sequence");
  if (!all_finite(target) || !all_finite(source)) throw ConfigError("attention: non-finite input sequence");
  if (target.cols() != p.w_q.rows()) {
    throw ConfigError(fmt::format("attention: target width {} but W_Q expects {}", target.cols(), p.w_q.rows()));
  }
  if (source.cols() != p.w_k.rows()) {
    throw ConfigError(fmt::format("attention: source width {} but W_K expects {}", source.cols(), p.w_k.rows()));
  }
}

inline void check_heads(const AttentionParams& p, int heads) {
  if (heads < 1) throw ConfigError("attention: head count must be >= 1");
  if (p.d_k() % heads != 0 || p.d_v() % heads != 0) {
    throw ConfigError(fmt::format("attention: d_k={} and d_v={} must both divide evenly across {} heads", p.d_k(),
                                  p.d_v(), heads));
  }
}

}  // namespace detail

// softmax(Q K^T / sqrt(d_k)) for a single head, Q from target, K from source.
inline Matrix attention_weights(const Matrix& target, const Matrix& source, const AttentionParams& p) {
  detail::check_attention_inputs(target, source, p);
  const Matrix q = target * p.w_q;
  const Matrix k = source * p.w_k;
  return softmax_rows((q * k.transpose()) / std::sqrt(static_cast<double>(p.d_k())));
}

// Scaled dot-product attention from source to target, [T_target x d_v]. With
// heads > 1 the d_k and d_v columns are split evenly, each head scales by its
// own key width, and head outputs are concatenated in order.
inline Matrix crossmodal_attention(const Matrix& target, const Matrix& source, const AttentionParams& p,
                                   int heads = 1) {
  detail::check_attention_inputs(target, source, p);
  detail::check_heads(p, heads);
  const Matrix q = target * p.w_q;
  const Matrix k = source * p.w_k;
  const Matrix v = source * p.w_v;
  const int dk = p.d_k() / heads;
  const int dv = p.d_v() / heads;
  Matrix out(target.rows(), p.d_v());
  for (int h = 0; h < heads; ++h) {
    const Matrix scores = (q.middleCols(h * dk, dk) * k.middleCols(h * dk, dk).transpose()) /
                          std::sqrt(static_cast<double>(dk));
    out.middleCols(h * dv, dv) = softmax_rows(scores) * v.middleCols(h * dv, dv);
  }
  return out;
}

inline Matrix self_attention(const Matrix& seq, const AttentionParams& p, int heads = 1) {
  return crossmodal_attention(seq, seq, p, heads);
}

// Per-row normalisation with learned scale and shift.
struct LayerNorm {
  Vector scale;
  Vector shift;
  double epsilon{1e-5};

  Matrix apply(const Matrix& x) const {
    if (scale.size() != x.cols() || shift.size() != x.cols()) {
      throw ConfigError(fmt::format("layer_norm: parameters sized {} for width {}", scale.size(), x.cols()));
    }
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double mean = x.row(r).mean();
      const double var = (x.row(r).array() - mean).square().mean();
      out.row(r) = ((x.row(r).array() - mean) / std::sqrt(var + epsilon)).matrix();
      out.row(r) = (out.row(r).array() * scale.transpose().array() + shift.transpose().array()).matrix();
    }
    return out;
  }
};

// Position-wise relu(x W1 + b1) W2 + b2.
struct FeedForward {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  Matrix apply(const Matrix& x) const {
    if (w1.rows() != x.cols() || b1.size() != w1.cols() || w2.rows() != w1.cols() || b2.size() != w2.cols()) {
      throw ConfigError("feed_forward: parameter shapes are inconsistent with the input");
    }
    Matrix hidden = x * w1;
    hidden.rowwise() += b1.transpose();
    hidden = hidden.cwiseMax(0.0);
    Matrix out = hidden * w2;
    out.rowwise() += b2.transpose();
    return out;
  }
};

// Attention plus its optional input normalisation and output feed-forward.
struct AttentionBlock {
  AttentionParams attention;
  std::optional<LayerNorm> norm;
  std::optional<FeedForward> feed_forward;

  Matrix apply(const Matrix& target, const Matrix& source, int heads) const {
    Matrix out = norm ? crossmodal_attention(norm->apply(target), norm->apply(source), attention, heads)
                      : crossmodal_attention(target, source, attention, heads);
    return feed_forward ? feed_forward->apply(out) : out;
  }

  int output_dim() const { return feed_forward ? static_cast<int>(feed_forward->w2.cols()) : attention.d_v(); }
};

struct FusionCoreParams {
  Modality host{Modality::HM};
  std::array<AttentionBlock, 3> cross;  // one per non-host modality
  AttentionBlock self;
  int num_heads{1};
  Matrix w_concatenate;  // [(sum of block output dims) x d_f]

  void validate() const {
    if (num_heads < 1) throw ConfigError("fusion_core: num_heads must be >= 1");
    std::array<bool, 4> seen{};
    for (const auto& block : cross) {
      if (block.attention.source == host) {
        throw ConfigError(fmt::format("fusion_core: crossmodal block for host {} has the host as source",
                                      to_string(host)));
      }
      if (block.attention.target != host) throw ConfigError("fusion_core: crossmodal block does not target the host");
      auto& s = seen[static_cast<std::size_t>(block.attention.source)];
      if (s) throw ConfigError("fusion_core: duplicate crossmodal source modality");
      s = true;
    }
    if (self.attention.source != host || self.attention.target != host) {
      throw ConfigError("fusion_core: self-attention block must map host to host");
    }
    int width = self.output_dim();
    for (const auto& block : cross) width += block.output_dim();
    if (w_concatenate.rows() != width) {
      throw ConfigError(fmt::format("fusion_core: W_concatenate has {} rows, concatenation is {} wide",
                                    w_concatenate.rows(), width));
    }
  }
};

// F_host = [Psi_{a->host} | Psi_{b->host} | Psi_{c->host} | Omega_host] * W_concatenate,
// crossmodal blocks in the order of params.cross.
inline Matrix fusion_core(const EncodedSequence& host, std::span<const EncodedSequence> others,
                          const FusionCoreParams& params) {
  params.validate();
  if (host.modality != params.host) {
    throw ConfigError(fmt::format("fusion_core: host sequence is {}, params are for {}", to_string(host.modality),
                                  to_string(params.host)));
  }
  if (others.size() != 3) throw ConfigError("fusion_core: exactly three non-host sequences are required");

  std::vector<Matrix> parts;
  parts.reserve(4);
  for (const auto& block : params.cross) {
    const EncodedSequence* src = nullptr;
    for (const auto& o : others) {
      if (o.modality == block.attention.source) src = &o;
    }
    if (src == nullptr || src->modality == host.modality) {
      throw ConfigError(fmt::format("fusion_core: no sequence supplied for source modality {}",
                                    to_string(block.attention.source)));
    }
    parts.push_back(block.apply(host.data, src->data, params.num_heads));
  }
  parts.push_back(params.self.apply(host.data, host.data, params.num_heads));

  Eigen::Index width = 0;
  for (const auto& p : parts) width += p.cols();
  Matrix concat(host.data.rows(), width);
  Eigen::Index col = 0;
  for (const auto& p : parts) {
    concat.middleCols(col, p.cols()) = p;
    col += p.cols();
  }
  return concat * params.w_concatenate;
}

struct PredictionTarget {
  double horizon{1.0};  // seconds
  Matrix values;        // [T_pred x d_out]
};

// Affine head over the feature-wise concatenation of the four fused outputs.
inline PredictionTarget predict(std::span<const Matrix> fused, const Matrix& fc_weights, const Vector& fc_bias,
                                double horizon = 1.0) {
  if (fused.empty()) throw ConfigError("predict: no fused inputs");
  if (!(horizon > 0.0)) throw ConfigError("predict: horizon must be positive");
  const auto T = fused.front().rows();
  Eigen::Index width = 0;
  for (const auto& f : fused) {
    if (f.rows() != T) throw ConfigError("predict: fused inputs have different lengths");
    width += f.cols();
  }
  if (fc_weights.rows() != width) {
    throw ConfigError(fmt::format("predict: fc expects {} inputs, fused width is {}", fc_weights.rows(), width));
  }
  if (fc_bias.size() != fc_weights.cols()) throw ConfigError("predict: bias length does not match fc output width");

  Matrix concat(T, width);
  Eigen::Index col = 0;
  for (const auto& f : fused) {
    concat.middleCols(col, f.cols()) = f;
    col += f.cols();
  }
  Matrix out = concat * fc_weights;
  out.rowwise() += fc_bias.transpose();
  return {horizon, std::move(out)};
}

namespace detail {
inline void check_metric_inputs(const Matrix& pred, const Matrix& truth, std::string_view who) {
  if (pred.size() == 0 || truth.size() == 0) throw ConfigError(fmt::format("{}: empty input", who));
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw ConfigError(fmt::format("{}: shapes {}x{} and {}x{} differ", who, pred.rows(), pred.cols(), truth.rows(),
                                  truth.cols()));
  }
}
}  // namespace detail

inline double mae(const Matrix& pred, const Matrix& truth) {
  detail::check_metric_inputs(pred, truth, "mae");
  return (pred - truth).cwiseAbs().mean();
}

inline double rmse(const Matrix& pred, const Matrix& truth) {
  detail::check_metric_inputs(pred, truth, "rmse");
  return std::sqrt((pred - truth).array().square().mean());
}

// Full predictor parameter set.
struct PredictorParams {
  int model_dim{8};
  double timestamp_period{kDefaultTimestampPeriod};
  std::array<ConvKernel, 4> align;          // indexed by Modality
  std::array<FusionCoreParams, 4> cores;    // indexed by Modality
  Matrix fc_weights;
  Vector fc_bias;
  double horizon{1.0};
};

struct PredictorShape {
  std::array<int, 4> input_dims{3, 1, 2, 2};  // HM, EB, VO, GD feature widths
  int model_dim{8};
  int kernel_width{3};
  int d_k{8};
  int d_v{8};
  int num_heads{2};
  int fused_dim{8};
  int output_dim{6};
  std::optional<int> ff_hidden{16};  // nullopt disables feed-forward sublayers
  bool layer_norm{true};
  double horizon{1.0};
};

// Weights drawn from uniform(-0.1, 0.1) with a seeded generator.
inline PredictorParams random_predictor(const PredictorShape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  auto rand = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
  };
  auto rand_vec = [&](Eigen::Index n) -> Vector { return rand(n, 1).col(0); };

  const int d = shape.model_dim;
  auto block = [&](Modality source, Modality target) {
    AttentionBlock b;
    b.attention = {source, target, rand(d, shape.d_k), rand(d, shape.d_k), rand(d, shape.d_v)};
    if (shape.layer_norm) b.norm = LayerNorm{Vector::Ones(d), Vector::Zero(d)};
    if (shape.ff_hidden) {
      b.feed_forward = FeedForward{rand(shape.d_v, *shape.ff_hidden), rand_vec(*shape.ff_hidden),
                                   rand(*shape.ff_hidden, shape.d_v), rand_vec(shape.d_v)};
    }
    return b;
  };

  PredictorParams p;
  p.model_dim = d;
  p.horizon = shape.horizon;
  for (auto m : kModalities) {
    const auto mi = static_cast<std::size_t>(m);
    auto& k = p.align[mi];
    for (int j = 0; j < shape.kernel_width; ++j) k.taps.push_back(rand(shape.input_dims[mi], d));
    k.bias = rand_vec(d);

    auto& core = p.cores[mi];
    core.host = m;
    core.num_heads = shape.num_heads;
    std::size_t c = 0;
    for (auto other : kModalities) {
      if (other != m) core.cross[c++] = block(other, m);
    }
    core.self = block(m, m);
    core.w_concatenate = rand(4 * shape.d_v, shape.fused_dim);
  }
  p.fc_weights = rand(4 * shape.fused_dim, shape.output_dim);
  p.fc_bias = rand_vec(shape.output_dim);
  return p;
}

// End-to-end forward pass. `inputs` must hold one sequence per modality,
// all with the same number of time steps.
inline PredictionTarget run_predictor(std::span<const ModalSequence> inputs, const PredictorParams& params) {
  if (inputs.size() != 4) throw ConfigError("run_predictor: expected four modality sequences");
  std::array<const ModalSequence*, 4> by_modality{};
  for (const auto& s : inputs) {
    s.validate();
    auto& slot = by_modality[static_cast<std::size_t>(s.modality)];
    if (slot != nullptr) throw ConfigError(fmt::format("run_predictor: duplicate {} sequence", to_string(s.modality)));
    slot = &s;
  }

  std::array<EncodedSequence, 4> encoded;
  for (auto m : kModalities) {
    const auto mi = static_cast<std::size_t>(m);
    const auto& seq = *by_modality[mi];
    const Matrix aligned = align_dimensions(seq, params.align[mi], params.model_dim);
    encoded[mi] = encode_modality(m, aligned, positional_encoding(static_cast<int>(seq.data.rows()), params.model_dim),
                                  timestamp_encoding(seq.timestamps, params.model_dim, params.timestamp_period));
  }

  std::array<Matrix, 4> fused;
  for (auto m : kModalities) {
    const auto mi = static_cast<std::size_t>(m);
    std::array<EncodedSequence, 3> others;
    std::size_t c = 0;
    for (auto o : kModalities) {
      if (o != m) others[c++] = encoded[static_cast<std::size_t>(o)];
    }
    fused[mi] = fusion_core(encoded[mi], others, params.cores[mi]);
  }
  return predict(fused, params.fc_weights, params.fc_bias, params.horizon);
}

}  // namespace gvc
