#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "infext/autodiff.hpp"
#include "infext/signal.hpp"

namespace infext {

enum class Arch { kTcn, kDprnn };
enum class Fusion { kTI, kTV };

std::string to_string(Arch a);
std::string to_string(Fusion f);
Arch parse_arch(const std::string& s);
Fusion parse_fusion(const std::string& s);

struct EncoderConfig {
  Index window = 32;
  Index stride = 16;
  Index channels = 256;
};

struct TcnConfig {
  Index bottleneck = 64;  // B
  Index hidden = 96;      // H
  Index kernel = 3;       // P
  Index blocks = 6;       // X, dilations 1, 2, ..., 2^(X-1)
  Index repeats = 2;      // R
};

struct DprnnConfig {
  Index bottleneck = 64;
  Index chunk = 30;  // hop is chunk / 2
  Index hidden = 128;
  Index blocks = 2;
};

struct ModelConfig {
  Arch arch = Arch::kDprnn;
  Fusion fusion = Fusion::kTV;
  bool causal = false;
  EncoderConfig encoder;
  TcnConfig tcn;
  DprnnConfig dprnn;
  int sample_rate = 16000;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  static ModelConfig full(Arch arch, bool causal = false);
  // fs 8 kHz, N=64, one DPRNN block per stack with a narrow bottleneck.
  static ModelConfig desk();
};

// Frames seen by one output frame through the dilated convolutions:
// 1 + R (P - 1) (2^X - 1).
Index tcn_receptive_field(const TcnConfig& c);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ParamSpec {
  std::string name;
  Shape shape;
};

// Every parameter tensor of the model, in a stable order.
std::vector<ParamSpec> param_registry(const ModelConfig& cfg);
Index param_count(const ModelConfig& cfg);

// Named parameter tensors in registry order.
template <typename S>
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const std::vector<ParamSpec>& registry);

  // Random initialization: uniform(+-1/sqrt(fan_in)) for weights, zero biases,
  // unit norm gains, 0.25 PReLU slopes.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<S>& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor<S>& tensor(std::size_t i) const { return tensors_[i]; }
  const Tensor<S>& at(const std::string& name) const;
  Tensor<S>& at(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t index_of(const std::string& name) const;
  Index total() const;

  template <typename To>
  ModelParams<To> cast() const {
    ModelParams<To> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<To>());
    return out;
  }
  void add(std::string name, Tensor<S> value);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<S>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Parameters placed on a tape as leaf variables.
template <typename S>
class BoundParams {
 public:
  BoundParams(Tape<S>& tape, const ModelParams<S>& params, bool requires_grad = true);

  Var<S> operator[](const std::string& name) const;
  const std::vector<Var<S>>& vars() const { return vars_; }
  Tape<S>& tape() const { return *tape_; }

 private:
  Tape<S>* tape_;
  const ModelParams<S>* params_;
  std::vector<Var<S>> vars_;
};

enum class Branch { kAux, kExt };

// Frame matrix (L x T) as a tape constant in the requested precision.
template <typename S>
Var<S> frames_var(Tape<S>& tape, const FrameMatrix& frames);

// Linear map per frame column followed by ReLU: (L x T) -> (N x T).
template <typename S>
Var<S> encoder_forward(Var<S> frames, const BoundParams<S>& p, Branch which);

// Transposed convolution back to a (1 x length) waveform row.
template <typename S>
Var<S> decoder_forward(Var<S> latent, const BoundParams<S>& p, const ModelConfig& cfg,
                       Index length);

// Pre-affine statistics over all entries (glnorm) or over frames <= k (clnorm).
template <typename S>
Var<S> glnorm(Var<S> x, Var<S> gain, Var<S> bias);
template <typename S>
Var<S> clnorm(Var<S> x, Var<S> gain, Var<S> bias);

// (N x T) -> (N x T) stack named by prefix ("aux", "ext1", "ext2").
template <typename S>
Var<S> tcn_stack_forward(Var<S> x, const BoundParams<S>& p, const ModelConfig& cfg,
                         const std::string& prefix);
template <typename S>
Var<S> dprnn_stack_forward(Var<S> x, const BoundParams<S>& p, const ModelConfig& cfg,
                           const std::string& prefix);
template <typename S>
Var<S> stack_forward(Var<S> x, const BoundParams<S>& p, const ModelConfig& cfg,
                     const std::string& prefix);

// Reference latent -> embedding matrix E (N x T).
template <typename S>
Var<S> aux_forward(Var<S> ref_latent, const BoundParams<S>& p, const ModelConfig& cfg);

// Temporal mean of E as an (N x 1) column.
template <typename S>
Var<S> average_embeddings(Var<S> emb);

// TI: emb is (C x 1) or (C); TV: emb is (C x T).
template <typename S>
Var<S> fuse(Var<S> h, Var<S> emb, Fusion mode);

template <typename S>
struct ExtractOutput {
  Var<S> mask;
  Var<S> latent;
};

template <typename S>
ExtractOutput<S> extract_forward(Var<S> mix_latent, Var<S> emb, Fusion mode,
                                 const BoundParams<S>& p, const ModelConfig& cfg);

template <typename S>
struct ModelOutput {
  Var<S> estimate;    // (1 x mixture length), the echo estimate
  Var<S> embeddings;  // (N x T)
  Var<S> mask;        // (N x T)
};

// Full pipeline: mixture and reference waveforms to the target estimate.
template <typename S>
ModelOutput<S> model_forward(const BoundParams<S>& p, const ModelConfig& cfg,
                             const Waveform& mixture, const Waveform& reference);

// Convenience: run the model without gradients and return the estimate.
template <typename S>
Waveform infer(const ModelParams<S>& params, const ModelConfig& cfg, const Waveform& mixture,
               const Waveform& reference);

}  // namespace infext
