#include "infext/networks.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>

namespace infext {

namespace {

constexpr double kNormEps = 1e-8;

void require_positive(Index v, const char* field) {
  if (v <= 0) throw std::invalid_argument(std::string("model config: ") + field + " must be positive");
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::string to_string(Arch a) { return a == Arch::kTcn ? "tcn" : "dprnn"; }
std::string to_string(Fusion f) { return f == Fusion::kTI ? "TI" : "TV"; }

Arch parse_arch(const std::string& s) {
  if (s == "tcn") return Arch::kTcn;
  if (s == "dprnn") return Arch::kDprnn;
  throw std::invalid_argument("unknown arch '" + s + "' (expected tcn or dprnn)");
}

Fusion parse_fusion(const std::string& s) {
  if (s == "TI") return Fusion::kTI;
  if (s == "TV") return Fusion::kTV;
  throw std::invalid_argument("unknown fusion '" + s + "' (expected TI or TV)");
}

void ModelConfig::validate() const {
  require_positive(encoder.window, "encoder.window");
  require_positive(encoder.stride, "encoder.stride");
  require_positive(encoder.channels, "encoder.channels");
  if (encoder.stride > encoder.window) {
    throw std::invalid_argument("model config: encoder.stride must not exceed encoder.window");
  }
  if (sample_rate <= 0) throw std::invalid_argument("model config: sample_rate must be positive");
  if (arch == Arch::kTcn) {
    require_positive(tcn.bottleneck, "tcn.bottleneck");
    require_positive(tcn.hidden, "tcn.hidden");
    require_positive(tcn.kernel, "tcn.kernel");
    require_positive(tcn.blocks, "tcn.blocks");
    require_positive(tcn.repeats, "tcn.repeats");
  } else {
    require_positive(dprnn.bottleneck, "dprnn.bottleneck");
    require_positive(dprnn.hidden, "dprnn.hidden");
    require_positive(dprnn.blocks, "dprnn.blocks");
    if (dprnn.chunk < 2) throw std::invalid_argument("model config: dprnn.chunk must be >= 2");
  }
}

Index tcn_receptive_field(const TcnConfig& c) {
  return 1 + c.repeats * (c.kernel - 1) * ((Index(1) << c.blocks) - 1);
}

ModelConfig ModelConfig::full(Arch arch, bool causal) {
  ModelConfig c;
  c.arch = arch;
  c.causal = causal;
  return c;
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.arch = Arch::kDprnn;
  c.sample_rate = 8000;
  c.encoder.channels = 64;
  c.dprnn.bottleneck = 32;
  c.dprnn.hidden = 32;
  c.dprnn.blocks = 1;
  c.tcn.bottleneck = 32;
  c.tcn.hidden = 48;
  c.tcn.repeats = 1;
  return c;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"arch", to_string(c.arch)},
      {"fusion", to_string(c.fusion)},
      {"causal", c.causal},
      {"sample_rate", c.sample_rate},
      {"encoder", {{"window", c.encoder.window}, {"stride", c.encoder.stride},
                   {"channels", c.encoder.channels}}},
      {"tcn", {{"bottleneck", c.tcn.bottleneck}, {"hidden", c.tcn.hidden},
               {"kernel", c.tcn.kernel}, {"blocks", c.tcn.blocks}, {"repeats", c.tcn.repeats}}},
      {"dprnn", {{"bottleneck", c.dprnn.bottleneck}, {"chunk", c.dprnn.chunk},
                 {"hidden", c.dprnn.hidden}, {"blocks", c.dprnn.blocks}}},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  c.causal = j.at("causal").get<bool>();
  c.sample_rate = j.at("sample_rate").get<int>();
  const auto& e = j.at("encoder");
  c.encoder = {e.at("window").get<Index>(), e.at("stride").get<Index>(),
               e.at("channels").get<Index>()};
  const auto& t = j.at("tcn");
  c.tcn = {t.at("bottleneck").get<Index>(), t.at("hidden").get<Index>(),
           t.at("kernel").get<Index>(), t.at("blocks").get<Index>(),
           t.at("repeats").get<Index>()};
  const auto& d = j.at("dprnn");
  c.dprnn = {d.at("bottleneck").get<Index>(), d.at("chunk").get<Index>(),
             d.at("hidden").get<Index>(), d.at("blocks").get<Index>()};
  c.validate();
  return c;
}

namespace {

struct RegistryBuilder {
  std::vector<ParamSpec> specs;

  void add(std::string name, Shape shape) { specs.push_back({std::move(name), std::move(shape)}); }
  void norm(const std::string& p, Index c) {
    add(p + ".gain", {c});
    add(p + ".bias", {c});
  }
  void linear(const std::string& p, Index out, Index in) {
    add(p + ".weight", {out, in});
    add(p + ".bias", {out});
  }
  void lstm(const std::string& p, Index in, Index hidden) {
    add(p + ".w_ih", {4 * hidden, in});
    add(p + ".w_hh", {4 * hidden, hidden});
    add(p + ".bias", {4 * hidden});
  }

  void stack(const ModelConfig& cfg, const std::string& p) {
    const Index n = cfg.encoder.channels;
    const Index b = cfg.arch == Arch::kTcn ? cfg.tcn.bottleneck : cfg.dprnn.bottleneck;
    norm(p + ".norm", n);
    linear(p + ".bottleneck", b, n);
    if (cfg.arch == Arch::kTcn) {
      const auto& t = cfg.tcn;
      for (Index r = 0; r < t.repeats; ++r) {
        for (Index x = 0; x < t.blocks; ++x) {
          const std::string q = p + ".r" + std::to_string(r) + ".x" + std::to_string(x);
          linear(q + ".in", t.hidden, b);
          add(q + ".prelu1", {1});
          norm(q + ".norm1", t.hidden);
          add(q + ".depthwise.weight", {t.hidden, 1, t.kernel});
          add(q + ".depthwise.bias", {t.hidden});
          add(q + ".prelu2", {1});
          norm(q + ".norm2", t.hidden);
          linear(q + ".out", b, t.hidden);
        }
      }
    } else {
      const auto& d = cfg.dprnn;
      const Index inter_dirs = cfg.causal ? 1 : 2;
      for (Index i = 0; i < d.blocks; ++i) {
        const std::string q = p + ".b" + std::to_string(i);
        lstm(q + ".intra.dir0", b, d.hidden);
        lstm(q + ".intra.dir1", b, d.hidden);
        linear(q + ".intra.linear", b, 2 * d.hidden);
        norm(q + ".intra.norm", b);
        for (Index k = 0; k < inter_dirs; ++k) {
          lstm(q + ".inter.dir" + std::to_string(k), b, d.hidden);
        }
        linear(q + ".inter.linear", b, inter_dirs * d.hidden);
        norm(q + ".inter.norm", b);
      }
    }
    add(p + ".out.prelu", {1});
    linear(p + ".out", n, b);
  }
};

}  // namespace

std::vector<ParamSpec> param_registry(const ModelConfig& cfg) {
  cfg.validate();
  RegistryBuilder r;
  const Index n = cfg.encoder.channels;
  const Index l = cfg.encoder.window;
  r.linear("encoder.aux", n, l);
  r.linear("encoder.ext", n, l);
  r.stack(cfg, "aux");
  r.stack(cfg, "ext1");
  r.stack(cfg, "ext2");
  r.linear("mask", n, n);
  r.add("decoder.weight", {n, 1, l});
  return r.specs;
}

Index param_count(const ModelConfig& cfg) {
  Index total = 0;
  for (const auto& s : param_registry(cfg)) total += numel(s.shape);
  return total;
}

template <typename S>
ModelParams<S>::ModelParams(const std::vector<ParamSpec>& registry) {
  for (const auto& s : registry) add(s.name, Tensor<S>(s.shape));
}

template <typename S>
void ModelParams<S>::add(std::string name, Tensor<S> value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

template <typename S>
std::size_t ModelParams<S>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

template <typename S>
const Tensor<S>& ModelParams<S>::at(const std::string& name) const {
  return tensors_[index_of(name)];
}

template <typename S>
Tensor<S>& ModelParams<S>::at(const std::string& name) {
  return tensors_[index_of(name)];
}

template <typename S>
Index ModelParams<S>::total() const {
  Index n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <typename S>
ModelParams<S> ModelParams<S>::init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<S> out(param_registry(cfg));
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::string& name = out.names_[i];
    Tensor<S>& t = out.tensors_[i];
    double bound = 0.0;
    if (ends_with(name, ".gain")) {
      t.vec().setOnes();
      continue;
    }
    if (name.find("prelu") != std::string::npos) {
      t.vec().setConstant(S(0.25));
      continue;
    }
    const bool lstm = ends_with(name, ".w_ih") || ends_with(name, ".w_hh") ||
                      (name.find(".dir") != std::string::npos && ends_with(name, ".bias"));
    if (lstm) {
      const Index hidden = t.dim(0) / 4;
      bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    } else if (ends_with(name, ".bias")) {
      continue;  // zero
    } else {
      const Index fan_in = t.rank() == 3 ? t.dim(1) * t.dim(2) : t.dim(1);
      bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    }
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index k = 0; k < t.size(); ++k) t[k] = static_cast<S>(u(rng));
  }
  return out;
}

template <typename S>
BoundParams<S>::BoundParams(Tape<S>& tape, const ModelParams<S>& params, bool requires_grad)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars_.push_back(tape.variable(params.tensor(i), requires_grad));
  }
}

template <typename S>
Var<S> BoundParams<S>::operator[](const std::string& name) const {
  return vars_[params_->index_of(name)];
}

template <typename S>
Var<S> frames_var(Tape<S>& tape, const FrameMatrix& frames) {
  Tensor<S> t({frames.frame_len(), frames.num_frames()});
  t.matrix() = frames.data.cast<S>();
  return tape.constant(std::move(t));
}

namespace {

template <typename S>
Var<S> column(Var<S> v) {
  return ad::reshape(v, Shape{v.size(), 1});
}

template <typename S>
Var<S> linear(Var<S> x, const BoundParams<S>& p, const std::string& name) {
  Var<S> w = p[name + ".weight"];
  if (x.value().rank() == 2) return ad::add(ad::matmul(w, x), column(p[name + ".bias"]));
  const Shape& s = x.shape();
  Index cols = 1;
  for (std::size_t i = 1; i < s.size(); ++i) cols *= s[i];
  Var<S> flat = ad::reshape(x, Shape{s[0], cols});
  Var<S> y = ad::add(ad::matmul(w, flat), column(p[name + ".bias"]));
  Shape out = s;
  out[0] = w.dim(0);
  return ad::reshape(y, out);
}

template <typename S>
Var<S> affine(Var<S> normalized, Var<S> gain, Var<S> bias) {
  return ad::add(ad::mul(normalized, column(gain)), column(bias));
}

// x: (C x P), keys as for cumulative_normalize; empty keys means global.
template <typename S>
Var<S> norm_keyed(Var<S> x, const BoundParams<S>& p, const std::string& name,
                  const std::vector<Index>* keys) {
  if (keys == nullptr) return glnorm(x, p[name + ".gain"], p[name + ".bias"]);
  return affine(ad::cumulative_normalize(x, std::span<const Index>(*keys), S(kNormEps)),
                p[name + ".gain"], p[name + ".bias"]);
}

std::vector<Index> iota_keys(Index n) {
  std::vector<Index> k(n);
  for (Index i = 0; i < n; ++i) k[i] = i;
  return k;
}

template <typename S>
Var<S> stack_norm(Var<S> x, const BoundParams<S>& p, const std::string& name, bool causal) {
  if (!causal) return glnorm(x, p[name + ".gain"], p[name + ".bias"]);
  return clnorm(x, p[name + ".gain"], p[name + ".bias"]);
}

}  // namespace

template <typename S>
Var<S> glnorm(Var<S> x, Var<S> gain, Var<S> bias) {
  Var<S> centered = ad::sub(x, ad::mean(x));
  Var<S> var = ad::mean(ad::square(centered));
  Var<S> inv = ad::reciprocal(ad::sqrt(ad::add_scalar(var, S(kNormEps))));
  return affine(ad::mul(centered, inv), gain, bias);
}

template <typename S>
Var<S> clnorm(Var<S> x, Var<S> gain, Var<S> bias) {
  const auto keys = iota_keys(x.dim(1));
  return affine(ad::cumulative_normalize(x, std::span<const Index>(keys), S(kNormEps)), gain,
                bias);
}

template <typename S>
Var<S> encoder_forward(Var<S> frames, const BoundParams<S>& p, Branch which) {
  const std::string name = which == Branch::kAux ? "encoder.aux" : "encoder.ext";
  Var<S> w = p[name + ".weight"];
  if (frames.value().rank() != 2 || frames.dim(0) != w.dim(1)) {
    throw std::invalid_argument("encoder_forward: frames " + to_string(frames.shape()) +
                                " do not match window " + std::to_string(w.dim(1)));
  }
  return ad::relu(linear(frames, p, name));
}

template <typename S>
Var<S> decoder_forward(Var<S> latent, const BoundParams<S>& p, const ModelConfig& cfg,
                       Index length) {
  Var<S> full = ad::conv_transpose1d(latent, p["decoder.weight"], cfg.encoder.stride);
  if (full.dim(1) < length) {
    throw std::invalid_argument("decoder_forward: latent too short for requested length");
  }
  return ad::slice(full, 1, 0, length);
}

template <typename S>
Var<S> tcn_stack_forward(Var<S> x, const BoundParams<S>& p, const ModelConfig& cfg,
                         const std::string& prefix) {
  const auto& t = cfg.tcn;
  Var<S> y = stack_norm(x, p, prefix + ".norm", cfg.causal);
  y = linear(y, p, prefix + ".bottleneck");
  for (Index r = 0; r < t.repeats; ++r) {
    for (Index b = 0; b < t.blocks; ++b) {
      const std::string q = prefix + ".r" + std::to_string(r) + ".x" + std::to_string(b);
      const Index dilation = Index(1) << b;
      const Index total_pad = (t.kernel - 1) * dilation;
      Conv1dOptions opt;
      opt.dilation = dilation;
      opt.groups = t.hidden;
      opt.pad_left = cfg.causal ? total_pad : total_pad / 2;
      opt.pad_right = total_pad - opt.pad_left;
      Var<S> h = linear(y, p, q + ".in");
      h = stack_norm(ad::prelu(h, p[q + ".prelu1"]), p, q + ".norm1", cfg.causal);
      h = ad::conv1d(h, p[q + ".depthwise.weight"], p[q + ".depthwise.bias"], opt);
      h = stack_norm(ad::prelu(h, p[q + ".prelu2"]), p, q + ".norm2", cfg.causal);
      y = ad::add(y, linear(h, p, q + ".out"));
    }
  }
  y = ad::prelu(y, p[prefix + ".out.prelu"]);
  return linear(y, p, prefix + ".out");
}

template <typename S>
Var<S> dprnn_stack_forward(Var<S> x, const BoundParams<S>& p, const ModelConfig& cfg,
                           const std::string& prefix) {
  const auto& d = cfg.dprnn;
  const Index frames = x.dim(1);
  const Index size = d.chunk;
  const Index hop = d.chunk / 2;
  Var<S> y = stack_norm(x, p, prefix + ".norm", cfg.causal);
  y = linear(y, p, prefix + ".bottleneck");
  Var<S> c = ad::chunk(y, size, hop);  // (B x K x S)
  const Index bn = c.dim(0);
  const Index chunks = c.dim(2);

  // Absolute frame index of each position, for cumulative statistics.
  std::vector<Index> intra_keys(size * chunks), inter_keys(size * chunks);
  for (Index k = 0; k < size; ++k) {
    for (Index s = 0; s < chunks; ++s) {
      intra_keys[k * chunks + s] = s * hop + k;
      inter_keys[s * size + k] = s * hop + k;
    }
  }
  const std::vector<Index>* intra_norm_keys = cfg.causal ? &intra_keys : nullptr;
  const std::vector<Index>* inter_norm_keys = cfg.causal ? &inter_keys : nullptr;

  auto lstm = [&](Var<S> in, const std::string& name, bool reverse) {
    return ad::lstm_seq(in, p[name + ".w_ih"], p[name + ".w_hh"], p[name + ".bias"], reverse);
  };

  for (Index i = 0; i < d.blocks; ++i) {
    const std::string q = prefix + ".b" + std::to_string(i);
    // Intra-chunk: sequence over K, chunks as batch. The causal variant runs
    // both direction slots forward so no frame sees its future.
    {
      const Var<S> dirs[] = {lstm(c, q + ".intra.dir0", false),
                             lstm(c, q + ".intra.dir1", !cfg.causal)};
      Var<S> h = ad::concat(std::span<const Var<S>>(dirs), 0);
      h = linear(ad::reshape(h, Shape{h.dim(0), size * chunks}), p, q + ".intra.linear");
      h = norm_keyed(h, p, q + ".intra.norm", intra_norm_keys);
      c = ad::add(c, ad::reshape(h, Shape{bn, size, chunks}));
    }
    // Inter-chunk: sequence over chunks, positions within a chunk as batch.
    {
      Var<S> ct = ad::permute(c, {0, 2, 1});  // (B x S x K)
      Var<S> h;
      if (cfg.causal) {
        h = lstm(ct, q + ".inter.dir0", false);
      } else {
        const Var<S> dirs[] = {lstm(ct, q + ".inter.dir0", false),
                               lstm(ct, q + ".inter.dir1", true)};
        h = ad::concat(std::span<const Var<S>>(dirs), 0);
      }
      h = linear(ad::reshape(h, Shape{h.dim(0), chunks * size}), p, q + ".inter.linear");
      h = norm_keyed(h, p, q + ".inter.norm", inter_norm_keys);
      c = ad::add(c, ad::permute(ad::reshape(h, Shape{bn, chunks, size}), {0, 2, 1}));
    }
  }
  y = ad::unchunk(c, hop, frames);
  y = ad::prelu(y, p[prefix + ".out.prelu"]);
  return linear(y, p, prefix + ".out");
}

template <typename S>
Var<S> stack_forward(Var<S> x, const BoundParams<S>& p, const ModelConfig& cfg,
                     const std::string& prefix) {
  if (x.value().rank() != 2 || x.dim(0) != cfg.encoder.channels) {
    throw std::invalid_argument("stack '" + prefix + "': expected (" +
                                std::to_string(cfg.encoder.channels) + " x T) input, got " +
                                to_string(x.shape()));
  }
  return cfg.arch == Arch::kTcn ? tcn_stack_forward(x, p, cfg, prefix)
                                : dprnn_stack_forward(x, p, cfg, prefix);
}

template <typename S>
Var<S> aux_forward(Var<S> ref_latent, const BoundParams<S>& p, const ModelConfig& cfg) {
  return stack_forward(ref_latent, p, cfg, "aux");
}

template <typename S>
Var<S> average_embeddings(Var<S> emb) {
  if (emb.value().rank() != 2 || emb.dim(1) < 1) {
    throw std::invalid_argument("average_embeddings: expected (N x T), got " +
                                to_string(emb.shape()));
  }
  return ad::shifted_mean_last(emb);
}

template <typename S>
Var<S> fuse(Var<S> h, Var<S> emb, Fusion mode) {
  if (h.value().rank() != 2) throw std::invalid_argument("fuse: latent must be (C x T)");
  const Index channels = h.dim(0);
  const Index frames = h.dim(1);
  if (mode == Fusion::kTI) {
    const bool vector = emb.value().rank() == 1 ||
                        (emb.value().rank() == 2 && emb.dim(1) == 1);
    if (!vector || emb.size() != channels) {
      throw std::invalid_argument("fuse(TI): embedding " + to_string(emb.shape()) +
                                  " is not a vector of " + std::to_string(channels));
    }
    return ad::mul(h, emb.value().rank() == 1 ? column(emb) : emb);
  }
  if (emb.value().rank() != 2 || emb.dim(0) != channels || emb.dim(1) != frames) {
    throw std::invalid_argument("fuse(TV): embedding " + to_string(emb.shape()) +
                                " does not match latent " + to_string(h.shape()));
  }
  return ad::mul(h, emb);
}

template <typename S>
ExtractOutput<S> extract_forward(Var<S> mix_latent, Var<S> emb, Fusion mode,
                                 const BoundParams<S>& p, const ModelConfig& cfg) {
  const Index frames = mix_latent.dim(1);
  if (mode == Fusion::kTI) {
    if (emb.value().rank() == 2 && emb.dim(1) > 1) emb = average_embeddings(emb);
  } else if (emb.value().rank() == 2 && emb.dim(1) != frames) {
    std::cerr << "warning: reference embedding has " << emb.dim(1)
              << " frames, mixture has " << frames << "; truncating/zero-padding\n";
    emb = emb.dim(1) > frames ? ad::slice(emb, 1, 0, frames)
                              : ad::pad(emb, 1, 0, frames - emb.dim(1));
  }
  Var<S> h = stack_forward(mix_latent, p, cfg, "ext1");
  h = fuse(h, emb, mode);
  h = stack_forward(h, p, cfg, "ext2");
  Var<S> mask = ad::relu(linear(h, p, "mask"));
  return {mask, ad::mul(mix_latent, mask)};
}

template <typename S>
ModelOutput<S> model_forward(const BoundParams<S>& p, const ModelConfig& cfg,
                             const Waveform& mixture, const Waveform& reference) {
  if (mixture.sample_rate != cfg.sample_rate || reference.sample_rate != cfg.sample_rate) {
    throw std::invalid_argument("model_forward: sample rate " +
                                std::to_string(mixture.sample_rate) + " does not match model " +
                                std::to_string(cfg.sample_rate));
  }
  Tape<S>& tape = p.tape();
  const Index l = cfg.encoder.window;
  const Index hop = cfg.encoder.stride;
  Var<S> y = encoder_forward(frames_var<S>(tape, frame(mixture, l, hop)), p, Branch::kExt);
  Var<S> a = encoder_forward(frames_var<S>(tape, frame(reference, l, hop)), p, Branch::kAux);
  Var<S> emb = aux_forward(a, p, cfg);
  ExtractOutput<S> ex = extract_forward(y, emb, cfg.fusion, p, cfg);
  return {decoder_forward(ex.latent, p, cfg, mixture.size()), emb, ex.mask};
}

template <typename S>
Waveform infer(const ModelParams<S>& params, const ModelConfig& cfg, const Waveform& mixture,
               const Waveform& reference) {
  Tape<S> tape;
  BoundParams<S> p(tape, params, false);
  ModelOutput<S> out = model_forward(p, cfg, mixture, reference);
  return Waveform{out.estimate.value().vec().template cast<double>(), mixture.sample_rate};
}

#define INFEXT_NETWORKS(S)                                                                     \
  template class ModelParams<S>;                                                               \
  template class BoundParams<S>;                                                               \
  template Var<S> frames_var(Tape<S>&, const FrameMatrix&);                                    \
  template Var<S> encoder_forward(Var<S>, const BoundParams<S>&, Branch);                      \
  template Var<S> decoder_forward(Var<S>, const BoundParams<S>&, const ModelConfig&, Index);   \
  template Var<S> glnorm(Var<S>, Var<S>, Var<S>);                                              \
  template Var<S> clnorm(Var<S>, Var<S>, Var<S>);                                              \
  template Var<S> tcn_stack_forward(Var<S>, const BoundParams<S>&, const ModelConfig&,         \
                                    const std::string&);                                       \
  template Var<S> dprnn_stack_forward(Var<S>, const BoundParams<S>&, const ModelConfig&,       \
                                      const std::string&);                                     \
  template Var<S> stack_forward(Var<S>, const BoundParams<S>&, const ModelConfig&,             \
                                const std::string&);                                           \
  template Var<S> aux_forward(Var<S>, const BoundParams<S>&, const ModelConfig&);              \
  template Var<S> average_embeddings(Var<S>);                                                  \
  template Var<S> fuse(Var<S>, Var<S>, Fusion);                                                \
  template ExtractOutput<S> extract_forward(Var<S>, Var<S>, Fusion, const BoundParams<S>&,     \
                                            const ModelConfig&);                               \
  template ModelOutput<S> model_forward(const BoundParams<S>&, const ModelConfig&,             \
                                        const Waveform&, const Waveform&);                     \
  template Waveform infer(const ModelParams<S>&, const ModelConfig&, const Waveform&,          \
                          const Waveform&);

INFEXT_NETWORKS(float)
INFEXT_NETWORKS(double)

#undef INFEXT_NETWORKS

}  // namespace infext
