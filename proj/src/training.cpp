#include "infext/training.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "infext/metrics.hpp"

namespace infext {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw std::invalid_argument(std::string("train config: ") + name + " must be positive");
  };
  positive(lr, "lr");
  if (weight_decay < 0) throw std::invalid_argument("train config: weight_decay must be >= 0");
  positive(clip_norm, "clip_norm");
  positive(batch, "batch");
  positive(max_epochs, "max_epochs");
  positive(static_cast<double>(train_per_epoch), "train_per_epoch");
  positive(static_cast<double>(val_per_epoch), "val_per_epoch");
  positive(plateau_patience, "plateau_patience");
  if (!(plateau_factor > 0 && plateau_factor < 1)) {
    throw std::invalid_argument("train config: plateau_factor must be in (0, 1)");
  }
  positive(early_stop_patience, "early_stop_patience");
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.batch = 8;
  c.max_epochs = 30;
  c.train_per_epoch = 200;
  c.val_per_epoch = 50;
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"clip_norm", c.clip_norm},
          {"batch", c.batch},
          {"max_epochs", c.max_epochs},
          {"train_per_epoch", c.train_per_epoch},
          {"val_per_epoch", c.val_per_epoch},
          {"plateau_patience", c.plateau_patience},
          {"plateau_factor", c.plateau_factor},
          {"early_stop_patience", c.early_stop_patience},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.batch = j.at("batch").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.train_per_epoch = j.at("train_per_epoch").get<Index>();
  c.val_per_epoch = j.at("val_per_epoch").get<Index>();
  c.plateau_patience = j.at("plateau_patience").get<int>();
  c.plateau_factor = j.at("plateau_factor").get<double>();
  c.early_stop_patience = j.at("early_stop_patience").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

template <typename S>
OptimState<S> OptimState<S>::zeros(const ModelParams<S>& params, double lr) {
  OptimState<S> s;
  s.lr = lr;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params.tensor(i).shape());
    s.v.emplace_back(params.tensor(i).shape());
  }
  return s;
}

template <typename S>
void adam_step(ModelParams<S>& params, const std::vector<Tensor<S>>& grads, OptimState<S>& state,
               const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  const S b1 = S(kAdamBeta1), b2 = S(kAdamBeta2);
  const S wd = S(cfg.weight_decay);
  const S step = S(state.lr / c1);
  const S inv_c2 = S(1.0 / c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.tensor(i).vec();
    if (grads[i].size() != p.size() || state.m[i].size() != p.size()) {
      throw std::invalid_argument("adam_step: shape mismatch for '" + params.name(i) + "'");
    }
    auto& m = state.m[i].vec();
    auto& v = state.v[i].vec();
    const auto g = (grads[i].vec() + wd * p).eval();
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.cwiseProduct(g);
    p.array() -= step * m.array() / ((v.array() * inv_c2).sqrt() + S(kAdamEps));
  }
}

template <typename S>
double clip_grad_l2(std::vector<Tensor<S>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.vec().template cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const S factor = S(max_norm / norm);
    for (auto& g : grads) g.vec() *= factor;
  }
  return norm;
}

template <typename S>
double lr_on_plateau(const std::vector<double>& val_history, OptimState<S>& state, int patience,
                     double factor) {
  if (val_history.empty()) throw std::invalid_argument("lr_on_plateau: empty history");
  const double latest = val_history.back();
  if (latest < state.best_val) {
    state.best_val = latest;
    state.bad_epochs = 0;
  } else if (++state.bad_epochs >= patience) {
    state.lr *= factor;
    state.bad_epochs = 0;
  }
  return state.lr;
}

bool early_stop(const std::vector<double>& val_history, int patience) {
  if (val_history.empty()) return false;
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_history.size(); ++i) {
    if (val_history[i] < val_history[best]) best = i;
  }
  return static_cast<int>(val_history.size() - 1 - best) >= patience;
}

template struct OptimState<float>;
template struct OptimState<double>;
template void adam_step(ModelParams<float>&, const std::vector<TensorF>&, OptimState<float>&,
                        const TrainConfig&);
template void adam_step(ModelParams<double>&, const std::vector<TensorD>&, OptimState<double>&,
                        const TrainConfig&);
template double clip_grad_l2(std::vector<TensorF>&, double);
template double clip_grad_l2(std::vector<TensorD>&, double);
template double lr_on_plateau(const std::vector<double>&, OptimState<float>&, int, double);
template double lr_on_plateau(const std::vector<double>&, OptimState<double>&, int, double);

// Checkpoint container -------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'I', 'S', 'E', 'C'};

nlohmann::json history_to_json(const std::vector<EpochRecord>& h) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : h) {
    j.push_back({{"epoch", r.epoch},
                 {"train_loss", r.train_loss},
                 {"val_loss", r.val_loss},
                 {"lr", r.lr},
                 {"seconds", r.seconds}});
  }
  return j;
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& j) {
  std::vector<EpochRecord> h;
  for (const auto& r : j) {
    h.push_back({r.at("epoch").get<int>(), r.at("train_loss").get<double>(),
                 r.at("val_loss").get<double>(), r.at("lr").get<double>(),
                 r.at("seconds").get<double>()});
  }
  return h;
}

// JSON cannot carry infinity; an unset best is written as null.
nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

template <typename T>
void put(std::string& buf, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buf.append(p, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw std::runtime_error("checkpoint truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto registry = param_registry(ckpt.model);
  if (registry.size() != ckpt.params.size()) {
    throw std::invalid_argument("save_checkpoint: parameters do not match the model config");
  }
  const bool moments = !ckpt.optim.m.empty();
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto add_section = [&](const std::string& section, const std::vector<TensorF>* src) {
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      const TensorF& t = src ? (*src)[i] : ckpt.params.tensor(i);
      tensors.push_back({{"name", ckpt.params.name(i)},
                         {"section", section},
                         {"shape", t.shape()},
                         {"dtype", "f32"},
                         {"offset", offset}});
      offset += static_cast<std::uint64_t>(t.size()) * sizeof(float);
    }
  };
  add_section("param", nullptr);
  if (moments) {
    add_section("adam_m", &ckpt.optim.m);
    add_section("adam_v", &ckpt.optim.v);
  }
  nlohmann::json header = {
      {"model", to_json(ckpt.model)},
      {"train", to_json(ckpt.train)},
      {"tensors", tensors},
      {"data_bytes", offset},
      {"optim", {{"step", ckpt.optim.step},
                 {"lr", ckpt.optim.lr},
                 {"best_val", finite_or_null(ckpt.optim.best_val)},
                 {"bad_epochs", ckpt.optim.bad_epochs},
                 {"moments", moments}}},
      {"history", history_to_json(ckpt.history)},
      {"epoch", ckpt.epoch},
      {"extra", ckpt.extra},
  };
  const std::string text = header.dump();
  std::string buf;
  buf.append(kMagic, 4);
  put(buf, Checkpoint::kVersion);
  put(buf, static_cast<std::uint64_t>(text.size()));
  buf += text;
  auto append = [&](const TensorF& t) {
    buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
  };
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) append(ckpt.params.tensor(i));
  if (moments) {
    for (const auto& t : ckpt.optim.m) append(t);
    for (const auto& t : ckpt.optim.v) append(t);
  }
  // Write then rename so a crash never leaves a half-written checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw std::runtime_error(path.string() + ": not a checkpoint (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(buf, pos);
  if (version != Checkpoint::kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = take<std::uint64_t>(buf, pos);
  if (pos + header_len > buf.size()) throw std::runtime_error("checkpoint truncated");
  const nlohmann::json header = nlohmann::json::parse(buf.substr(pos, header_len));
  pos += header_len;
  const std::size_t data_begin = pos;
  const auto data_bytes = header.at("data_bytes").get<std::uint64_t>();
  if (buf.size() - data_begin != data_bytes) {
    throw std::runtime_error("checkpoint truncated: expected " + std::to_string(data_bytes) +
                             " data bytes, found " + std::to_string(buf.size() - data_begin));
  }

  Checkpoint ck;
  ck.model = model_config_from_json(header.at("model"));
  ck.train = train_config_from_json(header.at("train"));
  const auto registry = param_registry(ck.model);
  const auto& tensors = header.at("tensors");
  const bool moments = header.at("optim").at("moments").get<bool>();
  const std::size_t sections = moments ? 3 : 1;
  if (tensors.size() != registry.size() * sections) {
    throw std::runtime_error("checkpoint registry has " + std::to_string(tensors.size()) +
                             " tensors, model config expects " +
                             std::to_string(registry.size() * sections));
  }
  std::vector<TensorF> loaded;
  Index total = 0;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto& e = tensors[k];
    const auto& expected = registry[k % registry.size()];
    const auto shape = e.at("shape").get<Shape>();
    if (e.at("name").get<std::string>() != expected.name || shape != expected.shape ||
        e.at("dtype").get<std::string>() != "f32") {
      throw std::runtime_error("checkpoint registry mismatch at '" +
                               e.at("name").get<std::string>() + "'");
    }
    const auto offset = e.at("offset").get<std::uint64_t>();
    const auto bytes = static_cast<std::uint64_t>(numel(shape)) * sizeof(float);
    if (offset + bytes > data_bytes) throw std::runtime_error("checkpoint tensor out of bounds");
    TensorF t(shape);
    std::memcpy(t.data(), buf.data() + data_begin + offset, bytes);
    if (k < registry.size()) total += t.size();
    loaded.push_back(std::move(t));
  }
  if (total != param_count(ck.model)) {
    throw std::runtime_error("checkpoint parameter total does not match param_count");
  }
  for (std::size_t i = 0; i < registry.size(); ++i) {
    ck.params.add(registry[i].name, std::move(loaded[i]));
  }
  if (moments) {
    for (std::size_t i = 0; i < registry.size(); ++i) {
      ck.optim.m.push_back(std::move(loaded[registry.size() + i]));
      ck.optim.v.push_back(std::move(loaded[2 * registry.size() + i]));
    }
  }
  const auto& o = header.at("optim");
  ck.optim.step = o.at("step").get<std::int64_t>();
  ck.optim.lr = o.at("lr").get<double>();
  ck.optim.best_val = o.at("best_val").is_null() ? std::numeric_limits<double>::infinity()
                                                 : o.at("best_val").get<double>();
  ck.optim.bad_epochs = o.at("bad_epochs").get<int>();
  ck.history = history_from_json(header.at("history"));
  ck.epoch = header.at("epoch").get<int>();
  ck.extra = header.at("extra");
  return ck;
}

// Training loop --------------------------------------------------------------

std::uint64_t validation_stream_seed(std::uint64_t seed) { return mix_seed(seed, 0x7661'6c00ULL); }

std::uint64_t train_stream_seed(std::uint64_t seed, int epoch) {
  return mix_seed(seed, static_cast<std::uint64_t>(epoch));
}

namespace {

TensorF waveform_tensor(const Waveform& w) {
  return TensorF({w.size()}, Eigen::VectorXf(w.samples.cast<float>()));
}

double example_loss(const ModelParams<float>& params, const ModelConfig& cfg, const AerScene& s) {
  Tape<float> tape;
  BoundParams<float> p(tape, params, false);
  const auto out = model_forward(p, cfg, s.mixture, s.reference);
  return sdr_loss(waveform_tensor(s.echo), out.estimate).value().item();
}

}  // namespace

double validation_loss(const ModelParams<float>& params, const ModelConfig& cfg,
                       const SceneGenerator& gen, std::uint64_t stream_seed, Index count) {
  SceneStream stream = dataset_iter(gen, stream_seed, count);
  double total = 0.0;
  for (Index i = 0; i < count; ++i) total += example_loss(params, cfg, stream.at(i));
  return total / static_cast<double>(count);
}

double batch_gradient(const ModelParams<float>& params, const ModelConfig& cfg,
                      const std::vector<AerScene>& batch, std::vector<TensorF>& grads) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  grads.clear();
  for (std::size_t i = 0; i < params.size(); ++i) grads.emplace_back(params.tensor(i).shape());
  double loss_sum = 0.0;
  // One tape per example, reduced in batch order.
  for (const auto& scene : batch) {
    Tape<float> tape;
    BoundParams<float> p(tape, params);
    const auto out = model_forward(p, cfg, scene.mixture, scene.reference);
    Var<float> loss = sdr_loss(waveform_tensor(scene.echo), out.estimate);
    tape.backward(loss);
    loss_sum += loss.value().item();
    for (std::size_t k = 0; k < params.size(); ++k) grads[k].vec() += tape.grad(p.vars()[k]).vec();
  }
  const float inv = 1.0f / static_cast<float>(batch.size());
  for (auto& g : grads) g.vec() *= inv;
  return loss_sum / static_cast<double>(batch.size());
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,lr,seconds\n";
  out.precision(10);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << ',' << r.seconds
        << '\n';
  }
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const SceneGenerator& train_gen, const SceneGenerator& val_gen,
                  const TrainOptions& opts) {
  model_cfg.validate();
  train_cfg.validate();
  if (train_gen.config().sample_rate != model_cfg.sample_rate) {
    throw std::invalid_argument("train: scene sample rate does not match the model");
  }

  TrainResult result;
  Checkpoint& ck = result.last;
  if (opts.resume) {
    ck = load_checkpoint(*opts.resume);
    if (to_json(ck.model) != to_json(model_cfg)) {
      throw std::invalid_argument("resume: checkpoint model config differs from the requested one");
    }
    ck.train = train_cfg;
    if (ck.optim.m.empty()) ck.optim = OptimState<float>::zeros(ck.params, train_cfg.lr);
  } else {
    ck.model = model_cfg;
    ck.train = train_cfg;
    ck.params = ModelParams<float>::init(model_cfg, opts.init_seed);
    ck.optim = OptimState<float>::zeros(ck.params, train_cfg.lr);
  }
  ck.extra = opts.extra;
  result.best = ck;

  std::vector<double> val_history;
  for (const auto& r : ck.history) val_history.push_back(r.val_loss);
  if (!val_history.empty()) {
    // Rebuild the best checkpoint on resume from disk when available.
    if (opts.out_dir && std::filesystem::exists(*opts.out_dir / "best.ckpt")) {
      result.best = load_checkpoint(*opts.out_dir / "best.ckpt");
    }
  }
  if (opts.out_dir) std::filesystem::create_directories(*opts.out_dir);

  const std::uint64_t val_seed = validation_stream_seed(train_cfg.seed);
  std::vector<AerScene> batch;
  std::vector<TensorF> grads;
  for (int epoch = ck.epoch + 1; epoch <= train_cfg.max_epochs; ++epoch) {
    if (early_stop(val_history, train_cfg.early_stop_patience)) {
      result.early_stopped = true;
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    SceneStream stream =
        dataset_iter(train_gen, train_stream_seed(train_cfg.seed, epoch), train_cfg.train_per_epoch);
    double train_sum = 0.0;
    Index seen = 0;
    int batch_index = 0;
    for (Index start = 0; start < stream.size(); start += train_cfg.batch) {
      batch.clear();
      for (Index i = start; i < std::min(stream.size(), start + Index(train_cfg.batch)); ++i) {
        batch.push_back(stream.at(i));
      }
      const double loss = batch_gradient(ck.params, model_cfg, batch, grads);
      const double norm = clip_grad_l2(grads, train_cfg.clip_norm);
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batch_index << " (loss "
            << loss << ", gradient norm " << norm << ")";
        throw TrainingAborted(msg.str());
      }
      adam_step(ck.params, grads, ck.optim, train_cfg);
      train_sum += loss * static_cast<double>(batch.size());
      seen += static_cast<Index>(batch.size());
      ++batch_index;
    }

    const double val = validation_loss(ck.params, model_cfg, val_gen, val_seed,
                                       train_cfg.val_per_epoch);
    if (!std::isfinite(val)) {
      throw TrainingAborted("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_sum / static_cast<double>(seen);
    rec.val_loss = val;
    rec.lr = ck.optim.lr;  // rate used during this epoch
    val_history.push_back(val);
    const bool improved = val < ck.optim.best_val;
    lr_on_plateau(val_history, ck.optim, train_cfg.plateau_patience, train_cfg.plateau_factor);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ck.history.push_back(rec);
    ck.epoch = epoch;
    if (improved) result.best = ck;
    if (opts.out_dir) {
      save_checkpoint(*opts.out_dir / "last.ckpt", ck);
      if (improved) save_checkpoint(*opts.out_dir / "best.ckpt", ck);
      write_training_log(*opts.out_dir / "train_log.csv", ck.history);
    }
    if (opts.on_epoch) opts.on_epoch(rec);
  }
  if (!result.early_stopped && early_stop(val_history, train_cfg.early_stop_patience)) {
    result.early_stopped = true;
  }
  return result;
}

}  // namespace infext
