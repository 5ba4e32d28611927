#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "infext/networks.hpp"
#include "infext/scene.hpp"

namespace infext {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-5;
  double clip_norm = 5.0;
  int batch = 24;
  int max_epochs = 300;
  Index train_per_epoch = 10000;
  Index val_per_epoch = 4000;
  int plateau_patience = 10;
  double plateau_factor = 0.5;
  int early_stop_patience = 20;
  std::uint64_t seed = 0;

  void validate() const;
  // batch 8, 30 epochs, 200 / 50 examples per epoch.
  static TrainConfig desk();
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

template <typename S>
struct OptimState {
  std::vector<Tensor<S>> m;
  std::vector<Tensor<S>> v;
  std::int64_t step = 0;
  double lr = 1e-3;
  // Plateau bookkeeping.
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  static OptimState zeros(const ModelParams<S>& params, double lr);
};

// Adam with the weight decay added to the gradient.
template <typename S>
void adam_step(ModelParams<S>& params, const std::vector<Tensor<S>>& grads, OptimState<S>& state,
               const TrainConfig& cfg);

// Scales all gradients by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the norm before clipping.
template <typename S>
double clip_grad_l2(std::vector<Tensor<S>>& grads, double max_norm);

// Consumes the newest validation loss in val_history and returns the
// (possibly halved) learning rate stored in state.
template <typename S>
double lr_on_plateau(const std::vector<double>& val_history, OptimState<S>& state,
                     int patience = 10, double factor = 0.5);

// True when the best validation loss is at least `patience` epochs old.
bool early_stop(const std::vector<double>& val_history, int patience = 20);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
  double seconds = 0;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig model;
  TrainConfig train;
  ModelParams<float> params;
  OptimState<float> optim;
  std::vector<EpochRecord> history;
  int epoch = 0;
  nlohmann::json extra = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  // Checkpoints (last.ckpt, best.ckpt) and train_log.csv go here when set.
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::filesystem::path> resume;
  std::uint64_t init_seed = 1;
  std::function<void(const EpochRecord&)> on_epoch;
  nlohmann::json extra = nlohmann::json::object();
};

struct TrainResult {
  Checkpoint last;
  Checkpoint best;
  bool early_stopped = false;
};

// Mean -SDR of the echo estimate over `count` scenes of the fixed stream.
double validation_loss(const ModelParams<float>& params, const ModelConfig& cfg,
                       const SceneGenerator& gen, std::uint64_t stream_seed, Index count);

std::uint64_t validation_stream_seed(std::uint64_t seed);
std::uint64_t train_stream_seed(std::uint64_t seed, int epoch);

// Gradient of the mean batch loss; returns the mean loss.
double batch_gradient(const ModelParams<float>& params, const ModelConfig& cfg,
                      const std::vector<AerScene>& batch, std::vector<TensorF>& grads);

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const SceneGenerator& train_gen, const SceneGenerator& val_gen,
                  const TrainOptions& opts = {});

void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace infext
