#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "colloq/common.hpp"
#include "colloq/embedding_store.hpp"
#include "colloq/layers.hpp"

namespace colloq {

enum class Architecture { Cnn, Lstm, CnnGru, BiGru, BiLstm };

inline constexpr std::array<Architecture, 5> kAllArchitectures = {
    Architecture::Cnn, Architecture::Lstm, Architecture::CnnGru,
    Architecture::BiGru, Architecture::BiLstm};

std::string to_string(Architecture arch);
// Accepts cnn, lstm, cnn_gru, bigru, bilstm. Throws DataError otherwise.
Architecture parse_architecture(const std::string& name);

struct Hyperparameters {
  std::size_t filters = 0;      // convolutional architectures only
  std::size_t filter_size = 0;  // convolutional architectures only
  std::vector<std::size_t> hidden_dims;
  std::vector<double> dropout_rates;
  double learning_rate = 0.001;
  std::size_t epochs = 5;
  std::size_t batch_size = 8;

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

// Tabled defaults:
//   cnn      128 filters of width 3, dropout 0.5, 5 epochs, batch 8
//   lstm     LSTM [128, 64], dropout [0.4, 0.4], lr 0.001, 5 epochs, batch 128
//   cnn_gru  64 filters of width 3, GRU 64, dropout [0.2, 0.3, 0.5],
//            lr 0.001, 5 epochs, batch 256
//   bigru    BiGRU 64, spatial dropout 0.3, lr 0.001, 6 epochs, batch 256
//   bilstm   BiLSTM 40, dropout 0.4, lr 0.008, 5 epochs, batch 256
// The CNN table gives no learning rate; 0.001 is used.
Hyperparameters default_hyperparameters(Architecture arch);

struct ModelConfig {
  Architecture architecture = Architecture::Cnn;
  Hyperparameters hyper = default_hyperparameters(Architecture::Cnn);
  std::uint64_t seed = 1;
  std::size_t padded_length = 32;
  std::size_t embedding_dim = 100;

  // Throws DataError describing the first invalid field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

ModelConfig default_config(Architecture arch);

struct LayerInfo {
  std::string kind;
  std::size_t units = 0;
  std::size_t width = 0;
  double rate = 0.0;
};

class SentimentModel {
 public:
  explicit SentimentModel(ModelConfig config) : config_(std::move(config)) {}
  virtual ~SentimentModel() = default;
  SentimentModel(const SentimentModel&) = delete;
  SentimentModel& operator=(const SentimentModel&) = delete;

  const ModelConfig& config() const { return config_; }

  // Returns 1 x 3 logits; caches what backward needs.
  virtual Tensor2 forward(const DocumentMatrix& input, Mode mode, Rng& rng) = 0;
  // Accumulates parameter gradients for the last forward call.
  virtual void backward(const Tensor2& d_logits) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::vector<LayerInfo> layers() const = 0;

  std::size_t parameter_count();
  void zero_grad();

 private:
  ModelConfig config_;
};

std::unique_ptr<SentimentModel> build(const ModelConfig& config);

struct Example {
  DocumentMatrix input;
  int target = 0;  // class index
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;
  std::size_t optimizer_steps = 0;

  double mean_epoch_seconds() const;
  // epoch,train_loss,train_acc,val_loss,val_acc,seconds
  void write_csv(std::ostream& out) const;
};

// Monotonic seconds. Injected so runs can record a fixed clock.
using Clock = std::function<double()>;
Clock wall_clock();
Clock null_clock();

struct TrainOptions {
  Clock clock = wall_clock();
  // Called after each epoch; used for progress output.
  std::function<void(const EpochRecord&)> on_epoch;
};

TrainingTrace train(SentimentModel& model, std::span<const Example> train_set,
                    std::span<const Example> val_set,
                    const TrainOptions& options = {});

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};
LossAccuracy evaluate_loss(SentimentModel& model,
                           std::span<const Example> examples);

struct Prediction {
  Polarity label = Polarity::Neutral;
  std::array<double, kNumClasses> probabilities{};
  int class_index = 1;
};

Prediction predict(SentimentModel& model, const DocumentMatrix& input);
Prediction predict(SentimentModel& model, const std::vector<std::string>& tokens,
                   const EmbeddingTable& table);

// Largest relative error between analytic and central-difference gradients
// over every parameter element, evaluated in Eval mode (dropout off).
// relative error = |a - n| / max(|a|, |n|, 1e-8); 0 for a model without
// parameters.
double gradient_check(SentimentModel& model, const DocumentMatrix& input,
                      int target, double delta = 1e-5);

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

void save_checkpoint(SentimentModel& model, const std::string& fingerprint,
                     const std::filesystem::path& path);
// Throws CheckpointError on a corrupt file, an unsupported version, or
// when `expected_fingerprint` is nonempty and differs from the stored one.
std::unique_ptr<SentimentModel> load_checkpoint(
    const std::filesystem::path& path, const std::string& expected_fingerprint);

std::string config_to_json(const ModelConfig& config);
// Fields present in `json` override `base`.
ModelConfig config_from_json(const std::string& json, ModelConfig base);

}  // namespace colloq
