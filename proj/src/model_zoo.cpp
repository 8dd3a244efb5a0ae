#include "colloq/model_zoo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "colloq/adam.hpp"
#include "json.hpp"

namespace colloq {
namespace {

using nlohmann::json;

void append_params(std::vector<Parameter*>& out,
                   std::initializer_list<Parameter*> params) {
  out.insert(out.end(), params.begin(), params.end());
}

template <typename Cell>
void append_cell(std::vector<Parameter*>& out, Cell& cell) {
  append_params(out, {&cell.input_weights, &cell.recurrent_weights, &cell.bias});
}

std::size_t argmax(std::span<const Real> values) {
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

class CnnModel final : public SentimentModel {
 public:
  explicit CnnModel(const ModelConfig& c)
      : SentimentModel(c),
        conv_("conv", c.embedding_dim, c.hyper.filters, c.hyper.filter_size),
        dropout_(c.hyper.dropout_rates.at(0)),
        dense_("dense", c.hyper.filters, kNumClasses) {
    Rng rng(mix_seed(c.seed, 0));
    conv_.init(rng);
    dense_.init(rng);
  }

  Tensor2 forward(const DocumentMatrix& input, Mode mode, Rng& rng) override {
    const Tensor2 pooled = pool_.forward(relu_.forward(conv_.forward(input.values)));
    return dense_.forward(dropout_.forward(pooled, mode, rng));
  }

  void backward(const Tensor2& d_logits) override {
    const Tensor2 d_pooled = dropout_.backward(dense_.backward(d_logits));
    conv_.backward(relu_.backward(pool_.backward(d_pooled)));
  }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    append_params(out, {&conv_.weight, &conv_.bias, &dense_.weight, &dense_.bias});
    return out;
  }

  std::vector<LayerInfo> layers() const override {
    return {{"conv1d", conv_.filters(), conv_.width(), 0.0},
            {"relu"},
            {"global_max_pool"},
            {"dropout", 0, 0, dropout_.rate()},
            {"dense", kNumClasses},
            {"softmax", kNumClasses}};
  }

 private:
  Conv1D conv_;
  Relu relu_;
  GlobalMaxPool pool_;
  Dropout dropout_;
  Dense dense_;
};

// Stacked LSTMs; every layer but the last feeds its full state sequence to
// the next, each followed by its dropout.
class LstmModel final : public SentimentModel {
 public:
  explicit LstmModel(const ModelConfig& c) : SentimentModel(c) {
    std::size_t in = c.embedding_dim;
    for (std::size_t i = 0; i < c.hyper.hidden_dims.size(); ++i) {
      cells_.emplace_back("lstm" + std::to_string(i + 1), in,
                          c.hyper.hidden_dims[i]);
      dropouts_.emplace_back(c.hyper.dropout_rates.at(i));
      in = c.hyper.hidden_dims[i];
    }
    dense_ = std::make_unique<Dense>("dense", in, kNumClasses);
    Rng rng(mix_seed(c.seed, 0));
    for (auto& cell : cells_) cell.init(rng);
    dense_->init(rng);
  }

  Tensor2 forward(const DocumentMatrix& input, Mode mode, Rng& rng) override {
    length_ = input.true_length;
    Tensor2 seq = input.values;
    for (std::size_t i = 0; i + 1 < cells_.size(); ++i) {
      seq = dropouts_[i].forward(cells_[i].forward(seq, length_), mode, rng);
    }
    auto& last = cells_.back();
    const Tensor2 final_h =
        final_state(last.forward(seq, length_), last.hidden());
    return dense_->forward(dropouts_.back().forward(final_h, mode, rng));
  }

  void backward(const Tensor2& d_logits) override {
    const Tensor2 d_final = dropouts_.back().backward(dense_->backward(d_logits));
    Tensor2 d = cells_.back().backward(expand_final_grad(d_final, length_));
    for (std::size_t i = cells_.size() - 1; i-- > 0;) {
      d = cells_[i].backward(dropouts_[i].backward(d));
    }
  }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    for (auto& cell : cells_) append_cell(out, cell);
    append_params(out, {&dense_->weight, &dense_->bias});
    return out;
  }

  std::vector<LayerInfo> layers() const override {
    std::vector<LayerInfo> out;
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      out.push_back({"lstm", cells_[i].hidden()});
      out.push_back({"dropout", 0, 0, dropouts_[i].rate()});
    }
    out.push_back({"dense", kNumClasses});
    out.push_back({"softmax", kNumClasses});
    return out;
  }

 private:
  std::vector<Lstm> cells_;
  std::vector<Dropout> dropouts_;
  std::unique_ptr<Dense> dense_;
  std::size_t length_ = 0;
};

// conv -> relu -> dropout -> GRU over the windows that start at a real
// token -> dropout -> dropout -> dense.
class CnnGruModel final : public SentimentModel {
 public:
  explicit CnnGruModel(const ModelConfig& c)
      : SentimentModel(c),
        conv_("conv", c.embedding_dim, c.hyper.filters, c.hyper.filter_size),
        conv_dropout_(c.hyper.dropout_rates.at(0)),
        gru_("gru", c.hyper.filters, c.hyper.hidden_dims.at(0)),
        gru_dropout_(c.hyper.dropout_rates.at(1)),
        dense_dropout_(c.hyper.dropout_rates.at(2)),
        dense_("dense", c.hyper.hidden_dims.at(0), kNumClasses) {
    Rng rng(mix_seed(c.seed, 0));
    conv_.init(rng);
    gru_.init(rng);
    dense_.init(rng);
  }

  Tensor2 forward(const DocumentMatrix& input, Mode mode, Rng& rng) override {
    const Tensor2 features = conv_dropout_.forward(
        relu_.forward(conv_.forward(input.values)), mode, rng);
    steps_ = std::min(input.true_length, features.rows());
    const Tensor2 h = final_state(gru_.forward(features, steps_), gru_.hidden());
    const Tensor2 d1 = gru_dropout_.forward(h, mode, rng);
    return dense_.forward(dense_dropout_.forward(d1, mode, rng));
  }

  void backward(const Tensor2& d_logits) override {
    const Tensor2 d_h = gru_dropout_.backward(
        dense_dropout_.backward(dense_.backward(d_logits)));
    const Tensor2 d_features = gru_.backward(expand_final_grad(d_h, steps_));
    conv_.backward(relu_.backward(conv_dropout_.backward(d_features)));
  }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    append_params(out, {&conv_.weight, &conv_.bias});
    append_cell(out, gru_);
    append_params(out, {&dense_.weight, &dense_.bias});
    return out;
  }

  std::vector<LayerInfo> layers() const override {
    return {{"conv1d", conv_.filters(), conv_.width(), 0.0},
            {"relu"},
            {"dropout", 0, 0, conv_dropout_.rate()},
            {"gru", gru_.hidden()},
            {"dropout", 0, 0, gru_dropout_.rate()},
            {"dropout", 0, 0, dense_dropout_.rate()},
            {"dense", kNumClasses},
            {"softmax", kNumClasses}};
  }

 private:
  Conv1D conv_;
  Relu relu_;
  Dropout conv_dropout_;
  Gru gru_;
  Dropout gru_dropout_;
  Dropout dense_dropout_;
  Dense dense_;
  std::size_t steps_ = 0;
};

class BiGruModel final : public SentimentModel {
 public:
  explicit BiGruModel(const ModelConfig& c)
      : SentimentModel(c),
        spatial_dropout_(c.hyper.dropout_rates.at(0), /*spatial=*/true),
        rnn_("bigru", c.embedding_dim, c.hyper.hidden_dims.at(0)),
        dense_("dense", 2 * c.hyper.hidden_dims.at(0), kNumClasses) {
    Rng rng(mix_seed(c.seed, 0));
    rnn_.init(rng);
    dense_.init(rng);
  }

  Tensor2 forward(const DocumentMatrix& input, Mode mode, Rng& rng) override {
    const Tensor2 x = spatial_dropout_.forward(input.values, mode, rng);
    return dense_.forward(rnn_.forward(x, input.true_length));
  }

  void backward(const Tensor2& d_logits) override {
    spatial_dropout_.backward(rnn_.backward(dense_.backward(d_logits)));
  }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    append_cell(out, rnn_.forward_cell);
    append_cell(out, rnn_.backward_cell);
    append_params(out, {&dense_.weight, &dense_.bias});
    return out;
  }

  std::vector<LayerInfo> layers() const override {
    return {{"spatial_dropout", 0, 0, spatial_dropout_.rate()},
            {"bigru", rnn_.hidden()},
            {"dense", kNumClasses},
            {"softmax", kNumClasses}};
  }

 private:
  Dropout spatial_dropout_;
  Bidirectional<Gru> rnn_;
  Dense dense_;
};

class BiLstmModel final : public SentimentModel {
 public:
  explicit BiLstmModel(const ModelConfig& c)
      : SentimentModel(c),
        rnn_("bilstm", c.embedding_dim, c.hyper.hidden_dims.at(0)),
        dropout_(c.hyper.dropout_rates.at(0)),
        dense_("dense", 2 * c.hyper.hidden_dims.at(0), kNumClasses) {
    Rng rng(mix_seed(c.seed, 0));
    rnn_.init(rng);
    dense_.init(rng);
  }

  Tensor2 forward(const DocumentMatrix& input, Mode mode, Rng& rng) override {
    const Tensor2 h = rnn_.forward(input.values, input.true_length);
    return dense_.forward(dropout_.forward(h, mode, rng));
  }

  void backward(const Tensor2& d_logits) override {
    rnn_.backward(dropout_.backward(dense_.backward(d_logits)));
  }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    append_cell(out, rnn_.forward_cell);
    append_cell(out, rnn_.backward_cell);
    append_params(out, {&dense_.weight, &dense_.bias});
    return out;
  }

  std::vector<LayerInfo> layers() const override {
    return {{"bilstm", rnn_.hidden()},
            {"dropout", 0, 0, dropout_.rate()},
            {"dense", kNumClasses},
            {"softmax", kNumClasses}};
  }

 private:
  Bidirectional<Lstm> rnn_;
  Dropout dropout_;
  Dense dense_;
};

json config_json(const ModelConfig& c) {
  return json{{"architecture", to_string(c.architecture)},
              {"filters", c.hyper.filters},
              {"filter_size", c.hyper.filter_size},
              {"hidden_dims", c.hyper.hidden_dims},
              {"dropout_rates", c.hyper.dropout_rates},
              {"learning_rate", c.hyper.learning_rate},
              {"epochs", c.hyper.epochs},
              {"batch_size", c.hyper.batch_size},
              {"seed", c.seed},
              {"padded_length", c.padded_length},
              {"embedding_dim", c.embedding_dim}};
}

ModelConfig config_from(const json& j, ModelConfig base) {
  if (!j.is_object()) throw DataError("model config must be a JSON object");
  if (j.contains("architecture")) {
    const Architecture arch =
        parse_architecture(j.at("architecture").get<std::string>());
    if (arch != base.architecture) {
      base.architecture = arch;
      base.hyper = default_hyperparameters(arch);
    }
  }
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  take("filters", base.hyper.filters);
  take("filter_size", base.hyper.filter_size);
  take("hidden_dims", base.hyper.hidden_dims);
  take("dropout_rates", base.hyper.dropout_rates);
  take("learning_rate", base.hyper.learning_rate);
  take("epochs", base.hyper.epochs);
  take("batch_size", base.hyper.batch_size);
  take("seed", base.seed);
  take("padded_length", base.padded_length);
  take("embedding_dim", base.embedding_dim);
  return base;
}

}  // namespace

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::Cnn:
      return "cnn";
    case Architecture::Lstm:
      return "lstm";
    case Architecture::CnnGru:
      return "cnn_gru";
    case Architecture::BiGru:
      return "bigru";
    case Architecture::BiLstm:
      return "bilstm";
  }
  return "unknown";
}

Architecture parse_architecture(const std::string& name) {
  for (Architecture a : kAllArchitectures) {
    if (to_string(a) == name) return a;
  }
  throw DataError("unknown architecture '" + name +
                  "' (expected cnn, lstm, cnn_gru, bigru or bilstm)");
}

Hyperparameters default_hyperparameters(Architecture arch) {
  Hyperparameters h;
  switch (arch) {
    case Architecture::Cnn:
      h.filters = 128;
      h.filter_size = 3;
      h.dropout_rates = {0.5};
      h.learning_rate = 0.001;
      h.epochs = 5;
      h.batch_size = 8;
      break;
    case Architecture::Lstm:
      h.hidden_dims = {128, 64};
      h.dropout_rates = {0.4, 0.4};
      h.learning_rate = 0.001;
      h.epochs = 5;
      h.batch_size = 128;
      break;
    case Architecture::CnnGru:
      h.filters = 64;
      h.filter_size = 3;
      h.hidden_dims = {64};
      h.dropout_rates = {0.2, 0.3, 0.5};
      h.learning_rate = 0.001;
      h.epochs = 5;
      h.batch_size = 256;
      break;
    case Architecture::BiGru:
      h.hidden_dims = {64};
      h.dropout_rates = {0.3};
      h.learning_rate = 0.001;
      h.epochs = 6;
      h.batch_size = 256;
      break;
    case Architecture::BiLstm:
      h.hidden_dims = {40};
      h.dropout_rates = {0.4};
      h.learning_rate = 0.008;
      h.epochs = 5;
      h.batch_size = 256;
      break;
  }
  return h;
}

ModelConfig default_config(Architecture arch) {
  ModelConfig c;
  c.architecture = arch;
  c.hyper = default_hyperparameters(arch);
  return c;
}

void ModelConfig::validate() const {
  const auto& h = hyper;
  auto fail = [&](const std::string& what) {
    throw DataError(to_string(architecture) + " config: " + what);
  };
  if (embedding_dim == 0) fail("embedding_dim must be positive");
  if (padded_length == 0) fail("padded_length must be positive");
  if (h.epochs == 0) fail("epochs must be at least 1");
  if (h.batch_size == 0) fail("batch_size must be at least 1");
  if (!(h.learning_rate > 0.0) || !std::isfinite(h.learning_rate)) {
    fail("learning_rate must be positive");
  }
  for (double r : h.dropout_rates) {
    if (!(r >= 0.0 && r < 1.0)) fail("dropout rates must lie in [0, 1)");
  }
  for (std::size_t d : h.hidden_dims) {
    if (d == 0) fail("hidden dimensions must be positive");
  }
  const bool convolutional =
      architecture == Architecture::Cnn || architecture == Architecture::CnnGru;
  if (convolutional) {
    if (h.filters == 0 || h.filter_size == 0) {
      fail("filters and filter_size must be positive");
    }
    if (padded_length < h.filter_size) {
      fail("padded_length " + std::to_string(padded_length) +
           " is shorter than filter_size " + std::to_string(h.filter_size));
    }
  }
  auto expect_counts = [&](std::size_t hidden, std::size_t dropout) {
    if (h.hidden_dims.size() != hidden) {
      fail("expected " + std::to_string(hidden) + " hidden dims, got " +
           std::to_string(h.hidden_dims.size()));
    }
    if (h.dropout_rates.size() != dropout) {
      fail("expected " + std::to_string(dropout) + " dropout rates, got " +
           std::to_string(h.dropout_rates.size()));
    }
  };
  switch (architecture) {
    case Architecture::Cnn:
      expect_counts(0, 1);
      break;
    case Architecture::Lstm:
      if (h.hidden_dims.empty()) fail("lstm needs at least one hidden dim");
      expect_counts(h.hidden_dims.size(), h.hidden_dims.size());
      break;
    case Architecture::CnnGru:
      expect_counts(1, 3);
      break;
    case Architecture::BiGru:
    case Architecture::BiLstm:
      expect_counts(1, 1);
      break;
  }
}

std::size_t SentimentModel::parameter_count() {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

void SentimentModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::unique_ptr<SentimentModel> build(const ModelConfig& config) {
  config.validate();
  switch (config.architecture) {
    case Architecture::Cnn:
      return std::make_unique<CnnModel>(config);
    case Architecture::Lstm:
      return std::make_unique<LstmModel>(config);
    case Architecture::CnnGru:
      return std::make_unique<CnnGruModel>(config);
    case Architecture::BiGru:
      return std::make_unique<BiGruModel>(config);
    case Architecture::BiLstm:
      return std::make_unique<BiLstmModel>(config);
  }
  throw DataError("unknown architecture");
}

double TrainingTrace::mean_epoch_seconds() const {
  if (epochs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : epochs) total += e.seconds;
  return total / static_cast<double>(epochs.size());
}

void TrainingTrace::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << format_real(e.train_loss) << ','
        << format_real(e.train_accuracy) << ',' << format_real(e.val_loss) << ','
        << format_real(e.val_accuracy) << ',' << format_real(e.seconds) << '\n';
  }
}

Clock wall_clock() {
  return [] {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  };
}

Clock null_clock() {
  return [] { return 0.0; };
}

namespace {

void check_example_shape(const ModelConfig& c, const Example& e) {
  if (e.input.values.cols() != c.embedding_dim) {
    throw DataError("example has embedding dimension " +
                    std::to_string(e.input.values.cols()) + ", model expects " +
                    std::to_string(c.embedding_dim));
  }
  if (e.input.values.rows() != c.padded_length) {
    throw DataError("example has padded length " +
                    std::to_string(e.input.values.rows()) + ", model expects " +
                    std::to_string(c.padded_length));
  }
  if (e.target < 0 || e.target >= kNumClasses) {
    throw DataError("example target out of range");
  }
}

}  // namespace

LossAccuracy evaluate_loss(SentimentModel& model,
                           std::span<const Example> examples) {
  LossAccuracy out;
  if (examples.empty()) return out;
  Rng unused(0);
  std::size_t correct = 0;
  for (const auto& e : examples) {
    check_example_shape(model.config(), e);
    const Tensor2 logits = model.forward(e.input, Mode::Eval, unused);
    const auto sx = softmax_cross_entropy(logits.values(),
                                          static_cast<std::size_t>(e.target));
    out.loss += sx.loss;
    if (argmax(logits.values()) == static_cast<std::size_t>(e.target)) ++correct;
  }
  const double n = static_cast<double>(examples.size());
  out.loss /= n;
  out.accuracy = static_cast<double>(correct) / n;
  return out;
}

TrainingTrace train(SentimentModel& model, std::span<const Example> train_set,
                    std::span<const Example> val_set,
                    const TrainOptions& options) {
  const ModelConfig& config = model.config();
  if (train_set.empty()) throw DataError("training set is empty");
  for (const auto& e : train_set) check_example_shape(config, e);
  for (const auto& e : val_set) check_example_shape(config, e);

  Rng shuffle_rng(mix_seed(config.seed, 1));
  Rng dropout_rng(mix_seed(config.seed, 2));
  AdamState adam(config.hyper.learning_rate);
  const auto params = model.parameters();
  const std::size_t batch = config.hyper.batch_size;

  TrainingTrace trace;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= config.hyper.epochs; ++epoch) {
    const double start = options.clock();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      model.zero_grad();
      for (std::size_t k = begin; k < end; ++k) {
        const Example& e = train_set[order[k]];
        const Tensor2 logits = model.forward(e.input, Mode::Train, dropout_rng);
        const auto sx = softmax_cross_entropy(
            logits.values(), static_cast<std::size_t>(e.target));
        if (!std::isfinite(sx.loss)) {
          throw Error("non-finite training loss at epoch " +
                      std::to_string(epoch));
        }
        loss_sum += sx.loss;
        if (argmax(logits.values()) == static_cast<std::size_t>(e.target)) {
          ++correct;
        }
        model.backward(Tensor2(1, kNumClasses, sx.grad));
      }
      const Real scale = 1.0 / static_cast<Real>(end - begin);
      for (Parameter* p : params) {
        for (auto& g : p->grad.values()) g *= scale;
      }
      adam_update(adam, params);
      ++trace.optimizer_steps;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_set.size());
    record.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(train_set.size());
    const LossAccuracy val = evaluate_loss(model, val_set);
    record.val_loss = val.loss;
    record.val_accuracy = val.accuracy;
    record.seconds = options.clock() - start;
    trace.epochs.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }
  return trace;
}

Prediction predict(SentimentModel& model, const DocumentMatrix& input) {
  Rng unused(0);
  const Tensor2 logits = model.forward(input, Mode::Eval, unused);
  Prediction p;
  softmax(logits.values(), p.probabilities);
  p.class_index = static_cast<int>(argmax(p.probabilities));
  p.label = polarity_from_class(p.class_index);
  return p;
}

Prediction predict(SentimentModel& model, const std::vector<std::string>& tokens,
                   const EmbeddingTable& table) {
  if (table.dim() != model.config().embedding_dim) {
    throw DataError("embedding table dimension " + std::to_string(table.dim()) +
                    " does not match model dimension " +
                    std::to_string(model.config().embedding_dim));
  }
  return predict(model, encode(table, tokens, model.config().padded_length));
}

double gradient_check(SentimentModel& model, const DocumentMatrix& input,
                      int target, double delta) {
  Rng unused(0);
  const auto t = static_cast<std::size_t>(target);
  auto loss_at = [&] {
    const Tensor2 logits = model.forward(input, Mode::Eval, unused);
    return softmax_cross_entropy(logits.values(), t).loss;
  };
  model.zero_grad();
  {
    const Tensor2 logits = model.forward(input, Mode::Eval, unused);
    const auto sx = softmax_cross_entropy(logits.values(), t);
    model.backward(Tensor2(1, kNumClasses, sx.grad));
  }
  double worst = 0.0;
  for (Parameter* p : model.parameters()) {
    const Tensor2 analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Real saved = p->value[i];
      p->value[i] = saved + delta;
      const double plus = loss_at();
      p->value[i] = saved - delta;
      const double minus = loss_at();
      p->value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * delta);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

std::string config_to_json(const ModelConfig& config) {
  return config_json(config).dump();
}

ModelConfig config_from_json(const std::string& text, ModelConfig base) {
  try {
    return config_from(json::parse(text), std::move(base));
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid model config: ") + e.what());
  }
}

void save_checkpoint(SentimentModel& model, const std::string& fingerprint,
                     const std::filesystem::path& path) {
  json weights = json::array();
  for (const Parameter* p : model.parameters()) {
    weights.push_back({{"name", p->name},
                       {"rows", p->value.rows()},
                       {"cols", p->value.cols()},
                       {"data", p->value.values()}});
  }
  const json doc{{"format", "colloq-checkpoint"},
                 {"format_version", kCheckpointVersion},
                 {"config", config_json(model.config())},
                 {"fingerprint", fingerprint},
                 {"weights", weights}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

std::unique_ptr<SentimentModel> load_checkpoint(
    const std::filesystem::path& path, const std::string& expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " +
                          e.what());
  }
  try {
    if (doc.value("format", "") != "colloq-checkpoint") {
      throw CheckpointError("not a checkpoint file: " + path.string());
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " +
                            std::to_string(version) + " (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    const auto fingerprint = doc.at("fingerprint").get<std::string>();
    if (!expected_fingerprint.empty() && fingerprint != expected_fingerprint) {
      throw CheckpointError("embedding fingerprint mismatch: checkpoint has " +
                            fingerprint + ", table has " + expected_fingerprint);
    }
    const ModelConfig config = config_from(doc.at("config"), ModelConfig{});
    auto model = build(config);
    const auto params = model->parameters();
    const auto& weights = doc.at("weights");
    if (weights.size() != params.size()) {
      throw CheckpointError("checkpoint has " + std::to_string(weights.size()) +
                            " tensors, model expects " +
                            std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& w = weights[i];
      Parameter& p = *params[i];
      if (w.at("name").get<std::string>() != p.name ||
          w.at("rows").get<std::size_t>() != p.value.rows() ||
          w.at("cols").get<std::size_t>() != p.value.cols()) {
        throw CheckpointError("tensor " + std::to_string(i) +
                              " does not match " + p.name + " " +
                              p.value.shape_string());
      }
      auto data = w.at("data").get<std::vector<Real>>();
      if (data.size() != p.value.size()) {
        throw CheckpointError("tensor " + p.name + " has wrong element count");
      }
      p.value = Tensor2(p.value.rows(), p.value.cols(), std::move(data));
    }
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " +
                          e.what());
  }
}

}  // namespace colloq
