#include "pdeep/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pdeep/error.hpp"
#include "pdeep/random.hpp"
#include "text_io.hpp"

namespace pdeep {

// ---------------------------------------------------------------------------
// Configuration

void MlpConfig::validate() const {
  if (layer_sizes.size() < 3) {
    throw std::invalid_argument("layer_sizes needs an input layer, at least one hidden layer and the output");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("layer sizes must be positive");
  }
  if (layer_sizes.back() != 1) throw std::invalid_argument("the output layer must have exactly one unit");
  if (!(class_weight_normal > 0.0) || !std::isfinite(class_weight_normal)) {
    throw std::invalid_argument("class_weight_normal must be positive");
  }
  if (!(class_weight_attack > 0.0) || !std::isfinite(class_weight_attack)) {
    throw std::invalid_argument("class_weight_attack must be positive");
  }
}

MlpConfig MlpConfig::deep_default(std::size_t inputs) {
  MlpConfig c;
  c.layer_sizes = {inputs, 20, 40, 60, 80, 40, 10, 1};
  return c;
}

void Hyperparameters::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate < 1.0)) {
    throw std::invalid_argument("learning_rate must lie strictly between 0 and 1");
  }
}

// ---------------------------------------------------------------------------
// Model

MlpModel::MlpModel(MlpConfig config, std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases)
    : config_(std::move(config)), weights_(std::move(weights)), biases_(std::move(biases)) {
  const auto& sizes = config_.layer_sizes;
  if (sizes.size() < 2 || sizes.back() != 1) throw std::invalid_argument("model needs >= 2 layers ending in 1 unit");
  if (weights_.size() != sizes.size() - 1 || biases_.size() != sizes.size() - 1) {
    throw std::invalid_argument("weight/bias count does not match layer_sizes");
  }
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k].rows() != static_cast<Eigen::Index>(sizes[k]) ||
        weights_[k].cols() != static_cast<Eigen::Index>(sizes[k + 1]) ||
        biases_[k].size() != static_cast<Eigen::Index>(sizes[k + 1])) {
      throw std::invalid_argument("layer " + std::to_string(k) + " has the wrong shape");
    }
  }
}

bool operator==(const MlpModel& a, const MlpModel& b) {
  if (a.config_.layer_sizes != b.config_.layer_sizes) return false;
  for (std::size_t k = 0; k < a.weights_.size(); ++k) {
    if (a.weights_[k] != b.weights_[k] || a.biases_[k] != b.biases_[k]) return false;
  }
  return a.config_.class_weight_normal == b.config_.class_weight_normal &&
         a.config_.class_weight_attack == b.config_.class_weight_attack;
}

double sigmoid(double z) {
  constexpr double kLow = std::numeric_limits<double>::denorm_min();
  constexpr double kHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  if (std::isnan(p)) return p;
  return std::clamp(p, kLow, kHigh);
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

MlpModel init_model(const MlpConfig& config) {
  config.validate();
  Rng rng(config.init_seed);
  const auto& sizes = config.layer_sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const double bound = glorot_bound(sizes[k], sizes[k + 1]);
    Eigen::MatrixXd w(sizes[k], sizes[k + 1]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    weights.push_back(std::move(w));
    biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[k + 1])));
  }
  return MlpModel(config, std::move(weights), std::move(biases));
}

namespace {

// Activations of every layer for one batch; acts[0] is the input.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> acts;
};

void run_forward(const MlpModel& model, ForwardPass& pass) {
  const std::size_t depth = model.depth();
  pass.acts.resize(depth + 1);
  for (std::size_t k = 0; k < depth; ++k) {
    Eigen::MatrixXd& out = pass.acts[k + 1];
    out.noalias() = pass.acts[k] * model.weights(k);
    out.rowwise() += model.bias(k).transpose();
    if (k + 1 < depth) {
      out = out.cwiseMax(0.0);
    } else {
      out = out.unaryExpr([](double z) { return sigmoid(z); });
    }
  }
}

inline double loss_term(FlowLabel y, double p, double w0, double w1) {
  const double q = std::clamp(p, kLossEpsilon, 1.0 - kLossEpsilon);
  return y == FlowLabel::Attack ? -w1 * std::log(q) : -w0 * std::log(1.0 - q);
}

// Fills `grads` and returns the batch loss. The derivative of the clip is 0
// outside [eps, 1 - eps]; relu'(0) is 0.
double run_backward(const MlpModel& model, const ForwardPass& pass, std::span<const FlowLabel> labels,
                    Gradients& grads, Eigen::MatrixXd& delta, Eigen::MatrixXd& scratch) {
  const std::size_t depth = model.depth();
  const double w0 = model.config().class_weight_normal;
  const double w1 = model.config().class_weight_attack;
  const auto m = static_cast<Eigen::Index>(labels.size());
  const double inv_m = 1.0 / static_cast<double>(m);

  const Eigen::MatrixXd& out = pass.acts[depth];
  delta.resize(m, 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double p = out(i, 0);
    const FlowLabel y = labels[static_cast<std::size_t>(i)];
    loss += loss_term(y, p, w0, w1);
    const bool clipped = p < kLossEpsilon || p > 1.0 - kLossEpsilon;
    double d = 0.0;
    if (!clipped) d = y == FlowLabel::Attack ? -w1 * (1.0 - p) : w0 * p;
    delta(i, 0) = d * inv_m;
  }
  loss *= inv_m;

  grads.weights.resize(depth);
  grads.biases.resize(depth);
  for (std::size_t k = depth; k-- > 0;) {
    grads.weights[k].noalias() = pass.acts[k].transpose() * delta;
    grads.biases[k] = delta.colwise().sum().transpose();
    if (k > 0) {
      scratch.noalias() = delta * model.weights(k).transpose();
      delta = scratch.cwiseProduct((pass.acts[k].array() > 0.0).cast<double>().matrix());
    }
  }
  grads.loss = loss;
  return loss;
}

void check_width(const MlpModel& model, std::size_t width) {
  if (width != model.input_size()) {
    throw DataError("feature count " + std::to_string(width) + " does not match model input size " +
                    std::to_string(model.input_size()));
  }
}

}  // namespace

Eigen::VectorXd MlpModel::forward_batch(const Eigen::Ref<const RowMatrix>& inputs) const {
  if (inputs.cols() != static_cast<Eigen::Index>(input_size())) {
    throw DataError("input width does not match model input size");
  }
  ForwardPass pass;
  pass.acts.resize(1);
  pass.acts[0] = inputs;
  run_forward(*this, pass);
  return pass.acts.back().col(0);
}

double forward(const MlpModel& model, std::span<const double> features) {
  check_width(model, features.size());
  for (double v : features) {
    if (!std::isfinite(v)) throw DataError("non-finite input feature");
  }
  Eigen::Map<const RowMatrix> row(features.data(), 1, static_cast<Eigen::Index>(features.size()));
  return model.forward_batch(row)(0);
}

double weighted_logistic_loss(std::span<const FlowLabel> labels, std::span<const double> predictions,
                              double w0, double w1) {
  if (labels.empty()) throw std::invalid_argument("loss of an empty batch");
  if (labels.size() != predictions.size()) throw std::invalid_argument("labels and predictions differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += loss_term(labels[i], predictions[i], w0, w1);
  return sum / static_cast<double>(labels.size());
}

Gradients gradients(const MlpModel& model, std::span<const double> features, std::span<const FlowLabel> labels) {
  if (labels.empty()) throw std::invalid_argument("gradient of an empty batch");
  if (features.size() != labels.size() * model.input_size()) {
    throw DataError("batch features do not match labels x model input size");
  }
  ForwardPass pass;
  pass.acts.resize(1);
  pass.acts[0] = Eigen::Map<const RowMatrix>(features.data(), static_cast<Eigen::Index>(labels.size()),
                                             static_cast<Eigen::Index>(model.input_size()));
  run_forward(model, pass);
  Gradients g;
  Eigen::MatrixXd delta, scratch;
  run_backward(model, pass, labels, g, delta, scratch);
  return g;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const MlpModel& model, const FlowDataset& train_set, const Hyperparameters& hp,
                  std::uint64_t shuffle_seed) {
  hp.validate();
  check_width(model, train_set.feature_count());
  const std::size_t n = train_set.size();
  if (n == 0) throw DataError("training set is empty");
  if (hp.batch_size > n) {
    throw std::invalid_argument("batch_size " + std::to_string(hp.batch_size) + " exceeds training set size " +
                                std::to_string(n));
  }
  const std::size_t width = train_set.feature_count();

  // Canonical row order: lexicographic on (features, label).
  std::vector<std::size_t> canon(n);
  std::iota(canon.begin(), canon.end(), 0);
  std::sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
    auto fa = train_set.features(a);
    auto fb = train_set.features(b);
    const auto cmp = std::lexicographical_compare_three_way(fa.begin(), fa.end(), fb.begin(), fb.end());
    if (cmp != 0) return cmp < 0;
    return train_set.label(a) < train_set.label(b);
  });
  RowMatrix inputs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  std::vector<FlowLabel> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto f = train_set.features(canon[i]);
    std::copy(f.begin(), f.end(), inputs.row(static_cast<Eigen::Index>(i)).data());
    labels[i] = train_set.label(canon[i]);
  }

  TrainResult result{model, 0.0, {}};
  MlpModel& net = result.model;
  const auto initial = net.forward_batch(inputs);
  result.initial_loss = weighted_logistic_loss(labels, std::span(initial.data(), n),
                                               net.config().class_weight_normal, net.config().class_weight_attack);

  Rng rng(shuffle_seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  ForwardPass pass;
  pass.acts.resize(1);
  Gradients grads;
  Eigen::MatrixXd delta, scratch;
  std::vector<FlowLabel> batch_labels;
  const double lr = hp.learning_rate;

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += hp.batch_size) {
      const std::size_t m = std::min(hp.batch_size, n - start);
      Eigen::MatrixXd& x = pass.acts[0];
      x.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(width));
      batch_labels.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        x.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(order[start + i]));
        batch_labels[i] = labels[order[start + i]];
      }
      run_forward(net, pass);
      const double loss = run_backward(net, pass, batch_labels, grads, delta, scratch);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch offset " +
                           std::to_string(start) + " (learning_rate " + detail::format_double(lr) +
                           ", batch_size " + std::to_string(hp.batch_size) + ")");
      }
      epoch_loss += loss * static_cast<double>(m);
      for (std::size_t k = 0; k < net.depth(); ++k) {
        net.weights(k).noalias() -= lr * grads.weights[k];
        net.bias(k).noalias() -= lr * grads.biases[k];
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

std::vector<double> predict_batch(const MlpModel& model, const FlowDataset& dataset) {
  check_width(model, dataset.feature_count());
  std::vector<double> scores(dataset.size());
  constexpr std::size_t kChunk = 4096;
  const std::size_t width = dataset.feature_count();
  for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
    const std::size_t m = std::min(kChunk, dataset.size() - start);
    Eigen::Map<const RowMatrix> chunk(dataset.values().data() + start * width, static_cast<Eigen::Index>(m),
                                      static_cast<Eigen::Index>(width));
    const Eigen::VectorXd out = model.forward_batch(chunk);
    std::copy(out.data(), out.data() + m, scores.begin() + static_cast<std::ptrdiff_t>(start));
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Persistence

std::string model_to_text(const MlpModel& model) {
  using detail::format_double;
  const MlpConfig& c = model.config();
  std::ostringstream out;
  out << "pdeep-mlp 1\n";
  out << "layers " << c.layer_sizes.size();
  for (std::size_t s : c.layer_sizes) out << ' ' << s;
  out << "\nhidden_activation relu\noutput_activation sigmoid\n";
  out << "class_weight_normal " << format_double(c.class_weight_normal) << '\n';
  out << "class_weight_attack " << format_double(c.class_weight_attack) << '\n';
  out << "init_seed " << c.init_seed << '\n';
  for (std::size_t k = 0; k < model.depth(); ++k) {
    const auto& w = model.weights(k);
    out << "weights " << k << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index col = 0; col < w.cols(); ++col) out << (col ? " " : "") << format_double(w(r, col));
      out << '\n';
    }
    const auto& b = model.bias(k);
    out << "bias " << k << ' ' << b.size() << '\n';
    for (Eigen::Index i = 0; i < b.size(); ++i) out << (i ? " " : "") << format_double(b(i));
    out << '\n';
  }
  out << "end\n";
  return out.str();
}

MlpModel model_from_text(std::string_view text) {
  detail::TokenReader in(text);
  in.expect("pdeep-mlp");
  if (in.next_uint() != 1) throw DataError("unsupported model format version");
  MlpConfig c;
  in.expect("layers");
  const auto count = in.next_uint();
  c.layer_sizes.clear();
  for (std::uint64_t i = 0; i < count; ++i) c.layer_sizes.push_back(in.next_uint());
  in.expect("hidden_activation");
  in.expect("relu");
  in.expect("output_activation");
  in.expect("sigmoid");
  in.expect("class_weight_normal");
  c.class_weight_normal = in.next_double();
  in.expect("class_weight_attack");
  c.class_weight_attack = in.next_double();
  in.expect("init_seed");
  c.init_seed = in.next_uint();
  if (c.layer_sizes.size() < 2) throw DataError("model text: too few layers");

  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  for (std::size_t k = 0; k + 1 < c.layer_sizes.size(); ++k) {
    in.expect("weights");
    if (in.next_uint() != k) throw DataError("model text: layers out of order");
    const auto rows = in.next_uint();
    const auto cols = in.next_uint();
    if (rows != c.layer_sizes[k] || cols != c.layer_sizes[k + 1]) throw DataError("model text: weight shape mismatch");
    Eigen::MatrixXd w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index col = 0; col < w.cols(); ++col) w(r, col) = in.next_double();
    }
    in.expect("bias");
    if (in.next_uint() != k || in.next_uint() != cols) throw DataError("model text: bias shape mismatch");
    Eigen::VectorXd b(static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = in.next_double();
    weights.push_back(std::move(w));
    biases.push_back(std::move(b));
  }
  in.expect("end");
  try {
    return MlpModel(std::move(c), std::move(weights), std::move(biases));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model text: ") + e.what());
  }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << model_to_text(model);
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_text(buf.str());
}

}  // namespace pdeep
