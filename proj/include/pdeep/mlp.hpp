#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pdeep/flow_data.hpp"

namespace pdeep {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Lower clip applied to predictions before taking logarithms in the loss.
inline constexpr double kLossEpsilon = 1e-7;

/// Network shape and loss weighting. Hidden layers use relu, the single
/// output unit uses sigmoid.
struct MlpConfig {
  std::vector<std::size_t> layer_sizes{13, 20, 40, 60, 80, 40, 10, 1};
  double class_weight_normal = 4500.0;
  double class_weight_attack = 1.0;
  std::uint64_t init_seed = 0;

  std::size_t input_size() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
  // Throws std::invalid_argument listing the first violated invariant.
  void validate() const;

  // 20-40-60-80-40-10-1 hidden/output stack behind `inputs` input units.
  static MlpConfig deep_default(std::size_t inputs);
};

struct Hyperparameters {
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  double learning_rate = 0.01;

  void validate() const;
  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

class MlpModel {
 public:
  MlpModel(MlpConfig config, std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases);

  const MlpConfig& config() const noexcept { return config_; }
  std::size_t input_size() const noexcept { return config_.input_size(); }
  // Number of weight layers (layer_sizes.size() - 1).
  std::size_t depth() const noexcept { return weights_.size(); }

  // Shape (size_k, size_{k+1}).
  const Eigen::MatrixXd& weights(std::size_t k) const { return weights_.at(k); }
  const Eigen::VectorXd& bias(std::size_t k) const { return biases_.at(k); }
  Eigen::MatrixXd& weights(std::size_t k) { return weights_.at(k); }
  Eigen::VectorXd& bias(std::size_t k) { return biases_.at(k); }

  // One score per row of `inputs` (rows x input_size).
  Eigen::VectorXd forward_batch(const Eigen::Ref<const RowMatrix>& inputs) const;

  friend bool operator==(const MlpModel& a, const MlpModel& b);

 private:
  MlpConfig config_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Logistic function saturating at the doubles adjacent to 0 and 1, so the
// result stays strictly inside (0, 1) for every finite argument.
double sigmoid(double z);

double glorot_bound(std::size_t fan_in, std::size_t fan_out);

MlpModel init_model(const MlpConfig& config);

double forward(const MlpModel& model, std::span<const double> features);

// C = -(1/m) sum[w1 y log p + w0 (1 - y) log(1 - p)], p clipped to
// [kLossEpsilon, 1 - kLossEpsilon].
double weighted_logistic_loss(std::span<const FlowLabel> labels, std::span<const double> predictions,
                              double w0, double w1);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;
};

// Exact gradient of the weighted loss over one batch. `features` is
// row-major, labels.size() rows.
Gradients gradients(const MlpModel& model, std::span<const double> features,
                    std::span<const FlowLabel> labels);

struct TrainResult {
  MlpModel model;
  // Loss on the whole training set before the first step.
  double initial_loss = 0.0;
  // Per epoch: size-weighted mean of the mini-batch losses seen that epoch.
  std::vector<double> epoch_losses;
};

// Plain mini-batch gradient descent. Rows are put in a canonical order
// before the seeded shuffle, so the outcome depends on the record multiset,
// the seeds and `hp` only. The last partial batch is kept.
TrainResult train(const MlpModel& model, const FlowDataset& train_set, const Hyperparameters& hp,
                  std::uint64_t shuffle_seed);

std::vector<double> predict_batch(const MlpModel& model, const FlowDataset& dataset);

// Decimal text persistence. Values are written in shortest round-trip form.
std::string model_to_text(const MlpModel& model);
MlpModel model_from_text(std::string_view text);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace pdeep
