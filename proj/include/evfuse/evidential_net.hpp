#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "evfuse/data.hpp"
#include "evfuse/types.hpp"

namespace evfuse::net {

// Fully connected layer, weights stored row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t num_parameters() const noexcept { return weights.size() + bias.size(); }
};

// Gaussian units h_j = exp(-|x - c_j|^2 / (2 in)), centers stored row-major
// (units x in). Activations decay to zero away from the centers, so the
// evidence of a head built on them falls back to the output bias far from
// the training data.
struct RbfLayer {
  std::size_t in = 0;
  std::size_t units = 0;
  std::vector<double> centers;

  std::size_t num_parameters() const noexcept { return centers.size(); }
};

// Fixed per-feature standardization (x - shift) / scale applied before the
// first layer. Empty means identity.
struct InputScaling {
  std::vector<double> shift;
  std::vector<double> scale;

  bool identity() const noexcept { return shift.empty(); }
};

// Feedforward map from one view's features to K nonnegative evidence values:
// optional input scaling, optional Gaussian layer, tanh hidden layers and a
// softplus output layer.
class EvidenceHead {
 public:
  EvidenceHead() = default;
  explicit EvidenceHead(std::vector<DenseLayer> layers, std::optional<RbfLayer> rbf = std::nullopt,
                        InputScaling scaling = {});

  std::span<const DenseLayer> layers() const noexcept { return layers_; }
  std::span<DenseLayer> layers() noexcept { return layers_; }
  const std::optional<RbfLayer>& rbf() const noexcept { return rbf_; }
  std::optional<RbfLayer>& rbf() noexcept { return rbf_; }
  const InputScaling& scaling() const noexcept { return scaling_; }
  void set_scaling(InputScaling scaling);
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  // Trainable parameters: Gaussian centers, then each dense layer's weights
  // and bias. The input scaling is not trained.
  std::size_t num_parameters() const noexcept;

  std::vector<double> evidence(std::span<const double> features) const;

  // Activations kept for the backward pass: inputs[l] feeds dense layer l,
  // pre[l] is its affine output.
  struct Cache {
    std::vector<double> scaled;
    std::vector<double> rbf_out;
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> pre;
  };
  std::vector<double> evidence(std::span<const double> features, Cache& cache) const;

  // Accumulates dL/d(parameters) into `grad` (flat, in num_parameters()
  // order) given dL/d(evidence).
  void backward(const Cache& cache, std::span<const double> evidence_grad,
                std::span<double> grad) const;

 private:
  std::vector<DenseLayer> layers_;
  std::optional<RbfLayer> rbf_;
  InputScaling scaling_;
};

enum class BaseRatePolicy { kTrainFrequencies, kUniform };

// kDense: hidden layers are all tanh. kRbf: the first hidden layer is
// Gaussian (RbfLayer), any further ones tanh.
enum class HeadKind { kDense, kRbf };

struct ModelConfig {
  std::size_t num_classes = 2;
  std::vector<std::size_t> view_dims;  // one entry per view, V >= 2
  double weight = 0.0;                 // W; 0 means "use K"
  std::vector<std::size_t> hidden = {32};
  HeadKind head = HeadKind::kDense;
  bool standardize_inputs = false;     // fit() learns InputScaling from the training set
  double learning_rate = 1e-4;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::size_t annealing_epochs = 0;    // 0 means "use epochs"
  std::uint64_t seed = 0;
  BaseRatePolicy base_rate_policy = BaseRatePolicy::kTrainFrequencies;

  std::size_t num_views() const noexcept { return view_dims.size(); }
  double resolved_weight() const noexcept {
    return weight > 0.0 ? weight : static_cast<double>(num_classes);
  }
  std::size_t resolved_annealing_epochs() const noexcept {
    return annealing_epochs > 0 ? annealing_epochs : epochs;
  }
  void validate() const;
};

// a_k = N_k / N. Every class must occur. W defaults to K.
BaseRate compute_base_rate(std::span<const std::size_t> labels, std::size_t num_classes,
                           double weight = 0.0);

struct ForwardResult {
  std::vector<EvidenceVector> evidences;
  std::vector<Opinion> view_opinions;
  Opinion combined;
  DirichletParams combined_alpha;
};

struct Prediction {
  std::size_t predicted_class = 0;
  double uncertainty = 1.0;
  std::vector<double> probabilities;
};

struct SampleGradient {
  double loss = 0.0;
  bool skipped = false;          // near-conflict fusion, no gradient
  std::size_t predicted_class = 0;
  std::vector<double> gradient;  // flat, same order as flat_parameters()
};

class EvidentialModel {
 public:
  // Heads initialised uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from cfg.seed.
  EvidentialModel(ModelConfig cfg, BaseRate base_rate);
  // Restores a model with explicit heads (checkpoint loading).
  EvidentialModel(ModelConfig cfg, BaseRate base_rate, std::vector<EvidenceHead> heads);

  const ModelConfig& config() const noexcept { return config_; }
  const BaseRate& base_rate() const noexcept { return base_rate_; }
  std::span<const EvidenceHead> heads() const noexcept { return heads_; }

  // Sets every head's InputScaling to the training-set mean and standard
  // deviation of its view (a zero deviation becomes 1).
  void calibrate_inputs(const data::MultiViewDataset& train);

  std::size_t num_parameters() const noexcept;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> params);

  // Views 0..V-2 are local (CBF), view V-1 is global (BCF).
  ForwardResult forward(const data::MultiViewSample& sample) const;

  // With an override the evidence is re-anchored on the new base rate before
  // the combined Dirichlet is formed.
  Prediction predict(const data::MultiViewSample& sample,
                     const std::optional<BaseRate>& base_rate_override = std::nullopt) const;

  // Overall loss at balance factor `lambda` and its gradient with respect to
  // every parameter.
  SampleGradient loss_and_grad(const data::MultiViewSample& sample, double lambda) const;

 private:
  void check_sample(const data::MultiViewSample& sample) const;

  ModelConfig config_;
  BaseRate base_rate_;
  std::vector<EvidenceHead> heads_;
};

struct EpochStats {
  std::size_t epoch = 0;
  double lambda = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
  std::size_t skipped = 0;  // samples dropped for near-conflict fusion
};

struct TrainingReport {
  std::vector<EpochStats> epochs;
};

// Mean overall loss and accuracy of `model` on `ds` at balance factor lambda.
std::pair<double, double> evaluate_loss(const EvidentialModel& model,
                                        const data::MultiViewDataset& ds, double lambda);

// Mini-batch Adam on the overall evidential loss with lambda annealed per
// epoch. With cfg.standardize_inputs, heads whose scaling is still identity
// are calibrated on `train` first. Throws NumericError if the loss becomes non-finite. `on_epoch` is
// called after each epoch (progress logging).
TrainingReport fit(EvidentialModel& model, const data::MultiViewDataset& train,
                   const data::MultiViewDataset& valid,
                   const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace evfuse::net
