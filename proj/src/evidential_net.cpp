#include "evfuse/evidential_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "evfuse/dirichlet.hpp"
#include "evfuse/error.hpp"
#include "evfuse/losses.hpp"
#include "evfuse/subjective_logic.hpp"

namespace evfuse::net {
namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> affine(const DenseLayer& layer, std::span<const double> x) {
  std::vector<double> y(layer.bias);
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* row = layer.weights.data() + o * layer.in;
    double acc = 0.0;
    for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * x[i];
    y[o] += acc;
  }
  return y;
}

DenseLayer init_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  DenseLayer layer{in, out, {}, {}};
  const double r = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-r, r);
  layer.weights.resize(in * out);
  for (double& w : layer.weights) w = dist(rng);
  layer.bias.resize(out);
  for (double& b : layer.bias) b = dist(rng);
  return layer;
}

std::vector<EvidenceHead> init_heads(const ModelConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<EvidenceHead> heads;
  for (std::size_t v = 0; v < cfg.num_views(); ++v) {
    std::vector<std::size_t> sizes{cfg.view_dims[v]};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(cfg.num_classes);
    std::optional<RbfLayer> rbf;
    std::size_t first = 0;
    if (cfg.head == HeadKind::kRbf) {
      // Centers spread over a unit-variance box, which matches standardized inputs.
      RbfLayer layer{sizes[0], sizes[1], {}};
      std::uniform_real_distribution<double> dist(-std::sqrt(3.0), std::sqrt(3.0));
      layer.centers.resize(layer.in * layer.units);
      for (double& c : layer.centers) c = dist(rng);
      rbf = std::move(layer);
      first = 1;
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = first; l + 1 < sizes.size(); ++l) {
      layers.push_back(init_dense(sizes[l], sizes[l + 1], rng));
    }
    heads.emplace_back(std::move(layers), std::move(rbf));
  }
  return heads;
}

}  // namespace

// ---------------------------------------------------------------------------

EvidenceHead::EvidenceHead(std::vector<DenseLayer> layers, std::optional<RbfLayer> rbf,
                           InputScaling scaling)
    : layers_(std::move(layers)), rbf_(std::move(rbf)) {
  if (layers_.empty()) throw ValidationError("EvidenceHead: no layers");
  if (rbf_) {
    if (rbf_->in == 0 || rbf_->units == 0 || rbf_->centers.size() != rbf_->in * rbf_->units) {
      throw ValidationError("EvidenceHead: Gaussian layer has inconsistent shape");
    }
    if (layers_.front().in != rbf_->units) {
      throw ValidationError("EvidenceHead: layer 0 input does not match the Gaussian layer");
    }
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.in == 0 || layer.out == 0 || layer.weights.size() != layer.in * layer.out ||
        layer.bias.size() != layer.out) {
      throw ValidationError("EvidenceHead: layer " + std::to_string(l) + " has inconsistent shape");
    }
    if (l > 0 && layers_[l - 1].out != layer.in) {
      throw ValidationError("EvidenceHead: layer " + std::to_string(l) +
                            " input does not match previous output");
    }
  }
  set_scaling(std::move(scaling));
}

void EvidenceHead::set_scaling(InputScaling scaling) {
  if (!scaling.identity()) {
    if (scaling.shift.size() != input_dim() || scaling.scale.size() != input_dim()) {
      throw ValidationError("EvidenceHead: input scaling has wrong dimension");
    }
    for (std::size_t i = 0; i < input_dim(); ++i) {
      if (!std::isfinite(scaling.shift[i]) || !std::isfinite(scaling.scale[i]) ||
          !(scaling.scale[i] > 0.0)) {
        throw ValidationError("EvidenceHead: input scale must be finite and > 0");
      }
    }
  } else if (!scaling.scale.empty()) {
    throw ValidationError("EvidenceHead: input scaling has a scale but no shift");
  }
  scaling_ = std::move(scaling);
}

std::size_t EvidenceHead::input_dim() const { return rbf_ ? rbf_->in : layers_.front().in; }
std::size_t EvidenceHead::output_dim() const { return layers_.back().out; }

std::size_t EvidenceHead::num_parameters() const noexcept {
  std::size_t n = rbf_ ? rbf_->num_parameters() : 0;
  for (const auto& l : layers_) n += l.num_parameters();
  return n;
}

std::vector<double> EvidenceHead::evidence(std::span<const double> features) const {
  Cache cache;
  return evidence(features, cache);
}

std::vector<double> EvidenceHead::evidence(std::span<const double> features, Cache& cache) const {
  cache.inputs.clear();
  cache.pre.clear();
  std::vector<double> x(features.begin(), features.end());
  if (!scaling_.identity()) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - scaling_.shift[i]) / scaling_.scale[i];
  }
  if (rbf_) {
    const double width2 = 2.0 * static_cast<double>(rbf_->in);
    std::vector<double> h(rbf_->units);
    for (std::size_t j = 0; j < rbf_->units; ++j) {
      const double* c = rbf_->centers.data() + j * rbf_->in;
      double d2 = 0.0;
      for (std::size_t i = 0; i < rbf_->in; ++i) d2 += (x[i] - c[i]) * (x[i] - c[i]);
      h[j] = std::exp(-d2 / width2);
    }
    cache.scaled = std::move(x);
    cache.rbf_out = h;
    x = std::move(h);
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    std::vector<double> z = affine(layers_[l], x);
    cache.inputs.push_back(std::move(x));
    const bool last = l + 1 == layers_.size();
    x.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) x[i] = last ? softplus(z[i]) : std::tanh(z[i]);
    cache.pre.push_back(std::move(z));
  }
  return x;
}

void EvidenceHead::backward(const Cache& cache, std::span<const double> evidence_grad,
                            std::span<double> grad) const {
  // Offsets of each layer's block inside `grad`.
  std::vector<std::size_t> offsets(layers_.size());
  std::size_t offset = rbf_ ? rbf_->num_parameters() : 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offsets[l] = offset;
    offset += layers_[l].num_parameters();
  }

  std::vector<double> upstream(evidence_grad.begin(), evidence_grad.end());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    const bool last = l + 1 == layers_.size();
    std::vector<double> dz(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double z = cache.pre[l][o];
      double slope;
      if (last) {
        slope = sigmoid(z);
      } else {
        const double t = std::tanh(z);
        slope = 1.0 - t * t;
      }
      dz[o] = upstream[o] * slope;
    }
    const std::vector<double>& input = cache.inputs[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + layer.weights.size();
    for (std::size_t o = 0; o < layer.out; ++o) {
      for (std::size_t i = 0; i < layer.in; ++i) gw[o * layer.in + i] += dz[o] * input[i];
      gb[o] += dz[o];
    }
    if (l == 0 && !rbf_) break;
    upstream.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* row = layer.weights.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) upstream[i] += row[i] * dz[o];
    }
  }
  if (!rbf_) return;
  // dh_j/dc_ji = h_j (x_i - c_ji) / in
  const double inv = 1.0 / static_cast<double>(rbf_->in);
  for (std::size_t j = 0; j < rbf_->units; ++j) {
    const double s = upstream[j] * cache.rbf_out[j] * inv;
    const double* c = rbf_->centers.data() + j * rbf_->in;
    for (std::size_t i = 0; i < rbf_->in; ++i) grad[j * rbf_->in + i] += s * (cache.scaled[i] - c[i]);
  }
}

// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
  if (num_classes < 2) throw ValidationError("ModelConfig: need at least 2 classes");
  if (view_dims.size() < 2) throw ValidationError("ModelConfig: need at least 2 views");
  for (std::size_t d : view_dims) {
    if (d == 0) throw ValidationError("ModelConfig: view dimensions must be >= 1");
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw ValidationError("ModelConfig: hidden layer sizes must be >= 1");
  }
  if (head == HeadKind::kRbf && hidden.empty()) {
    throw ValidationError("ModelConfig: a Gaussian head needs at least one hidden layer");
  }
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw ValidationError("ModelConfig: weight must be finite and > 0 (or 0 for K)");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("ModelConfig: learning rate must be finite and >= 0");
  }
  if (batch_size == 0) throw ValidationError("ModelConfig: batch size must be >= 1");
}

BaseRate compute_base_rate(std::span<const std::size_t> labels, std::size_t num_classes,
                           double weight) {
  if (labels.empty()) throw ValidationError("compute_base_rate: no labels");
  std::vector<double> counts(num_classes, 0.0);
  for (std::size_t y : labels) {
    if (y >= num_classes) {
      throw ValidationError("compute_base_rate: label " + std::to_string(y) + " out of range");
    }
    counts[y] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] == 0.0) {
      throw ValidationError("compute_base_rate: class " + std::to_string(k) +
                            " never occurs, a zero base rate is not supported");
    }
    counts[k] /= n;
  }
  return BaseRate(std::move(counts), weight > 0.0 ? weight : static_cast<double>(num_classes));
}

// ---------------------------------------------------------------------------

EvidentialModel::EvidentialModel(ModelConfig cfg, BaseRate base_rate)
    : EvidentialModel(cfg, base_rate, (cfg.validate(), init_heads(cfg))) {}

EvidentialModel::EvidentialModel(ModelConfig cfg, BaseRate base_rate,
                                 std::vector<EvidenceHead> heads)
    : config_(std::move(cfg)), base_rate_(std::move(base_rate)), heads_(std::move(heads)) {
  config_.validate();
  if (base_rate_.num_classes() != config_.num_classes) {
    throw ValidationError("EvidentialModel: base rate has wrong class count");
  }
  if (base_rate_.weight() != config_.resolved_weight()) {
    throw ValidationError("EvidentialModel: base-rate weight differs from the configured W");
  }
  if (heads_.size() != config_.num_views()) {
    throw ValidationError("EvidentialModel: need one head per view");
  }
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    if (heads_[v].layers().empty() || heads_[v].input_dim() != config_.view_dims[v] ||
        heads_[v].output_dim() != config_.num_classes) {
      throw ValidationError("EvidentialModel: head " + std::to_string(v) + " has wrong shape");
    }
    if (heads_[v].rbf().has_value() != (config_.head == HeadKind::kRbf)) {
      throw ValidationError("EvidentialModel: head " + std::to_string(v) +
                            " does not match the configured head kind");
    }
  }
}

void EvidentialModel::calibrate_inputs(const data::MultiViewDataset& train) {
  if (train.size() == 0) throw ValidationError("calibrate_inputs: empty dataset");
  const double n = static_cast<double>(train.size());
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    const std::size_t d = heads_[v].input_dim();
    if (train.view_dims().size() != heads_.size() || train.view_dims()[v] != d) {
      throw ValidationError("calibrate_inputs: dataset shape does not match the model");
    }
    InputScaling scaling{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& s : train.samples()) {
      for (std::size_t i = 0; i < d; ++i) scaling.shift[i] += s.views[v][i];
    }
    for (double& m : scaling.shift) m /= n;
    for (const auto& s : train.samples()) {
      for (std::size_t i = 0; i < d; ++i) {
        const double t = s.views[v][i] - scaling.shift[i];
        scaling.scale[i] += t * t;
      }
    }
    for (double& sd : scaling.scale) {
      sd = std::sqrt(sd / n);
      if (!(sd > 0.0)) sd = 1.0;
    }
    heads_[v].set_scaling(std::move(scaling));
  }
}

std::size_t EvidentialModel::num_parameters() const noexcept {
  std::size_t n = 0;
  for (const auto& h : heads_) n += h.num_parameters();
  return n;
}

std::vector<double> EvidentialModel::flat_parameters() const {
  std::vector<double> out;
  out.reserve(num_parameters());
  for (const auto& h : heads_) {
    if (h.rbf()) out.insert(out.end(), h.rbf()->centers.begin(), h.rbf()->centers.end());
    for (const auto& l : h.layers()) {
      out.insert(out.end(), l.weights.begin(), l.weights.end());
      out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
  }
  return out;
}

void EvidentialModel::set_flat_parameters(std::span<const double> params) {
  if (params.size() != num_parameters()) {
    throw ValidationError("set_flat_parameters: expected " + std::to_string(num_parameters()) +
                          " values, got " + std::to_string(params.size()));
  }
  std::size_t pos = 0;
  for (auto& h : heads_) {
    if (h.rbf()) {
      auto& centers = h.rbf()->centers;
      std::copy_n(params.begin() + pos, centers.size(), centers.begin());
      pos += centers.size();
    }
    for (auto& l : h.layers()) {
      std::copy_n(params.begin() + pos, l.weights.size(), l.weights.begin());
      pos += l.weights.size();
      std::copy_n(params.begin() + pos, l.bias.size(), l.bias.begin());
      pos += l.bias.size();
    }
  }
}

void EvidentialModel::check_sample(const data::MultiViewSample& sample) const {
  if (sample.views.size() != heads_.size()) {
    throw ValidationError("sample '" + sample.id + "' has " + std::to_string(sample.views.size()) +
                          " views, model expects " + std::to_string(heads_.size()));
  }
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    if (sample.views[v].size() != heads_[v].input_dim()) {
      throw ValidationError("sample '" + sample.id + "' view " + std::to_string(v) +
                            " has dimension " + std::to_string(sample.views[v].size()) +
                            ", model expects " + std::to_string(heads_[v].input_dim()));
    }
  }
}

ForwardResult EvidentialModel::forward(const data::MultiViewSample& sample) const {
  check_sample(sample);
  std::vector<EvidenceVector> evidences;
  std::vector<Opinion> opinions;
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    evidences.emplace_back(heads_[v].evidence(sample.views[v]));
    opinions.push_back(sl::opinion_from_evidence(evidences.back(), base_rate_));
  }
  Opinion combined = [&] {
    try {
      return sl::combine_views(opinions);
    } catch (const FusionError& e) {
      throw FusionError(std::string(e.what()) + " (sample '" + sample.id + "')", e.stage());
    }
  }();
  DirichletParams alpha = sl::dirichlet_from_opinion(combined, base_rate_);
  return ForwardResult{std::move(evidences), std::move(opinions), std::move(combined),
                       std::move(alpha)};
}

Prediction EvidentialModel::predict(const data::MultiViewSample& sample,
                                    const std::optional<BaseRate>& base_rate_override) const {
  ForwardResult fwd = forward(sample);
  if (!base_rate_override) {
    return Prediction{dir::predict_class(fwd.combined_alpha), fwd.combined.uncertainty(),
                      dir::expected_probabilities(fwd.combined_alpha)};
  }
  const BaseRate& rate = *base_rate_override;
  std::vector<Opinion> opinions;
  for (const auto& e : fwd.evidences) {
    opinions.push_back(sl::opinion_from_dirichlet(dir::rebase(e, rate), rate));
  }
  const Opinion combined = sl::combine_views(opinions);
  const DirichletParams alpha = sl::dirichlet_from_opinion(combined, rate);
  return Prediction{dir::predict_class(alpha), combined.uncertainty(),
                    dir::expected_probabilities(alpha)};
}

SampleGradient EvidentialModel::loss_and_grad(const data::MultiViewSample& sample,
                                              double lambda) const {
  check_sample(sample);
  SampleGradient out;
  std::vector<EvidenceHead::Cache> caches(heads_.size());
  std::vector<EvidenceVector> evidences;
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    evidences.emplace_back(heads_[v].evidence(sample.views[v], caches[v]));
  }
  std::vector<Opinion> opinions;
  for (const auto& e : evidences) opinions.push_back(sl::opinion_from_evidence(e, base_rate_));
  Opinion locals = opinions.front();
  for (std::size_t v = 1; v + 1 < opinions.size(); ++v) locals = sl::cbf_fuse(locals, opinions[v]);
  if (sl::bcf_normalizer(locals, opinions.back()) < loss::kNearConflict) {
    out.skipped = true;
    return out;
  }

  const loss::LossConfig cfg(lambda, base_rate_.prior());
  const loss::OverallGradient g = loss::overall_grad(evidences, base_rate_, sample.label, cfg);
  out.loss = g.loss;
  out.predicted_class = dir::predict_class(
      sl::dirichlet_from_opinion(sl::bcf_fuse(locals, opinions.back()), base_rate_));
  out.gradient.assign(num_parameters(), 0.0);
  std::size_t offset = 0;
  for (std::size_t v = 0; v < heads_.size(); ++v) {
    const std::size_t n = heads_[v].num_parameters();
    heads_[v].backward(caches[v], g.evidence_grads[v],
                       std::span<double>(out.gradient).subspan(offset, n));
    offset += n;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::pair<double, double> evaluate_loss(const EvidentialModel& model,
                                        const data::MultiViewDataset& ds, double lambda) {
  const loss::LossConfig cfg(lambda, model.base_rate().prior());
  double total = 0.0;
  std::size_t correct = 0;
  for (const auto& s : ds.samples()) {
    const ForwardResult fwd = model.forward(s);
    std::vector<DirichletParams> alphas;
    for (const auto& e : fwd.evidences) {
      alphas.push_back(sl::dirichlet_from_evidence(e, model.base_rate()));
    }
    total += loss::overall_loss(alphas, fwd.combined_alpha, s.label, cfg);
    if (dir::predict_class(fwd.combined_alpha) == s.label) ++correct;
  }
  const double n = static_cast<double>(ds.size());
  return {total / n, static_cast<double>(correct) / n};
}

namespace {

void check_dataset(const EvidentialModel& model, const data::MultiViewDataset& ds,
                   const char* name) {
  const ModelConfig& cfg = model.config();
  if (ds.num_classes() != cfg.num_classes ||
      !std::equal(ds.view_dims().begin(), ds.view_dims().end(), cfg.view_dims.begin(),
                  cfg.view_dims.end())) {
    throw ValidationError(std::string("fit: ") + name +
                          " dataset shape does not match the model configuration");
  }
}

// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace

TrainingReport fit(EvidentialModel& model, const data::MultiViewDataset& train,
                   const data::MultiViewDataset& valid,
                   const std::function<void(const EpochStats&)>& on_epoch) {
  check_dataset(model, train, "training");
  check_dataset(model, valid, "validation");
  const ModelConfig& cfg = model.config();
  if (cfg.standardize_inputs &&
      std::all_of(model.heads().begin(), model.heads().end(),
                  [](const EvidenceHead& h) { return h.scaling().identity(); })) {
    model.calibrate_inputs(train);
  }
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam adam(model.num_parameters(), cfg.learning_rate);
  std::vector<double> params = model.flat_parameters();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainingReport report;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    stats.lambda = loss::lambda_schedule(epoch, cfg.resolved_annealing_epochs());
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t used = 0;
    std::size_t correct = 0;
    std::vector<double> batch_grad(params.size());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      std::size_t batch_used = 0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& sample = train[order[i]];
        const SampleGradient g = model.loss_and_grad(sample, stats.lambda);
        if (g.skipped) {
          ++stats.skipped;
          continue;
        }
        if (!std::isfinite(g.loss)) {
          throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) +
                             ", sample '" + sample.id + "'");
        }
        loss_sum += g.loss;
        ++used;
        ++batch_used;
        if (g.predicted_class == sample.label) ++correct;
        for (std::size_t p = 0; p < batch_grad.size(); ++p) batch_grad[p] += g.gradient[p];
      }
      if (batch_used == 0) continue;
      for (double& x : batch_grad) x /= static_cast<double>(batch_used);
      adam.step(params, batch_grad);
      model.set_flat_parameters(params);
    }
    stats.train_loss = used > 0 ? loss_sum / static_cast<double>(used) : 0.0;
    stats.train_accuracy = used > 0 ? static_cast<double>(correct) / static_cast<double>(used) : 0.0;
    std::tie(stats.valid_loss, stats.valid_accuracy) = evaluate_loss(model, valid, stats.lambda);
    if (!std::isfinite(stats.valid_loss)) {
      throw NumericError("fit: non-finite validation loss at epoch " + std::to_string(epoch));
    }
    report.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return report;
}

}  // namespace evfuse::net
