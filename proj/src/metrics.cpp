#include "evfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evfuse/error.hpp"

namespace evfuse::metrics {

std::vector<CalibrationBin> calibration_bins(std::span<const EvalRecord> records,
                                             std::size_t num_bins) {
  if (num_bins == 0) throw ValidationError("calibration_bins: need at least one bin");
  if (records.empty()) throw ValidationError("calibration_bins: no records");
  std::vector<CalibrationBin> bins(num_bins);
  const double m = static_cast<double>(num_bins);
  for (std::size_t i = 0; i < num_bins; ++i) {
    bins[i].lower = static_cast<double>(i) / m;
    bins[i].upper = static_cast<double>(i + 1) / m;
  }
  std::vector<double> correct(num_bins, 0.0);
  std::vector<double> conf(num_bins, 0.0);
  for (const auto& r : records) {
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
      throw ValidationError("calibration_bins: confidence outside [0,1] for '" + r.id + "'");
    }
    // Smallest m with conf <= m/M, i.e. ceil(conf * M) - 1, clamped to bin 1.
    std::size_t idx = static_cast<std::size_t>(std::ceil(r.confidence * m));
    idx = std::clamp<std::size_t>(idx, 1, num_bins);
    // conf * M can round across a boundary; recheck against the edges.
    if (idx > 1 && r.confidence <= static_cast<double>(idx - 1) / m) --idx;
    if (idx < num_bins && r.confidence > static_cast<double>(idx) / m) ++idx;
    --idx;
    ++bins[idx].count;
    correct[idx] += r.predicted == r.label ? 1.0 : 0.0;
    conf[idx] += r.confidence;
  }
  for (std::size_t i = 0; i < num_bins; ++i) {
    if (bins[i].count == 0) continue;
    const double n = static_cast<double>(bins[i].count);
    bins[i].accuracy = correct[i] / n;
    bins[i].confidence = conf[i] / n;
  }
  return bins;
}

double ece(std::span<const EvalRecord> records, std::size_t num_bins) {
  const auto bins = calibration_bins(records, num_bins);
  const double n = static_cast<double>(records.size());
  double total = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;
    total += static_cast<double>(b.count) / n * std::abs(b.accuracy - b.confidence);
  }
  return total;
}

double accuracy(std::span<const EvalRecord> records) {
  if (records.empty()) throw ValidationError("accuracy: no records");
  const auto hits = std::count_if(records.begin(), records.end(),
                                  [](const EvalRecord& r) { return r.predicted == r.label; });
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double auc_binary(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("auc_binary: scores and labels differ in length");
  }
  // Rank-sum form with average ranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t) {
      const std::size_t label = labels[order[t]];
      if (label > 1) throw ValidationError("auc_binary: labels must be 0 or 1");
      if (label == 1) {
        positive_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ValidationError("auc_binary: both classes must be present");
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double predictive_entropy(std::span<const double> probs) {
  double sum = 0.0;
  double h = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("predictive_entropy: p outside [0,1]");
    sum += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (probs.empty() || std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("predictive_entropy: probabilities must sum to 1");
  }
  return h;
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw ValidationError("percentile: no values");
  if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("percentile: p must lie in [0,100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

OodResult ood_detect(std::span<const double> val_uncertainties,
                     std::span<const double> test_uncertainties, double percentile_p) {
  if (val_uncertainties.empty() || test_uncertainties.empty()) {
    throw ValidationError("ood_detect: both uncertainty pools must be nonempty");
  }
  OodResult out;
  std::vector<double> pool(val_uncertainties.begin(), val_uncertainties.end());
  pool.insert(pool.end(), test_uncertainties.begin(), test_uncertainties.end());
  const auto [mn, mx] = std::minmax_element(pool.begin(), pool.end());
  out.raw_min = *mn;
  out.raw_max = *mx;
  const double range = out.raw_max - out.raw_min;
  if (!(range > 0.0)) {
    throw NumericError("ood_detect: uncertainty pool is constant, min-max scaling is degenerate");
  }
  auto scale = [&](double u) { return (u - out.raw_min) / range; };
  for (double u : val_uncertainties) out.scaled_val.push_back(scale(u));
  for (double u : test_uncertainties) out.scaled_test.push_back(scale(u));
  for (double& u : pool) u = scale(u);
  out.threshold = percentile(pool, percentile_p);
  for (double s : out.scaled_test) out.flags.push_back(s > out.threshold);
  return out;
}

}  // namespace evfuse::metrics
