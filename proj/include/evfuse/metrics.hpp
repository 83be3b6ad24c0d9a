#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace evfuse::metrics {

struct EvalRecord {
  std::size_t predicted = 0;
  double confidence = 0.0;   // probability of the predicted class
  double uncertainty = 0.0;  // combined opinion uncertainty u
  std::size_t label = 0;
  std::string id;
};

struct CalibrationBin {
  double lower = 0.0;  // bin covers (lower, upper]
  double upper = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

// M equal-width bins over (m-1)/M < conf <= m/M; confidence 0 lands in bin 1.
std::vector<CalibrationBin> calibration_bins(std::span<const EvalRecord> records,
                                             std::size_t num_bins);

// sum_m |D_m|/N * |acc(D_m) - conf(D_m)|, empty bins contribute nothing.
double ece(std::span<const EvalRecord> records, std::size_t num_bins);

double accuracy(std::span<const EvalRecord> records);

// Mann-Whitney AUC of positive-class scores, ties count one half.
double auc_binary(std::span<const double> scores, std::span<const std::size_t> labels);

// -sum p ln p with 0 ln 0 = 0.
double predictive_entropy(std::span<const double> probs);

// Linear-interpolation percentile (p in [0,100]) of unsorted values.
double percentile(std::span<const double> values, double p);

struct OodResult {
  double threshold = 0.0;            // on the min-max scaled axis
  std::vector<double> scaled_val;
  std::vector<double> scaled_test;
  std::vector<bool> flags;           // per test sample: scaled > threshold
  double raw_min = 0.0;
  double raw_max = 0.0;
};

// Pools validation and test uncertainties, min-max scales the pool to
// [0,1] and thresholds at the given percentile of the pooled scaled values.
OodResult ood_detect(std::span<const double> val_uncertainties,
                     std::span<const double> test_uncertainties, double percentile_p = 50.0);

}  // namespace evfuse::metrics
