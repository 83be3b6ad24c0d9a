#include "evfuse/types.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "evfuse/error.hpp"

namespace evfuse {
namespace {

void require_classes(std::size_t k, const char* what) {
  if (k < 2) {
    throw ValidationError(std::string(what) + ": need at least 2 classes, got " +
                          std::to_string(k));
  }
}

}  // namespace

DirichletParams::DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  require_classes(alpha_.size(), "DirichletParams");
  for (std::size_t k = 0; k < alpha_.size(); ++k) {
    if (!std::isfinite(alpha_[k]) || alpha_[k] <= 0.0) {
      throw ValidationError("DirichletParams: alpha[" + std::to_string(k) +
                            "] must be finite and > 0, got " + std::to_string(alpha_[k]));
    }
  }
}

EvidenceVector::EvidenceVector(std::vector<double> evidence) : evidence_(std::move(evidence)) {
  require_classes(evidence_.size(), "EvidenceVector");
  for (std::size_t k = 0; k < evidence_.size(); ++k) {
    if (!std::isfinite(evidence_[k]) || evidence_[k] < 0.0) {
      throw ValidationError("EvidenceVector: evidence[" + std::to_string(k) +
                            "] must be finite and >= 0, got " + std::to_string(evidence_[k]));
    }
  }
}

double EvidenceVector::total() const noexcept {
  return std::accumulate(evidence_.begin(), evidence_.end(), 0.0);
}

BaseRate::BaseRate(std::vector<double> rates, double weight)
    : rates_(std::move(rates)), weight_(weight) {
  require_classes(rates_.size(), "BaseRate");
  if (!std::isfinite(weight_) || weight_ <= 0.0) {
    throw ValidationError("BaseRate: weight must be finite and > 0, got " +
                          std::to_string(weight_));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < rates_.size(); ++k) {
    if (!std::isfinite(rates_[k]) || rates_[k] <= 0.0 || rates_[k] > 1.0) {
      throw ValidationError("BaseRate: rate[" + std::to_string(k) + "] must lie in (0,1], got " +
                            std::to_string(rates_[k]));
    }
    sum += rates_[k];
  }
  if (std::abs(sum - 1.0) > kMassTolerance) {
    throw ValidationError("BaseRate: rates must sum to 1, got " + std::to_string(sum));
  }
}

BaseRate BaseRate::uniform(std::size_t num_classes) {
  return uniform(num_classes, static_cast<double>(num_classes));
}

BaseRate BaseRate::uniform(std::size_t num_classes, double weight) {
  require_classes(num_classes, "BaseRate");
  return BaseRate(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)),
                  weight);
}

DirichletParams BaseRate::prior() const {
  std::vector<double> beta(rates_.size());
  for (std::size_t k = 0; k < rates_.size(); ++k) beta[k] = rates_[k] * weight_;
  return DirichletParams(std::move(beta));
}

Opinion::Opinion(std::vector<double> beliefs, double uncertainty)
    : beliefs_(std::move(beliefs)), uncertainty_(uncertainty) {
  require_classes(beliefs_.size(), "Opinion");
  // Rounding residue of a few ulps outside [0,1] is snapped back in.
  constexpr double kSnap = 1e-12;
  auto snap = [](double& v) {
    if (v < 0.0 && v >= -kSnap) v = 0.0;
    if (v > 1.0 && v <= 1.0 + kSnap) v = 1.0;
  };
  snap(uncertainty_);
  for (double& b : beliefs_) snap(b);
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!in_unit(uncertainty_)) {
    throw ValidationError("Opinion: uncertainty must lie in [0,1], got " +
                          std::to_string(uncertainty_));
  }
  double mass = uncertainty_;
  for (std::size_t k = 0; k < beliefs_.size(); ++k) {
    if (!in_unit(beliefs_[k])) {
      throw ValidationError("Opinion: belief[" + std::to_string(k) + "] must lie in [0,1], got " +
                            std::to_string(beliefs_[k]));
    }
    mass += beliefs_[k];
  }
  if (std::abs(mass - 1.0) > kMassTolerance) {
    throw ValidationError("Opinion: u + sum(b) must equal 1, got " + std::to_string(mass));
  }
}

Opinion Opinion::vacuous(std::size_t num_classes) {
  return Opinion(std::vector<double>(num_classes, 0.0), 1.0);
}

}  // namespace evfuse
