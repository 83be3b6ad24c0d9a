#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace evfuse {

// Tolerance for the u + sum(b) = 1 and sum(a) = 1 constraints.
inline constexpr double kMassTolerance = 1e-9;

// Concentration parameters of a Dirichlet distribution over K classes.
// Invariant: K >= 2, every alpha_k finite and > 0.
class DirichletParams {
 public:
  explicit DirichletParams(std::vector<double> alpha);

  std::span<const double> alpha() const noexcept { return alpha_; }
  double operator[](std::size_t k) const { return alpha_[k]; }
  std::size_t num_classes() const noexcept { return alpha_.size(); }

  friend bool operator==(const DirichletParams&, const DirichletParams&) = default;

 private:
  std::vector<double> alpha_;
};

// Nonnegative, finite per-class evidence produced by a view.
class EvidenceVector {
 public:
  explicit EvidenceVector(std::vector<double> evidence);

  std::span<const double> values() const noexcept { return evidence_; }
  double operator[](std::size_t k) const { return evidence_[k]; }
  std::size_t num_classes() const noexcept { return evidence_.size(); }
  double total() const noexcept;

  friend bool operator==(const EvidenceVector&, const EvidenceVector&) = default;

 private:
  std::vector<double> evidence_;
};

// Prior class proportions a together with their weight W.
// Invariant: every a_k > 0, sum a_k = 1, W > 0.
class BaseRate {
 public:
  BaseRate(std::vector<double> rates, double weight);

  // a_k = 1/K with the conventional weight W = K.
  static BaseRate uniform(std::size_t num_classes);
  static BaseRate uniform(std::size_t num_classes, double weight);

  std::span<const double> rates() const noexcept { return rates_; }
  double operator[](std::size_t k) const { return rates_[k]; }
  double weight() const noexcept { return weight_; }
  std::size_t num_classes() const noexcept { return rates_.size(); }

  // Non-evidence prior beta = a * W.
  DirichletParams prior() const;

  friend bool operator==(const BaseRate&, const BaseRate&) = default;

 private:
  std::vector<double> rates_;
  double weight_;
};

// Subjective opinion: belief mass per class plus uncertainty mass.
// Invariant: K >= 2, b_k and u in [0,1], u + sum b_k = 1 (within 1e-9).
class Opinion {
 public:
  Opinion(std::vector<double> beliefs, double uncertainty);

  // No evidence at all: b = 0, u = 1.
  static Opinion vacuous(std::size_t num_classes);

  std::span<const double> beliefs() const noexcept { return beliefs_; }
  double belief(std::size_t k) const { return beliefs_[k]; }
  double uncertainty() const noexcept { return uncertainty_; }
  std::size_t num_classes() const noexcept { return beliefs_.size(); }
  bool is_dogmatic() const noexcept { return uncertainty_ == 0.0; }

  friend bool operator==(const Opinion&, const Opinion&) = default;

 private:
  std::vector<double> beliefs_;
  double uncertainty_;
};

}  // namespace evfuse
