#include "evfuse/dirichlet.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "evfuse/error.hpp"
#include "evfuse/specfun.hpp"
#include "evfuse/subjective_logic.hpp"

namespace evfuse::dir {

double strength(const DirichletParams& p) {
  return std::accumulate(p.alpha().begin(), p.alpha().end(), 0.0);
}

std::vector<double> expected_probabilities(const DirichletParams& p) {
  const double s = strength(p);
  std::vector<double> mu(p.alpha().begin(), p.alpha().end());
  for (double& v : mu) v /= s;
  return mu;
}

std::size_t predict_class(const DirichletParams& p) {
  // alpha_k / S has the same argmax as alpha_k; max_element keeps the first.
  const auto alpha = p.alpha();
  return static_cast<std::size_t>(std::max_element(alpha.begin(), alpha.end()) - alpha.begin());
}

double kl_dirichlet(const DirichletParams& p, const DirichletParams& q) {
  if (p.num_classes() != q.num_classes()) {
    throw ValidationError("kl_dirichlet: dimension mismatch (" + std::to_string(p.num_classes()) +
                          " vs " + std::to_string(q.num_classes()) + ")");
  }
  using specfun::digamma;
  using specfun::ln_gamma;
  const double sp = strength(p);
  const double sq = strength(q);
  const double psi_sp = digamma(sp);
  double kl = ln_gamma(sp) - ln_gamma(sq);
  for (std::size_t k = 0; k < p.num_classes(); ++k) {
    kl += ln_gamma(q[k]) - ln_gamma(p[k]) + (p[k] - q[k]) * (digamma(p[k]) - psi_sp);
  }
  return std::max(kl, 0.0);
}

DirichletParams rebase(const EvidenceVector& evidence, const BaseRate& new_base_rate) {
  return sl::dirichlet_from_evidence(evidence, new_base_rate);
}

EvidenceVector evidence_from_dirichlet(const DirichletParams& p, const BaseRate& base_rate) {
  if (p.num_classes() != base_rate.num_classes()) {
    throw ValidationError("evidence_from_dirichlet: dimension mismatch");
  }
  std::vector<double> e(p.num_classes());
  for (std::size_t k = 0; k < e.size(); ++k) {
    e[k] = std::max(p[k] - base_rate[k] * base_rate.weight(), 0.0);
  }
  return EvidenceVector(std::move(e));
}

}  // namespace evfuse::dir
