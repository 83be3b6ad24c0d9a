#pragma once

#include <cstddef>
#include <vector>

#include "evfuse/types.hpp"

namespace evfuse::dir {

// S = sum_k alpha_k.
double strength(const DirichletParams& p);

// E[mu] = alpha / S.
std::vector<double> expected_probabilities(const DirichletParams& p);

// argmax_k E[mu_k]; ties go to the smallest index.
std::size_t predict_class(const DirichletParams& p);

// KL[Dir(p) || Dir(q)] in closed form. Rounding residue below zero is
// clamped to 0.
double kl_dirichlet(const DirichletParams& p, const DirichletParams& q);

// Re-anchor evidence on a different base rate: alpha = e + a' W.
// Used for test-time adaptation to a known or estimated class mix.
DirichletParams rebase(const EvidenceVector& evidence, const BaseRate& new_base_rate);

// e = alpha - a W, with rounding residue below zero clamped to 0.
EvidenceVector evidence_from_dirichlet(const DirichletParams& p, const BaseRate& base_rate);

}  // namespace evfuse::dir
