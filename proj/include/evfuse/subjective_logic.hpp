#pragma once

#include <span>
#include <vector>

#include "evfuse/types.hpp"

// Opinion algebra: the evidence <-> Dirichlet <-> opinion mappings and the
// two belief fusion operators used to combine views.
namespace evfuse::sl {

// alpha = e + a W.
DirichletParams dirichlet_from_evidence(const EvidenceVector& evidence, const BaseRate& base_rate);

// b_k = (alpha_k - a_k W) / S, u = W / S.
// Implied evidence below -1e-12 S is an error; smaller negative rounding
// residue is clamped to zero.
Opinion opinion_from_dirichlet(const DirichletParams& alpha, const BaseRate& base_rate);

// Inverse mapping: S = W / u, alpha = b S + a W. Rejects dogmatic opinions.
DirichletParams dirichlet_from_opinion(const Opinion& opinion, const BaseRate& base_rate);

// Shortcut for opinion_from_dirichlet(dirichlet_from_evidence(e, a), a).
// Note the result does not depend on the rates, only on W.
Opinion opinion_from_evidence(const EvidenceVector& evidence, const BaseRate& base_rate);

// e = b W / u. Rejects dogmatic opinions.
EvidenceVector evidence_from_opinion(const Opinion& opinion, const BaseRate& base_rate);

// p = b + a u.
std::vector<double> projected_probability(const Opinion& opinion, const BaseRate& base_rate);

// Cumulative belief fusion. Equivalent to adding evidence under a shared
// base rate. Throws FusionError when both operands are dogmatic.
Opinion cbf_fuse(const Opinion& m, const Opinion& n);

// Belief constraint fusion. Throws ConflictError when the normalisation
// factor C = 1 - sum_{i != j} b^m_i b^n_j is <= kConflictEpsilon.
inline constexpr double kConflictEpsilon = 1e-12;
Opinion bcf_fuse(const Opinion& m, const Opinion& n);

// Normalisation factor C of bcf_fuse.
double bcf_normalizer(const Opinion& m, const Opinion& n);

// (locals[0] + locals[1] + ... ) x global, with the CBF chain folded left
// to right. An empty `locals` is treated as the vacuous opinion.
// FusionError::stage() names the failing step ("cbf[i]" or "bcf").
Opinion combine_multiview(std::span<const Opinion> locals, const Opinion& global);

// Same rule over a full list of V >= 2 view opinions; the last one is the
// global view.
Opinion combine_views(std::span<const Opinion> views);

}  // namespace evfuse::sl
