#include "evfuse/subjective_logic.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "evfuse/error.hpp"

namespace evfuse::sl {
namespace {

void require_same_classes(std::size_t lhs, std::size_t rhs, const char* what) {
  if (lhs != rhs) {
    throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(lhs) +
                          " vs " + std::to_string(rhs) + ")");
  }
}

}  // namespace

DirichletParams dirichlet_from_evidence(const EvidenceVector& evidence,
                                        const BaseRate& base_rate) {
  require_same_classes(evidence.num_classes(), base_rate.num_classes(), "dirichlet_from_evidence");
  std::vector<double> alpha(evidence.num_classes());
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    alpha[k] = evidence[k] + base_rate[k] * base_rate.weight();
  }
  return DirichletParams(std::move(alpha));
}

Opinion opinion_from_dirichlet(const DirichletParams& alpha, const BaseRate& base_rate) {
  require_same_classes(alpha.num_classes(), base_rate.num_classes(), "opinion_from_dirichlet");
  const double strength = std::accumulate(alpha.alpha().begin(), alpha.alpha().end(), 0.0);
  const double w = base_rate.weight();
  std::vector<double> beliefs(alpha.num_classes());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    double evidence = alpha[k] - base_rate[k] * w;
    if (evidence < 0.0) {
      if (evidence < -1e-12 * strength) {
        throw ValidationError("opinion_from_dirichlet: alpha[" + std::to_string(k) +
                              "] is below a_k W (negative evidence " + std::to_string(evidence) +
                              ")");
      }
      evidence = 0.0;
    }
    beliefs[k] = evidence / strength;
  }
  return Opinion(std::move(beliefs), w / strength);
}

DirichletParams dirichlet_from_opinion(const Opinion& opinion, const BaseRate& base_rate) {
  require_same_classes(opinion.num_classes(), base_rate.num_classes(), "dirichlet_from_opinion");
  if (opinion.uncertainty() <= 0.0) {
    throw ValidationError("dirichlet_from_opinion: dogmatic opinion (u = 0) has no Dirichlet form");
  }
  const double w = base_rate.weight();
  const double strength = w / opinion.uncertainty();
  std::vector<double> alpha(opinion.num_classes());
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    alpha[k] = opinion.belief(k) * strength + base_rate[k] * w;
  }
  return DirichletParams(std::move(alpha));
}

Opinion opinion_from_evidence(const EvidenceVector& evidence, const BaseRate& base_rate) {
  return opinion_from_dirichlet(dirichlet_from_evidence(evidence, base_rate), base_rate);
}

EvidenceVector evidence_from_opinion(const Opinion& opinion, const BaseRate& base_rate) {
  require_same_classes(opinion.num_classes(), base_rate.num_classes(), "evidence_from_opinion");
  if (opinion.uncertainty() <= 0.0) {
    throw ValidationError("evidence_from_opinion: dogmatic opinion carries infinite evidence");
  }
  const double scale = base_rate.weight() / opinion.uncertainty();
  std::vector<double> evidence(opinion.num_classes());
  for (std::size_t k = 0; k < evidence.size(); ++k) evidence[k] = opinion.belief(k) * scale;
  return EvidenceVector(std::move(evidence));
}

std::vector<double> projected_probability(const Opinion& opinion, const BaseRate& base_rate) {
  require_same_classes(opinion.num_classes(), base_rate.num_classes(), "projected_probability");
  std::vector<double> p(opinion.num_classes());
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = opinion.belief(k) + base_rate[k] * opinion.uncertainty();
  }
  return p;
}

Opinion cbf_fuse(const Opinion& m, const Opinion& n) {
  require_same_classes(m.num_classes(), n.num_classes(), "cbf_fuse");
  const double um = m.uncertainty();
  const double un = n.uncertainty();
  if (um + un == 0.0) {
    throw FusionError("cbf_fuse: both operands are dogmatic (u^m + u^n = 0)");
  }
  const double denom = um + un - um * un;
  std::vector<double> beliefs(m.num_classes());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    beliefs[k] = (m.belief(k) * un + n.belief(k) * um) / denom;
  }
  return Opinion(std::move(beliefs), um * un / denom);
}

double bcf_normalizer(const Opinion& m, const Opinion& n) {
  require_same_classes(m.num_classes(), n.num_classes(), "bcf_fuse");
  // sum_{i != j} b^m_i b^n_j = (sum b^m)(sum b^n) - sum_k b^m_k b^n_k
  double conflict = 0.0;
  for (std::size_t i = 0; i < m.num_classes(); ++i) {
    for (std::size_t j = 0; j < n.num_classes(); ++j) {
      if (i != j) conflict += m.belief(i) * n.belief(j);
    }
  }
  return 1.0 - conflict;
}

Opinion bcf_fuse(const Opinion& m, const Opinion& n) {
  const double c = bcf_normalizer(m, n);
  if (c <= kConflictEpsilon) {
    throw ConflictError("bcf_fuse: total conflict between operands (C = " + std::to_string(c) +
                        ")");
  }
  const double um = m.uncertainty();
  const double un = n.uncertainty();
  std::vector<double> beliefs(m.num_classes());
  for (std::size_t k = 0; k < beliefs.size(); ++k) {
    beliefs[k] = (m.belief(k) * n.belief(k) + m.belief(k) * un + n.belief(k) * um) / c;
  }
  return Opinion(std::move(beliefs), um * un / c);
}

Opinion combine_multiview(std::span<const Opinion> locals, const Opinion& global) {
  for (std::size_t i = 0; i < locals.size(); ++i) {
    require_same_classes(locals[i].num_classes(), global.num_classes(), "combine_multiview");
  }
  Opinion fused = locals.empty() ? Opinion::vacuous(global.num_classes()) : locals.front();
  for (std::size_t i = 1; i < locals.size(); ++i) {
    try {
      fused = cbf_fuse(fused, locals[i]);
    } catch (const FusionError& e) {
      throw FusionError(e.what(), "cbf[" + std::to_string(i) + "]");
    }
  }
  try {
    return bcf_fuse(fused, global);
  } catch (const ConflictError& e) {
    throw ConflictError(e.what(), "bcf");
  }
}

Opinion combine_views(std::span<const Opinion> views) {
  if (views.size() < 2) {
    throw ValidationError("combine_views: need at least 2 views, got " +
                          std::to_string(views.size()));
  }
  return combine_multiview(views.first(views.size() - 1), views.back());
}

}  // namespace evfuse::sl
