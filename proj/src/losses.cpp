#include "evfuse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evfuse/dirichlet.hpp"
#include "evfuse/error.hpp"
#include "evfuse/specfun.hpp"
#include "evfuse/subjective_logic.hpp"

namespace evfuse::loss {
namespace {

constexpr double kAlphaFloor = 1e-8;

double clamped(double alpha) { return std::max(alpha, kAlphaFloor); }

void check_label(std::size_t label, std::size_t k, const char* what) {
  if (label >= k) {
    throw ValidationError(std::string(what) + ": label " + std::to_string(label) +
                          " out of range for " + std::to_string(k) + " classes");
  }
}

void check_dims(std::size_t lhs, std::size_t rhs, const char* what) {
  if (lhs != rhs) {
    throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(lhs) +
                          " vs " + std::to_string(rhs) + ")");
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
}

}  // namespace

LossConfig::LossConfig(double lambda_, DirichletParams beta_)
    : lambda(lambda_), beta(std::move(beta_)) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("LossConfig: lambda must lie in [0,1], got " + std::to_string(lambda));
  }
}

double lambda_schedule(std::size_t epoch, std::size_t annealing_epochs) {
  if (annealing_epochs == 0) return 1.0;
  return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(annealing_epochs));
}

double ice_loss(const DirichletParams& alpha, std::size_t label) {
  check_label(label, alpha.num_classes(), "ice_loss");
  return specfun::digamma(clamped(dir::strength(alpha))) - specfun::digamma(clamped(alpha[label]));
}

std::vector<double> ice_grad(const DirichletParams& alpha, std::size_t label) {
  check_label(label, alpha.num_classes(), "ice_grad");
  std::vector<double> g(alpha.num_classes(), specfun::trigamma(clamped(dir::strength(alpha))));
  g[label] -= specfun::trigamma(clamped(alpha[label]));
  return g;
}

DirichletParams masked_alpha(const DirichletParams& alpha, std::size_t label,
                             const DirichletParams& beta) {
  check_dims(alpha.num_classes(), beta.num_classes(), "masked_alpha");
  check_label(label, alpha.num_classes(), "masked_alpha");
  std::vector<double> masked(alpha.alpha().begin(), alpha.alpha().end());
  masked[label] = beta[label];
  return DirichletParams(std::move(masked));
}

double kl_reg_loss(const DirichletParams& alpha, std::size_t label, const DirichletParams& beta) {
  return dir::kl_dirichlet(masked_alpha(alpha, label, beta), beta);
}

std::vector<double> kl_reg_grad(const DirichletParams& alpha, std::size_t label,
                                const DirichletParams& beta) {
  const DirichletParams masked = masked_alpha(alpha, label, beta);
  const double s_masked = dir::strength(masked);
  const double s_beta = dir::strength(beta);
  const double tri_s = specfun::trigamma(clamped(s_masked));
  std::vector<double> g(alpha.num_classes());
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (j == label) continue;
    g[j] = (masked[j] - beta[j]) * specfun::trigamma(clamped(masked[j])) -
           (s_masked - s_beta) * tri_s;
  }
  return g;
}

double per_view_loss(const DirichletParams& alpha, std::size_t label, const LossConfig& cfg) {
  double l = ice_loss(alpha, label);
  if (cfg.lambda != 0.0) l += cfg.lambda * kl_reg_loss(alpha, label, cfg.beta);
  return l;
}

std::vector<double> per_view_grad(const DirichletParams& alpha, std::size_t label,
                                  const LossConfig& cfg) {
  std::vector<double> g = ice_grad(alpha, label);
  if (cfg.lambda != 0.0) {
    const std::vector<double> kl = kl_reg_grad(alpha, label, cfg.beta);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += cfg.lambda * kl[j];
  }
  return g;
}

double overall_loss(std::span<const DirichletParams> view_alphas,
                    const DirichletParams& combined_alpha, std::size_t label,
                    const LossConfig& cfg) {
  double total = per_view_loss(combined_alpha, label, cfg);
  for (const auto& alpha : view_alphas) {
    check_dims(alpha.num_classes(), combined_alpha.num_classes(), "overall_loss");
    total += per_view_loss(alpha, label, cfg);
  }
  return total;
}

FusionGrad cbf_backward(const Opinion& m, const Opinion& n, const OpinionGrad& out_grad) {
  const std::size_t k_count = m.num_classes();
  const double um = m.uncertainty();
  const double un = n.uncertainty();
  const double den = um + un - um * un;
  // Output of the forward pass, needed for the denominator term.
  double weighted_out = out_grad.uncertainty * (um * un / den);
  for (std::size_t k = 0; k < k_count; ++k) {
    weighted_out += out_grad.beliefs[k] * (m.belief(k) * un + n.belief(k) * um) / den;
  }
  const double g_den = -weighted_out / den;

  FusionGrad g{{std::vector<double>(k_count), 0.0}, {std::vector<double>(k_count), 0.0}};
  double gb_dot_bn = 0.0;
  double gb_dot_bm = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    g.m.beliefs[k] = out_grad.beliefs[k] * un / den;
    g.n.beliefs[k] = out_grad.beliefs[k] * um / den;
    gb_dot_bn += out_grad.beliefs[k] * n.belief(k);
    gb_dot_bm += out_grad.beliefs[k] * m.belief(k);
  }
  g.m.uncertainty = (gb_dot_bn + out_grad.uncertainty * un) / den + g_den * (1.0 - un);
  g.n.uncertainty = (gb_dot_bm + out_grad.uncertainty * um) / den + g_den * (1.0 - um);
  return g;
}

FusionGrad bcf_backward(const Opinion& m, const Opinion& n, const OpinionGrad& out_grad) {
  const std::size_t k_count = m.num_classes();
  const double um = m.uncertainty();
  const double un = n.uncertainty();
  const double c = sl::bcf_normalizer(m, n);
  const double sum_bm = std::accumulate(m.beliefs().begin(), m.beliefs().end(), 0.0);
  const double sum_bn = std::accumulate(n.beliefs().begin(), n.beliefs().end(), 0.0);

  double weighted_out = out_grad.uncertainty * um * un / c;
  for (std::size_t k = 0; k < k_count; ++k) {
    const double numer = m.belief(k) * n.belief(k) + m.belief(k) * un + n.belief(k) * um;
    weighted_out += out_grad.beliefs[k] * numer / c;
  }
  const double g_c = -weighted_out / c;

  FusionGrad g{{std::vector<double>(k_count), 0.0}, {std::vector<double>(k_count), 0.0}};
  double gb_dot_bn = 0.0;
  double gb_dot_bm = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const double gb = out_grad.beliefs[k];
    // dC/db^m_k = -(sum b^n - b^n_k), dC/db^n_k = -(sum b^m - b^m_k)
    g.m.beliefs[k] = gb * (n.belief(k) + un) / c - g_c * (sum_bn - n.belief(k));
    g.n.beliefs[k] = gb * (m.belief(k) + um) / c - g_c * (sum_bm - m.belief(k));
    gb_dot_bn += gb * n.belief(k);
    gb_dot_bm += gb * m.belief(k);
  }
  g.m.uncertainty = (gb_dot_bn + out_grad.uncertainty * un) / c;
  g.n.uncertainty = (gb_dot_bm + out_grad.uncertainty * um) / c;
  return g;
}

std::vector<double> opinion_backward(const EvidenceVector& evidence, const BaseRate& base_rate,
                                     const OpinionGrad& out_grad) {
  const double s = evidence.total() + base_rate.weight() *
                                          std::accumulate(base_rate.rates().begin(),
                                                          base_rate.rates().end(), 0.0);
  const double shared =
      (dot(out_grad.beliefs, evidence.values()) + out_grad.uncertainty * base_rate.weight()) /
      (s * s);
  std::vector<double> g(evidence.num_classes());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = out_grad.beliefs[j] / s - shared;
  return g;
}

OpinionGrad dirichlet_from_opinion_backward(const Opinion& opinion, const BaseRate& base_rate,
                                            std::span<const double> alpha_grad) {
  const double w = base_rate.weight();
  const double u = opinion.uncertainty();
  OpinionGrad g{std::vector<double>(opinion.num_classes()), 0.0};
  for (std::size_t k = 0; k < g.beliefs.size(); ++k) g.beliefs[k] = alpha_grad[k] * w / u;
  g.uncertainty = -w / (u * u) * dot(alpha_grad, opinion.beliefs());
  return g;
}

OverallGradient overall_grad(std::span<const EvidenceVector> view_evidences,
                             const BaseRate& base_rate, std::size_t label, const LossConfig& cfg) {
  const std::size_t views = view_evidences.size();
  if (views == 0) throw ValidationError("overall_grad: no views");
  const std::size_t k_count = base_rate.num_classes();
  check_label(label, k_count, "overall_grad");

  OverallGradient result;
  result.evidence_grads.reserve(views);
  std::vector<Opinion> opinions;
  opinions.reserve(views);
  for (const auto& e : view_evidences) {
    check_dims(e.num_classes(), k_count, "overall_grad");
    const DirichletParams alpha = sl::dirichlet_from_evidence(e, base_rate);
    result.loss += per_view_loss(alpha, label, cfg);
    result.evidence_grads.push_back(per_view_grad(alpha, label, cfg));
    opinions.push_back(sl::opinion_from_dirichlet(alpha, base_rate));
  }

  // Forward through the fusion chain, keeping every intermediate CBF result.
  std::vector<Opinion> folds;  // folds[i] = opinions[0] + ... + opinions[i]
  if (views >= 2) {
    folds.reserve(views - 1);
    folds.push_back(opinions[0]);
    for (std::size_t i = 1; i + 1 < views; ++i) {
      try {
        folds.push_back(sl::cbf_fuse(folds.back(), opinions[i]));
      } catch (const FusionError& e) {
        throw FusionError(e.what(), "cbf[" + std::to_string(i) + "]");
      }
    }
  }
  Opinion combined = opinions[0];
  if (views >= 2) {
    result.bcf_normalizer = sl::bcf_normalizer(folds.back(), opinions.back());
    try {
      combined = sl::bcf_fuse(folds.back(), opinions.back());
    } catch (const ConflictError& e) {
      throw ConflictError(e.what(), "bcf");
    }
  }

  const DirichletParams combined_alpha = sl::dirichlet_from_opinion(combined, base_rate);
  result.loss += per_view_loss(combined_alpha, label, cfg);
  const std::vector<double> combined_alpha_grad = per_view_grad(combined_alpha, label, cfg);

  // Reverse pass.
  std::vector<OpinionGrad> opinion_grads(views);
  OpinionGrad g_combined =
      dirichlet_from_opinion_backward(combined, base_rate, combined_alpha_grad);
  if (views == 1) {
    opinion_grads[0] = std::move(g_combined);
  } else {
    FusionGrad g_bcf = bcf_backward(folds.back(), opinions.back(), g_combined);
    opinion_grads[views - 1] = std::move(g_bcf.n);
    OpinionGrad g_fold = std::move(g_bcf.m);
    for (std::size_t i = views - 2; i >= 1; --i) {
      FusionGrad g_cbf = cbf_backward(folds[i - 1], opinions[i], g_fold);
      opinion_grads[i] = std::move(g_cbf.n);
      g_fold = std::move(g_cbf.m);
    }
    opinion_grads[0] = std::move(g_fold);
  }

  for (std::size_t v = 0; v < views; ++v) {
    const std::vector<double> g = opinion_backward(view_evidences[v], base_rate, opinion_grads[v]);
    for (std::size_t k = 0; k < k_count; ++k) result.evidence_grads[v][k] += g[k];
  }
  return result;
}

}  // namespace evfuse::loss
