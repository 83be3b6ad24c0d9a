#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evfuse/types.hpp"

// Evidential training objective and its analytic gradients.
//
// Per view:   L^v = ICE(alpha^v, y) + lambda * KL[Dir(alpha~^v) || Dir(beta)]
// Overall:    L   = L(combined) + sum_v L^v
//
// where alpha~ replaces the label entry of alpha with beta's, so correctly
// classified evidence is never penalised, and beta = a W.
namespace evfuse::loss {

struct LossConfig {
  LossConfig(double lambda, DirichletParams beta);

  double lambda;
  DirichletParams beta;
};

// Linear 0 -> 1 annealing of lambda: min(1, epoch / annealing_epochs).
double lambda_schedule(std::size_t epoch, std::size_t annealing_epochs);

// psi(S) - psi(alpha_y).
double ice_loss(const DirichletParams& alpha, std::size_t label);
// d/d alpha_j = psi'(S) - [j == y] psi'(alpha_j).
std::vector<double> ice_grad(const DirichletParams& alpha, std::size_t label);

DirichletParams masked_alpha(const DirichletParams& alpha, std::size_t label,
                             const DirichletParams& beta);

double kl_reg_loss(const DirichletParams& alpha, std::size_t label, const DirichletParams& beta);
// Gradient with respect to the unmasked alpha; the label entry is always 0.
std::vector<double> kl_reg_grad(const DirichletParams& alpha, std::size_t label,
                                const DirichletParams& beta);

double per_view_loss(const DirichletParams& alpha, std::size_t label, const LossConfig& cfg);
std::vector<double> per_view_grad(const DirichletParams& alpha, std::size_t label,
                                  const LossConfig& cfg);

double overall_loss(std::span<const DirichletParams> view_alphas,
                    const DirichletParams& combined_alpha, std::size_t label,
                    const LossConfig& cfg);

// Opinion components as plain numbers, used for gradients flowing through
// the fusion operators.
struct OpinionGrad {
  std::vector<double> beliefs;
  double uncertainty = 0.0;
};

struct FusionGrad {
  OpinionGrad m;
  OpinionGrad n;
};

// Vector-Jacobian products of cbf_fuse / bcf_fuse: given dL/d(output),
// return dL/d(operands). Beliefs and uncertainty are treated as independent
// inputs.
FusionGrad cbf_backward(const Opinion& m, const Opinion& n, const OpinionGrad& out_grad);
FusionGrad bcf_backward(const Opinion& m, const Opinion& n, const OpinionGrad& out_grad);

// dL/de for the evidence -> opinion map b = e / S, u = W / S.
std::vector<double> opinion_backward(const EvidenceVector& evidence, const BaseRate& base_rate,
                                     const OpinionGrad& out_grad);

// dL/d(opinion) for the opinion -> Dirichlet map alpha = b W / u + a W.
OpinionGrad dirichlet_from_opinion_backward(const Opinion& opinion, const BaseRate& base_rate,
                                            std::span<const double> alpha_grad);

// BCF normalisation below this is skipped during training rather than
// allowed to produce exploding gradients.
inline constexpr double kNearConflict = 1e-6;

struct OverallGradient {
  double loss = 0.0;
  // dL/de^v, one vector per view.
  std::vector<std::vector<double>> evidence_grads;
  // BCF normalisation factor of the final fusion step (1 for V = 1).
  double bcf_normalizer = 1.0;
};

// Overall loss and its exact gradient with respect to every view's evidence,
// through both the direct per-view terms and the fusion chain
// (CBF over views 0..V-2, then BCF with view V-1). V = 1 uses the single
// view as the combined opinion.
OverallGradient overall_grad(std::span<const EvidenceVector> view_evidences,
                             const BaseRate& base_rate, std::size_t label, const LossConfig& cfg);

}  // namespace evfuse::loss
