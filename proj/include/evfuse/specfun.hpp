#pragma once

// Log-gamma, digamma and trigamma over the positive reals.
//
// All three shift the argument upward with the functional recurrence until
// it is large enough for the asymptotic (Stirling / Bernoulli) expansion,
// which then converges to full double precision. Arguments that are not
// finite and strictly positive raise DomainError; callers that may produce
// near-zero values are expected to clamp first.

namespace evfuse::specfun {

double ln_gamma(double x);
double digamma(double x);
double trigamma(double x);

}  // namespace evfuse::specfun
