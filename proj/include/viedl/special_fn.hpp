#pragma once

// Scalar special functions used by the Dirichlet formulas.
//
// Accuracy on [0.5, 1e6]: lgamma relative error <= 1e-12, digamma absolute
// error <= 1e-10. All functions throw std::domain_error for x <= 0 (or NaN).

namespace viedl {

/// log Gamma(x) by the Lanczos approximation (g = 7, 9 coefficients).
double lgamma(double x);

/// psi(x) = d/dx log Gamma(x). Upward recurrence to x >= 6, then the
/// asymptotic Bernoulli series.
double digamma(double x);

/// psi'(x). Same recurrence/asymptotic strategy as digamma.
double trigamma(double x);

/// log(1 + exp(z)) without overflow or premature underflow.
double softplus(double z);

/// Logistic sigmoid, the derivative of softplus.
double sigmoid(double z);

}  // namespace viedl
