#pragma once

#include "g2lstm/linalg.hpp"
#include "g2lstm/rng.hpp"

#include <cstdint>

namespace g2lstm {

/// sigma((alpha + noise) / tau); the binary-concrete gate for one coordinate.
double concrete_gate(double alpha, double noise, double tau);

struct BinaryConcreteSample {
    Vector g;      // gate values in (0,1)
    Vector noise;  // logistic noise used, kept for exact reuse in backward
};

/// Elementwise relaxed Bernoulli draw g_j = sigma((alpha_j + L_j)/tau) with
/// independent logistic noise L_j. Throws std::invalid_argument for tau <= 0.
BinaryConcreteSample binary_concrete(const Vector& alpha, double tau, RngState& rng);

/// Pathwise derivative d g / d alpha = g (1 - g) / tau, elementwise.
Vector binary_concrete_grad(const Vector& g, double tau);

/// softmax((log_pi + q) / tau) with q_i = -log(-log U_i); sums to 1.
Vector gumbel_softmax_k(const Vector& log_pi, double tau, RngState& rng);

/// Same transform with caller-supplied Gumbel noise (deterministic).
Vector gumbel_softmax_from_noise(const Vector& log_pi, const Vector& q, double tau);

/// Tail comparison between the relaxed gate distribution and its target
/// Bernoulli(sigma(alpha)): exact closed-form tails, Monte-Carlo estimates,
/// and the sandwich-bound flags.
struct Prop1Report {
    double alpha = 0.0;
    double tau = 0.0;
    double epsilon = 0.0;
    std::uint64_t n_samples = 0;
    double empirical_upper_tail = 0.0;  // fraction of samples >= 1 - epsilon
    double empirical_lower_tail = 0.0;  // fraction of samples <= epsilon
    double exact_upper_tail = 0.0;      // sigma(alpha - tau log(1/eps - 1))
    double exact_lower_tail = 0.0;      // sigma(-alpha - tau log(1/eps - 1))
    double bernoulli_p = 0.0;           // sigma(alpha)
    double bound_slack = 0.0;           // (tau/4) log(1/eps)
    bool upper_bound_holds = false;
    bool lower_bound_holds = false;
};

/// Requires tau > 0, epsilon in (0, 1/2), n >= 10^4.
Prop1Report verify_prop1(double alpha, double tau, double epsilon, std::uint64_t n, RngState& rng);

}  // namespace g2lstm
