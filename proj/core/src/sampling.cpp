#include "g2lstm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace g2lstm {

namespace {

void require_positive_tau(double tau, const char* op) {
    if (!(tau > 0.0)) {
        throw std::invalid_argument(std::string(op) + ": tau must be > 0, got " +
                                    std::to_string(tau));
    }
}

}  // namespace

double concrete_gate(double alpha, double noise, double tau) {
    return sigmoid((alpha + noise) / tau);
}

BinaryConcreteSample binary_concrete(const Vector& alpha, double tau, RngState& rng) {
    require_positive_tau(tau, "binary_concrete");
    BinaryConcreteSample out;
    out.g.resize(alpha.size());
    out.noise.resize(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        out.noise[i] = rng.logistic();
        out.g[i] = concrete_gate(alpha[i], out.noise[i], tau);
    }
    return out;
}

Vector binary_concrete_grad(const Vector& g, double tau) {
    Vector d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * (1.0 - g[i]) / tau;
    return d;
}

Vector gumbel_softmax_from_noise(const Vector& log_pi, const Vector& q, double tau) {
    require_positive_tau(tau, "gumbel_softmax_k");
    if (log_pi.size() < 2) throw std::invalid_argument("gumbel_softmax_k: need k >= 2 categories");
    if (log_pi.size() != q.size())
        throw std::invalid_argument("gumbel_softmax_k: noise length mismatch");

    Vector z(log_pi.size());
    double zmax = -HUGE_VAL;
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = (log_pi[i] + q[i]) / tau;
        zmax = std::max(zmax, z[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = std::exp(z[i] - zmax);
        sum += z[i];
    }
    for (double& y : z) y /= sum;
    return z;
}

Vector gumbel_softmax_k(const Vector& log_pi, double tau, RngState& rng) {
    Vector q(log_pi.size());
    for (double& qi : q) qi = -std::log(-std::log(rng.uniform()));
    return gumbel_softmax_from_noise(log_pi, q, tau);
}

Prop1Report verify_prop1(double alpha, double tau, double epsilon, std::uint64_t n,
                         RngState& rng) {
    require_positive_tau(tau, "verify_prop1");
    if (!(epsilon > 0.0 && epsilon < 0.5)) {
        throw std::invalid_argument("verify_prop1: epsilon must lie in (0, 1/2), got " +
                                    std::to_string(epsilon));
    }
    if (n < 10000) {
        throw std::invalid_argument("verify_prop1: need n >= 10^4, got " + std::to_string(n));
    }

    Prop1Report rep;
    rep.alpha = alpha;
    rep.tau = tau;
    rep.epsilon = epsilon;
    rep.n_samples = n;
    rep.bernoulli_p = sigmoid(alpha);
    rep.bound_slack = tau / 4.0 * std::log(1.0 / epsilon);

    const double logit_eps = std::log(1.0 / epsilon - 1.0);
    rep.exact_upper_tail = sigmoid(alpha - tau * logit_eps);
    rep.exact_lower_tail = sigmoid(-alpha - tau * logit_eps);

    std::uint64_t hi = 0, lo = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const double g = concrete_gate(alpha, rng.logistic(), tau);
        if (g >= 1.0 - epsilon) ++hi;
        if (g <= epsilon) ++lo;
    }
    rep.empirical_upper_tail = static_cast<double>(hi) / static_cast<double>(n);
    rep.empirical_lower_tail = static_cast<double>(lo) / static_cast<double>(n);

    constexpr double tol = 1e-12;
    const double p = rep.bernoulli_p;
    rep.upper_bound_holds = rep.exact_upper_tail <= p + tol &&
                            p - rep.exact_upper_tail <= rep.bound_slack + tol;
    rep.lower_bound_holds = rep.exact_lower_tail <= (1.0 - p) + tol &&
                            (1.0 - p) - rep.exact_lower_tail <= rep.bound_slack + tol;
    return rep;
}

}  // namespace g2lstm
