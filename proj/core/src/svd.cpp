#include "g2lstm/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace g2lstm {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffdiagTol = 1e-12;  // relative to sqrt(|col_p|^2 * |col_q|^2)

double col_dot(const Matrix& w, std::size_t p, std::size_t q) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) s += w(i, p) * w(i, q);
    return s;
}

void rotate_cols(Matrix& w, std::size_t p, std::size_t q, double cs, double sn) {
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double wp = w(i, p);
        const double wq = w(i, q);
        w(i, p) = cs * wp - sn * wq;
        w(i, q) = sn * wp + cs * wq;
    }
}

// Orthogonalizes the columns of w in place; v accumulates the rotations.
// Returns the worst relative off-diagonal seen in the final sweep.
double jacobi_orthogonalize(Matrix& w, Matrix& v) {
    const std::size_t n = w.cols();
    double max_resid = 0.0;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        max_resid = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double a = col_dot(w, p, p);
                const double b = col_dot(w, q, q);
                const double c = col_dot(w, p, q);
                const double scale = std::sqrt(a * b);
                if (scale == 0.0 || std::abs(c) <= kOffdiagTol * scale) continue;
                max_resid = std::max(max_resid, std::abs(c) / scale);

                const double zeta = (b - a) / (2.0 * c);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * cs;
                rotate_cols(w, p, q, cs, sn);
                rotate_cols(v, p, q, cs, sn);
            }
        }
        if (max_resid == 0.0) return 0.0;
    }
    return max_resid;
}

// Fills u columns whose singular value is (numerically) zero with unit vectors
// orthogonal to the columns already present, so u stays column-orthonormal.
void complete_null_columns(Matrix& u, const std::vector<bool>& filled) {
    const std::size_t m = u.rows();
    const std::size_t k = u.cols();
    for (std::size_t j = 0; j < k; ++j) {
        if (filled[j]) continue;
        for (std::size_t basis = 0; basis < m; ++basis) {
            Vector cand(m, 0.0);
            cand[basis] = 1.0;
            for (std::size_t jj = 0; jj < k; ++jj) {
                if (jj == j || (!filled[jj] && jj > j)) continue;
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += cand[i] * u(i, jj);
                for (std::size_t i = 0; i < m; ++i) cand[i] -= dot * u(i, jj);
            }
            double norm = 0.0;
            for (double x : cand) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-6) {
                for (std::size_t i = 0; i < m; ++i) u(i, j) = cand[i] / norm;
                break;
            }
        }
    }
}

}  // namespace

SvdResult svd(const Matrix& m) {
    for (double x : m.flat()) {
        if (!std::isfinite(x)) throw std::invalid_argument("svd: input contains NaN/Inf");
    }
    if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("svd: empty matrix");

    // One-sided Jacobi wants at least as many rows as columns.
    const bool transposed = m.rows() < m.cols();
    Matrix w = transposed ? transpose(m) : m;
    const std::size_t k = w.cols();
    Matrix v = Matrix::identity(k);

    const double resid = jacobi_orthogonalize(w, v);
    if (resid > kOffdiagTol) {
        throw std::runtime_error("svd: no convergence after " + std::to_string(kMaxSweeps) +
                                 " sweeps, residual " + std::to_string(resid));
    }

    Vector sigma(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < w.rows(); ++i) s += w(i, j) * w(i, j);
        sigma[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

    SvdResult out;
    out.u = Matrix(w.rows(), k);
    out.s = Vector(k);
    out.v = Matrix(k, k);
    const double sigma_floor = sigma.empty() ? 0.0 : sigma[order[0]] * 1e-300;
    std::vector<bool> filled(k, false);
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t src = order[j];
        out.s[j] = sigma[src];
        if (sigma[src] > sigma_floor && sigma[src] > 0.0) {
            for (std::size_t i = 0; i < w.rows(); ++i) out.u(i, j) = w(i, src) / sigma[src];
            filled[j] = true;
        }
        for (std::size_t i = 0; i < k; ++i) out.v(i, j) = v(i, src);
    }
    complete_null_columns(out.u, filled);
    if (transposed) std::swap(out.u, out.v);

    // Deterministic sign: largest-magnitude entry of each u column positive.
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < out.u.rows(); ++i) {
            if (std::abs(out.u(i, j)) > best) {
                best = std::abs(out.u(i, j));
                arg = i;
            }
        }
        if (out.u(arg, j) < 0.0) {
            for (std::size_t i = 0; i < out.u.rows(); ++i) out.u(i, j) = -out.u(i, j);
            for (std::size_t i = 0; i < out.v.rows(); ++i) out.v(i, j) = -out.v(i, j);
        }
    }
    return out;
}

Matrix truncate_rank(const SvdResult& svd, std::size_t k) {
    if (k < 1 || k > svd.s.size()) {
        throw std::out_of_range("truncate_rank: k=" + std::to_string(k) + " not in [1, " +
                                std::to_string(svd.s.size()) + "]");
    }
    const std::size_t m = svd.u.rows();
    const std::size_t n = svd.v.rows();
    Matrix out(m, n);
    for (std::size_t r = 0; r < k; ++r) {
        const double s = svd.s[r];
        for (std::size_t i = 0; i < m; ++i) {
            const double us = svd.u(i, r) * s;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += us * svd.v(j, r);
        }
    }
    return out;
}

}  // namespace g2lstm
