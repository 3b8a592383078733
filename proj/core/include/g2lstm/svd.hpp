#pragma once

#include "g2lstm/linalg.hpp"

namespace g2lstm {

/// Thin SVD m = u * diag(s) * v^T with k = min(rows, cols) columns.
/// Singular values are non-negative and sorted descending; the sign of each
/// u column is chosen so its largest-magnitude entry is positive.
struct SvdResult {
    Matrix u;  // m x k, column-orthonormal
    Vector s;  // k, non-increasing
    Matrix v;  // n x k, column-orthonormal
};

/// One-sided Jacobi SVD. Throws std::invalid_argument on non-finite input and
/// std::runtime_error (reporting the residual) if 100 sweeps do not converge.
SvdResult svd(const Matrix& m);

/// Best rank-k approximation sum_{i<k} s[i] * u_i * v_i^T.
/// Throws std::out_of_range when k is not in [1, len(s)].
Matrix truncate_rank(const SvdResult& svd, std::size_t k);

}  // namespace g2lstm
