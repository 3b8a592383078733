#include "g2lstm/linalg.hpp"

#include <cmath>
#include <stdexcept>

#ifdef G2LSTM_HAVE_CBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace g2lstm {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

namespace {

void check_inner(const Matrix& a, const Matrix& b, const char* op, std::size_t a_inner,
                 std::size_t b_inner) {
    if (a_inner != b_inner) {
        throw std::invalid_argument(std::string(op) + ": dimension mismatch, " + a.shape_str() +
                                    " vs " + b.shape_str());
    }
}

#ifdef G2LSTM_HAVE_CBLAS
// Matmul inside this module always runs single-threaded so results are
// bit-reproducible run to run; concurrency happens at the process level.
void pin_blas_threads() {
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc) {
    pin_blas_threads();
    cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, a, static_cast<int>(lda), b, static_cast<int>(ldb), 0.0,
                c, static_cast<int>(ldc));
}
#else
// Blocked triple loop, i-k-j order for row-major locality.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
    constexpr std::size_t block = 64;
    for (std::size_t i0 = 0; i0 < m; i0 += block) {
        const std::size_t i1 = std::min(i0 + block, m);
        for (std::size_t k0 = 0; k0 < k; k0 += block) {
            const std::size_t k1 = std::min(k0 + block, k);
            for (std::size_t i = i0; i < i1; ++i) {
                for (std::size_t kk = k0; kk < k1; ++kk) {
                    const double aik = a[i * k + kk];
                    const double* brow = b + kk * n;
                    double* crow = c + i * n;
                    for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
                }
            }
        }
    }
}
#endif

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_inner(a, b, "matmul", a.cols(), b.rows());
    Matrix c(a.rows(), b.cols());
#ifdef G2LSTM_HAVE_CBLAS
    if (!c.empty())
        gemm(CblasNoTrans, CblasNoTrans, a.rows(), b.cols(), a.cols(), a.data(), a.cols(), b.data(),
             b.cols(), c.data(), c.cols());
#else
    gemm_nn(a.rows(), b.cols(), a.cols(), a.data(), b.data(), c.data());
#endif
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_inner(a, b, "matmul_tn", a.rows(), b.rows());
    Matrix c(a.cols(), b.cols());
#ifdef G2LSTM_HAVE_CBLAS
    if (!c.empty())
        gemm(CblasTrans, CblasNoTrans, a.cols(), b.cols(), a.rows(), a.data(), a.cols(), b.data(),
             b.cols(), c.data(), c.cols());
#else
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
        }
#endif
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_inner(a, b, "matmul_nt", a.cols(), b.cols());
    Matrix c(a.rows(), b.rows());
#ifdef G2LSTM_HAVE_CBLAS
    if (!c.empty())
        gemm(CblasNoTrans, CblasTrans, a.rows(), b.rows(), a.cols(), a.data(), a.cols(), b.data(),
             b.cols(), c.data(), c.cols());
#else
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
#endif
    return c;
}

Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols() != x.size()) {
        throw std::invalid_argument("matvec: dimension mismatch, " + a.shape_str() + " vs vector[" +
                                    std::to_string(x.size()) + "]");
    }
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        const double* row = a.data() + i * a.cols();
        for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vector matvec_t(const Matrix& a, const Vector& x) {
    if (a.rows() != x.size()) {
        throw std::invalid_argument("matvec_t: dimension mismatch, " + a.shape_str() +
                                    " vs vector[" + std::to_string(x.size()) + "]");
    }
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double xi = x[i];
        const double* row = a.data() + i * a.cols();
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += row[j] * xi;
    }
    return y;
}

Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.flat()) s += v * v;
    return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("max_abs_diff: shape mismatch, " + a.shape_str() + " vs " +
                                    b.shape_str());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.flat()[i] - b.flat()[i]));
    return m;
}

double sigmoid(double x) {
    // exp of a non-positive argument cannot overflow; stable for |x| up to ~700.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector sigmoid(const Vector& x) {
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
    return y;
}

Vector tanh_vec(const Vector& x) {
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
    return y;
}

Vector add(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add: length mismatch");
    Vector y(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
    return y;
}

Vector hadamard(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("hadamard: length mismatch");
    Vector y(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
    return y;
}

}  // namespace g2lstm
