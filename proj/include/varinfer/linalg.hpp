#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "varinfer/kernel.hpp"
#include "varinfer/rng.hpp"

namespace varinfer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Strictly increasing, duplicate-free set of 0-based coordinate indices.
/// May be empty.
class IndexSet {
public:
    IndexSet() = default;
    explicit IndexSet(std::vector<int> indices) : indices_(std::move(indices)) {
        std::sort(indices_.begin(), indices_.end());
        indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
    }

    const std::vector<int>& indices() const { return indices_; }
    int size() const { return static_cast<int>(indices_.size()); }
    bool empty() const { return indices_.empty(); }
    int operator[](int i) const { return indices_[static_cast<std::size_t>(i)]; }

    bool contains(int j) const {
        return std::binary_search(indices_.begin(), indices_.end(), j);
    }

    void check_bounds(int dim) const {
        for (int j : indices_) {
            if (j < 0 || j >= dim) {
                throw std::invalid_argument("index set entry out of bounds");
            }
        }
    }

    bool operator==(const IndexSet& other) const { return indices_ == other.indices_; }

private:
    std::vector<int> indices_;
};

namespace detail {

inline void require_symmetric_finite(const Matrix& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("matrix must be square");
    if (!A.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            if (A(i, j) != A(j, i)) {
                throw std::invalid_argument("matrix must be symmetric as stored");
            }
        }
    }
}

}  // namespace detail

/// Moore-Penrose pseudo-inverse of a symmetric matrix via eigendecomposition.
/// Eigenvalues with |lambda| <= rank_tol * max|lambda| are treated as zero.
/// rank_tol < 0 selects the default dim * machine-epsilon.
inline Matrix symmetric_pseudo_inverse(const Matrix& A, double rank_tol = -1.0) {
    detail::require_symmetric_finite(A);
    const Eigen::Index n = A.rows();
    if (n == 0) return Matrix(0, 0);
    if (rank_tol < 0.0) {
        rank_tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("eigendecomposition failed");
    }
    const Vector& lam = eig.eigenvalues();
    const double cutoff = rank_tol * lam.cwiseAbs().maxCoeff();
    Vector inv = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::fabs(lam(i)) > cutoff) inv(i) = 1.0 / lam(i);
    }
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

/// Partial inverse F_B(A): pseudo-invert the B-submatrix of A and embed it
/// back at the B rows/columns, zero elsewhere. Empty B gives the zero matrix,
/// which makes downstream bootstrap roots vanish for unselected columns.
inline Matrix partial_inverse(const Matrix& A, const IndexSet& B,
                              double rank_tol = -1.0) {
    detail::require_symmetric_finite(A);
    const int n = static_cast<int>(A.rows());
    B.check_bounds(n);
    Matrix C = Matrix::Zero(n, n);
    if (B.empty()) return C;
    const int v = B.size();
    Matrix sub(v, v);
    for (int s = 0; s < v; ++s) {
        for (int t = 0; t < v; ++t) sub(s, t) = A(B[s], B[t]);
    }
    const Matrix Z = symmetric_pseudo_inverse(sub, rank_tol);
    for (int s = 0; s < v; ++s) {
        for (int t = 0; t < v; ++t) C(B[s], B[t]) = Z(s, t);
    }
    return C;
}

struct ToeplitzGaussianSpec {
    int length = 1;
    KernelSpec kernel;
    std::uint64_t seed = 0;
};

/// Samples zero-mean Gaussian vectors with the kernel-Toeplitz covariance
/// M[t1][t2] = K((t1 - t2) / k_T). The kernel band is truncated where
/// K(s/k_T) < 1e-12 and the banded Toeplitz matrix is Cholesky-factored once;
/// factorization failures are absorbed by escalating diagonal jitter
/// 1e-12 * (1, 10, 100, ...) up to 1e-6, then reported.
class ToeplitzGaussianSampler {
public:
    ToeplitzGaussianSampler(int length, const KernelSpec& kernel)
        : n_(length), kernel_(kernel) {
        if (length < 1) throw std::invalid_argument("length must be >= 1");
        kernel.validate();
        band_ = 0;
        while (band_ + 1 < n_ && kernel((band_ + 1) / kernel.bandwidth) >= 1e-12) {
            ++band_;
        }
        double jitter = 0.0;
        for (double j = 1e-12; ; j *= 10.0) {
            if (try_factor(jitter)) return;
            if (j > 1e-6) break;
            jitter = j;
        }
        throw std::runtime_error(
            "Toeplitz covariance factorization failed after jitter escalation "
            "(length=" + std::to_string(n_) +
            ", bandwidth=" + std::to_string(kernel.bandwidth) + ")");
    }

    int length() const { return n_; }
    int band() const { return band_; }

    /// Lower Cholesky factor entry L(i, j); zero outside the band.
    double factor(int i, int j) const {
        if (j > i || i - j > band_) return 0.0;
        return L_[static_cast<std::size_t>(i) * (band_ + 1) + (i - j)];
    }

    /// One draw; deterministic for fixed (seed, stream).
    Vector sample(std::uint64_t seed, std::uint64_t stream = 0) const {
        Rng rng(seed, stream);
        Vector z(n_);
        for (int i = 0; i < n_; ++i) z(i) = rng.normal();
        Vector x(n_);
        for (int i = 0; i < n_; ++i) {
            double acc = 0.0;
            const int lo = std::max(0, i - band_);
            for (int j = lo; j <= i; ++j) acc += factor(i, j) * z(j);
            x(i) = acc;
        }
        return x;
    }

private:
    bool try_factor(double jitter) {
        L_.assign(static_cast<std::size_t>(n_) * (band_ + 1), 0.0);
        auto at = [&](int i, int j) -> double& {
            return L_[static_cast<std::size_t>(i) * (band_ + 1) + (i - j)];
        };
        for (int j = 0; j < n_; ++j) {
            for (int i = j; i <= std::min(n_ - 1, j + band_); ++i) {
                double m = (i - j <= band_)
                               ? kernel_((i - j) / kernel_.bandwidth)
                               : 0.0;
                if (i == j) m += jitter;
                double sum = m;
                const int lo = std::max({0, i - band_, j - band_});
                for (int k = lo; k < j; ++k) sum -= at(i, k) * at(j, k);
                if (i == j) {
                    if (sum <= 0.0) return false;
                    at(j, j) = std::sqrt(sum);
                } else {
                    at(i, j) = sum / at(j, j);
                }
            }
        }
        return true;
    }

    int n_;
    int band_;
    KernelSpec kernel_;
    std::vector<double> L_;
};

inline Vector toeplitz_gaussian_sample(const ToeplitzGaussianSpec& spec) {
    ToeplitzGaussianSampler sampler(spec.length, spec.kernel);
    return sampler.sample(spec.seed);
}

}  // namespace varinfer
