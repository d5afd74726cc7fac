#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "varinfer/linalg.hpp"
#include "varinfer/model.hpp"

namespace varinfer {

/// Regression form of the observed series: W rows are the lag-stacked vectors
/// z^(t) = (x^(t)T, x^(t-1)T, ..., x^(t-p+1)T)T for t = p..T-1, responses
/// Y rows are x^(p+1)..x^(T), and gram = (1/T) W^T W. The normalization is by
/// T, not by the T-p rows of W, matching the estimator's objective.
struct DesignSystem {
    int T = 0, p = 0, d = 0;
    Matrix X;     // T x d observations
    Matrix W;     // (T-p) x pd
    Matrix Y;     // (T-p) x d, column l is y^(l)
    Matrix gram;  // pd x pd

    Vector y(int l) const { return Y.col(l); }

    /// z^(t) for 1-based t in [p, T]; rows of W cover t = p..T-1 and z^(T)
    /// is assembled from the tail of X.
    Vector z(int t_one_based) const {
        if (t_one_based < p || t_one_based > T) {
            throw std::invalid_argument("z index out of range");
        }
        Vector out(p * d);
        for (int j = 0; j < p; ++j) {
            out.segment(j * d, d) = X.row(t_one_based - 1 - j).transpose();
        }
        return out;
    }
};

inline DesignSystem build_design(const Matrix& X, int p) {
    const int T = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    if (p < 1) throw std::invalid_argument("order must be >= 1");
    if (T <= p) throw std::invalid_argument("need more observations than the order");
    if (!X.allFinite()) throw std::invalid_argument("observations must be finite");
    DesignSystem design;
    design.T = T;
    design.p = p;
    design.d = d;
    design.X = X;
    design.W.resize(T - p, p * d);
    design.Y.resize(T - p, d);
    for (int k = 0; k < T - p; ++k) {
        const int t = p + k;  // 1-based time of the row's z
        for (int j = 0; j < p; ++j) {
            design.W.block(k, j * d, 1, d) = X.row(t - 1 - j);
        }
        design.Y.row(k) = X.row(t);
    }
    design.gram = design.W.transpose() * design.W / static_cast<double>(T);
    // blocked matrix products are not exactly symmetric; store it symmetric
    design.gram = ((design.gram + design.gram.transpose()) * 0.5).eval();
    return design;
}

struct LassoResult {
    Vector coef;
    bool converged = true;
    bool degenerate = false;  // constant response column
    int sweeps = 0;
};

/// Cyclic coordinate descent for
///   min_s (1/2T) |y - W s|_2^2 + lambda |s|_1
/// with exact soft-threshold updates on the cached Gram matrix. Converges
/// when the largest coordinate change in a sweep falls below tol. A warm
/// start may be supplied; non-convergence sets a flag instead of throwing.
inline LassoResult lasso_column(const DesignSystem& design, int l, double lambda,
                                double tol = 1e-8, int max_iter = 100000,
                                const Vector* warm_start = nullptr) {
    if (l < 0 || l >= design.d) throw std::invalid_argument("column index out of range");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    const int m = design.p * design.d;
    LassoResult result;
    result.coef = Vector::Zero(m);
    const Vector yl = design.y(l);
    if ((yl.array() - yl(0)).abs().maxCoeff() == 0.0) {
        result.degenerate = true;
        return result;
    }
    if (warm_start != nullptr && warm_start->size() == m) result.coef = *warm_start;
    const Matrix& G = design.gram;
    const Vector c = design.W.transpose() * yl / static_cast<double>(design.T);
    // gradient of the smooth part at the current point, kept incrementally
    Vector grad = c - G * result.coef;
    for (int sweep = 0; sweep < max_iter; ++sweep) {
        double max_change = 0.0;
        for (int j = 0; j < m; ++j) {
            const double gjj = G(j, j);
            const double old = result.coef(j);
            double updated = 0.0;
            if (gjj > 0.0) {
                const double rho = grad(j) + gjj * old;
                const double mag = std::fabs(rho) - lambda;
                if (mag > 0.0) updated = std::copysign(mag, rho) / gjj;
            }
            if (updated != old) {
                grad -= G.col(j) * (updated - old);
                result.coef(j) = updated;
                max_change = std::max(max_change, std::fabs(updated - old));
            }
        }
        result.sweeps = sweep + 1;
        if (max_change < tol) return result;
    }
    result.converged = false;
    return result;
}

/// Objective of the column Lasso problem, used by tests and tuning.
inline double lasso_objective(const DesignSystem& design, int l, double lambda,
                              const Vector& s) {
    const Vector r = design.y(l) - design.W * s;
    return r.squaredNorm() / (2.0 * design.T) + lambda * s.lpNorm<1>();
}

/// Thresholded supports: B_l = { j : |S_tilde[j][l]| > b_T }, strict.
inline std::vector<IndexSet> select_support(const Matrix& lasso_S, double b_T) {
    if (!(b_T > 0.0)) throw std::invalid_argument("threshold must be positive");
    std::vector<IndexSet> supports;
    supports.reserve(static_cast<std::size_t>(lasso_S.cols()));
    for (Eigen::Index l = 0; l < lasso_S.cols(); ++l) {
        std::vector<int> idx;
        for (Eigen::Index j = 0; j < lasso_S.rows(); ++j) {
            if (std::fabs(lasso_S(j, l)) > b_T) idx.push_back(static_cast<int>(j));
        }
        supports.emplace_back(std::move(idx));
    }
    return supports;
}

struct PostSelectionFit {
    int p = 0, d = 0, T = 0;
    double lambda = 0.0, b_T = 0.0;
    Matrix lasso_S;                  // pd x d
    std::vector<IndexSet> supports;  // d thresholded supports
    Matrix refit_S;                  // pd x d, zero off-support
    std::vector<bool> converged;
    std::vector<bool> degenerate;

    /// A^(k) for 1-based k, extracted via A^(k)_{ij} = S[(k-1)d + j][i].
    Matrix coefficient(int k) const {
        if (k < 1 || k > p) throw std::invalid_argument("lag index out of range");
        return refit_S.middleRows((k - 1) * d, d).transpose();
    }

    VarModel fitted_model() const { return VarModel::from_stacked(refit_S, p); }
};

/// OLS refit of the thresholded Lasso supports via the partial inverse:
/// S_hat_{.l} = F_{B_l}((1/T) W^T W) (1/T) W^T y^(l). Columns with an empty
/// support refit to zero.
inline PostSelectionFit post_selection_refit(const DesignSystem& design,
                                             const Matrix& lasso_S, double lambda,
                                             double b_T) {
    PostSelectionFit fit;
    fit.p = design.p;
    fit.d = design.d;
    fit.T = design.T;
    fit.lambda = lambda;
    fit.b_T = b_T;
    fit.lasso_S = lasso_S;
    fit.supports = select_support(lasso_S, b_T);
    fit.refit_S = Matrix::Zero(design.p * design.d, design.d);
    for (int l = 0; l < design.d; ++l) {
        const IndexSet& B = fit.supports[static_cast<std::size_t>(l)];
        if (B.empty()) continue;
        const Matrix F = partial_inverse(design.gram, B);
        const Vector rhs = design.W.transpose() * design.y(l) /
                           static_cast<double>(design.T);
        fit.refit_S.col(l) = F * rhs;
    }
    return fit;
}

inline PostSelectionFit post_selection_fit(const DesignSystem& design, double lambda,
                                           double b_T, double tol = 1e-8,
                                           int max_iter = 100000) {
    Matrix lasso_S(design.p * design.d, design.d);
    std::vector<bool> converged(static_cast<std::size_t>(design.d), true);
    std::vector<bool> degenerate(static_cast<std::size_t>(design.d), false);
    for (int l = 0; l < design.d; ++l) {
        const LassoResult res = lasso_column(design, l, lambda, tol, max_iter);
        lasso_S.col(l) = res.coef;
        converged[static_cast<std::size_t>(l)] = res.converged;
        degenerate[static_cast<std::size_t>(l)] = res.degenerate;
    }
    PostSelectionFit fit = post_selection_refit(design, lasso_S, lambda, b_T);
    fit.converged = std::move(converged);
    fit.degenerate = std::move(degenerate);
    return fit;
}

inline PostSelectionFit post_selection_fit(const Matrix& X, int p, double lambda,
                                           double b_T, double tol = 1e-8,
                                           int max_iter = 100000) {
    return post_selection_fit(build_design(X, p), lambda, b_T, tol, max_iter);
}

enum class ComparatorMethod { column_lasso, threshold_lasso };

/// Comparator estimators: the raw column-wise Lasso matrix, or the Lasso with
/// entries at or below b_T zeroed (no OLS refit).
inline Matrix comparator_fit(const Matrix& X, int p, ComparatorMethod method,
                             double lambda, double b_T = 0.0, double tol = 1e-8,
                             int max_iter = 100000) {
    const DesignSystem design = build_design(X, p);
    Matrix S(p * static_cast<int>(X.cols()), X.cols());
    for (int l = 0; l < design.d; ++l) {
        S.col(l) = lasso_column(design, l, lambda, tol, max_iter).coef;
    }
    if (method == ComparatorMethod::threshold_lasso) {
        S = (S.cwiseAbs().array() > b_T).select(S, 0.0);
    }
    return S;
}

struct FitMetrics {
    double c1 = 0.0;  // max column l1 error
    double c2 = 0.0;  // max column l2 error
    int kappa = 0;    // sparsity-pattern mismatches
};

inline FitMetrics evaluate_fit(const Matrix& estimate, const Matrix& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
        throw std::invalid_argument("shape mismatch in evaluate_fit");
    }
    const Matrix delta = estimate - truth;
    FitMetrics metrics;
    metrics.c1 = delta.cwiseAbs().colwise().sum().maxCoeff();
    metrics.c2 = delta.colwise().norm().maxCoeff();
    for (Eigen::Index j = 0; j < truth.rows(); ++j) {
        for (Eigen::Index l = 0; l < truth.cols(); ++l) {
            if ((estimate(j, l) == 0.0) != (truth(j, l) == 0.0)) ++metrics.kappa;
        }
    }
    return metrics;
}

}  // namespace varinfer
