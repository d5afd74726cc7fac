#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "varinfer/estimation.hpp"
#include "varinfer/kernel.hpp"
#include "varinfer/linalg.hpp"
#include "varinfer/parallel.hpp"

namespace varinfer {

/// Lag-1 second-order residuals Theta^(t) = z^(t) z^(t+1)T - z^(t) z^(t)T S_dag
/// for t = p..T-1. The columns beyond d of Theta^(t) vanish identically
/// (z^(t+1) repeats the leading block of z^(t)), so only the first d columns
/// are materialized: Theta^(t)[., 1..d] = z^(t) r^(t)T with the fit residual
/// r^(t) = x^(t+1) - S_hatT z^(t). The full pd-column matrix is available via
/// theta_full for fidelity tests.
struct SecondOrderResiduals {
    int T = 0, p = 0, d = 0;
    Matrix Z;       // (T-p) x pd, rows z^(p)..z^(T-1)
    Matrix R;       // (T-p) x d fit residuals
    Matrix sigma1;  // pd x d, first d columns of (1/T) W^T [z^(p+1)T; ...]
    Matrix X;       // observations, kept for the full-Theta accessor
    Matrix s_hat;   // pd x d

    int n_terms() const { return T - p; }

    /// First d columns of Theta^(t) for 0-based term index k (t = p + k).
    Matrix theta(int k) const {
        return Z.row(k).transpose() * R.row(k);
    }

    /// S_hat augmented with the shift-identity blocks (pd x pd).
    Matrix s_dagger() const {
        Matrix S = Matrix::Zero(p * d, p * d);
        S.leftCols(d) = s_hat;
        if (p > 1) {
            S.block(0, d, (p - 1) * d, (p - 1) * d) =
                Matrix::Identity((p - 1) * d, (p - 1) * d);
        }
        return S;
    }

    /// Full pd x pd Theta^(t) straight from the definition.
    Matrix theta_full(int k) const {
        const int t = p + k;  // 1-based
        Vector z_next(p * d);
        for (int j = 0; j < p; ++j) {
            z_next.segment(j * d, d) = X.row(t - j).transpose();
        }
        const Vector zt = Z.row(k).transpose();
        return zt * z_next.transpose() - zt * zt.transpose() * s_dagger();
    }
};

inline SecondOrderResiduals second_order_residuals(const PostSelectionFit& fit,
                                                   const DesignSystem& design) {
    if (fit.p != design.p || fit.d != design.d || fit.T != design.T) {
        throw std::invalid_argument("fit and design shapes differ");
    }
    SecondOrderResiduals res;
    res.T = design.T;
    res.p = design.p;
    res.d = design.d;
    res.Z = design.W;
    res.R = design.Y - design.W * fit.refit_S;
    res.sigma1 = design.W.transpose() * design.Y / static_cast<double>(design.T);
    res.X = design.X;
    res.s_hat = fit.refit_S;
    return res;
}

struct BootstrapDraws {
    std::vector<double> psi;  // per-replicate max statistics, replicate order
    double c_star = 0.0;
    double alpha = 0.0;
    int B = 0;
    std::uint64_t seed = 0;
    std::string rng_algorithm = Rng::algorithm();
    int rejected = 0;  // AR-sieve replicates redrawn for exploding series
    // optionally retained roots for the selected (j, l) entries
    std::vector<std::pair<int, int>> retained_index;
    Matrix retained_delta;  // B x retained_index.size()
};

/// Exact order-statistic quantile of Algorithm step 5: psi_(k) with
/// k = min{ s : s/B >= 1 - alpha }, no interpolation.
inline double bootstrap_quantile(std::vector<double> psi, double alpha) {
    if (psi.empty()) throw std::invalid_argument("no bootstrap draws");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha in (0,1)");
    std::sort(psi.begin(), psi.end());
    const int B = static_cast<int>(psi.size());
    int k = static_cast<int>(std::ceil((1.0 - alpha) * B));
    if (k < 1) k = 1;
    return psi[static_cast<std::size_t>(k - 1)];
}

/// Second-order wild bootstrap. Per replicate b: draw kernel-correlated
/// Gaussian multipliers e^(t), form Sigma1* = Sigma1 + (1/T) sum_t Theta^(t) e_t,
/// push it through the frozen partial inverses to get S*, and record
/// psi*_b = max_{l, i} sqrt(T) |S*_{il} - S_hat_{il}|. One Toeplitz
/// factorization is shared across replicates; replicate b uses RNG stream b.
inline BootstrapDraws wild_bootstrap(const PostSelectionFit& fit,
                                     const DesignSystem& design,
                                     const KernelSpec& kernel, int B, double alpha,
                                     std::uint64_t seed, bool retain_draws = false) {
    if (B < 1) throw std::invalid_argument("need at least one bootstrap replicate");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha in (0,1)");
    const SecondOrderResiduals res = second_order_residuals(fit, design);
    const int n = res.n_terms();
    const double sqrt_T = std::sqrt(static_cast<double>(design.T));
    ToeplitzGaussianSampler sampler(n, kernel);

    // Per column l and support entry j: the root is a linear form in the
    // multipliers, Delta*_{jl} = (1/sqrt(T)) sum_t U_l[t][a] e_t with
    // U_l[t][a] = (F_{B_l} z^(t))_{j_a} r^(t)_l.
    std::vector<Matrix> U;  // per column, n x |B_l|
    std::vector<std::pair<int, int>> entries;
    U.reserve(static_cast<std::size_t>(design.d));
    for (int l = 0; l < design.d; ++l) {
        const IndexSet& Bset = fit.supports[static_cast<std::size_t>(l)];
        const int v = Bset.size();
        Matrix Ul(n, v);
        if (v > 0) {
            Matrix sub(v, v);
            for (int s = 0; s < v; ++s) {
                for (int t = 0; t < v; ++t) sub(s, t) = design.gram(Bset[s], Bset[t]);
            }
            const Matrix Zinv = symmetric_pseudo_inverse(sub);
            Matrix Wb(n, v);
            for (int s = 0; s < v; ++s) Wb.col(s) = res.Z.col(Bset[s]);
            Ul = (Wb * Zinv).array().colwise() * res.R.col(l).array();
        }
        for (int s = 0; s < v; ++s) entries.emplace_back(Bset[s], l);
        U.push_back(std::move(Ul));
    }

    BootstrapDraws draws;
    draws.alpha = alpha;
    draws.B = B;
    draws.seed = seed;
    draws.psi.assign(static_cast<std::size_t>(B), 0.0);
    if (retain_draws) {
        draws.retained_index = entries;
        draws.retained_delta.setZero(B, static_cast<Eigen::Index>(entries.size()));
    }
    parallel_for(B, [&](int b) {
        const Vector e = sampler.sample(seed, static_cast<std::uint64_t>(b));
        double psi = 0.0;
        int slot = 0;
        for (int l = 0; l < design.d; ++l) {
            if (U[static_cast<std::size_t>(l)].cols() == 0) continue;
            const Vector delta =
                U[static_cast<std::size_t>(l)].transpose() * e / sqrt_T;
            psi = std::max(psi, delta.cwiseAbs().maxCoeff());
            if (retain_draws) {
                draws.retained_delta.row(b).segment(slot, delta.size()) =
                    delta.transpose();
            }
            slot += static_cast<int>(delta.size());
        }
        draws.psi[static_cast<std::size_t>(b)] = psi;
    });
    draws.c_star = bootstrap_quantile(draws.psi, alpha);
    return draws;
}

/// Closed-form conditional covariance of the bootstrap roots,
/// E*[Delta*_{j1 l1} Delta*_{j2 l2}]; zero when either index is unselected.
inline double conditional_covariance(const PostSelectionFit& fit,
                                     const SecondOrderResiduals& res,
                                     const KernelSpec& kernel, int j1, int l1,
                                     int j2, int l2) {
    const auto& B1 = fit.supports[static_cast<std::size_t>(l1)];
    const auto& B2 = fit.supports[static_cast<std::size_t>(l2)];
    if (!B1.contains(j1) || !B2.contains(j2)) return 0.0;
    const Matrix gram = res.Z.transpose() * res.Z / static_cast<double>(res.T);
    const Vector f1 = partial_inverse(gram, B1).row(j1).transpose();
    const Vector f2 = partial_inverse(gram, B2).row(j2).transpose();
    const Vector u1 = (res.Z * f1).array() * res.R.col(l1).array();
    const Vector u2 = (res.Z * f2).array() * res.R.col(l2).array();
    const int n = res.n_terms();
    int band = 0;
    while (band + 1 < n && kernel((band + 1) / kernel.bandwidth) >= 1e-12) ++band;
    double acc = 0.0;
    for (int t1 = 0; t1 < n; ++t1) {
        const int lo = std::max(0, t1 - band), hi = std::min(n - 1, t1 + band);
        for (int t2 = lo; t2 <= hi; ++t2) {
            acc += u1(t1) * u2(t2) * kernel((t1 - t2) / kernel.bandwidth);
        }
    }
    return acc / static_cast<double>(res.T);
}

struct CoefficientInterval {
    int lag = 0;  // 1-based k
    int row = 0, col = 0;
    double estimate = 0.0, lower = 0.0, upper = 0.0;
};

struct SimultaneousCi {
    double half_width = 0.0;
    std::vector<CoefficientInterval> intervals;  // p * d * d entries
};

/// Every coefficient entry, including those estimated as zero, receives the
/// same half-width C*/sqrt(T).
inline SimultaneousCi simultaneous_ci(const PostSelectionFit& fit, double c_star,
                                      int T) {
    if (c_star < 0.0) throw std::invalid_argument("quantile must be >= 0");
    SimultaneousCi ci;
    ci.half_width = c_star / std::sqrt(static_cast<double>(T));
    ci.intervals.reserve(static_cast<std::size_t>(fit.p) * fit.d * fit.d);
    for (int k = 1; k <= fit.p; ++k) {
        const Matrix A = fit.coefficient(k);
        for (int i = 0; i < fit.d; ++i) {
            for (int j = 0; j < fit.d; ++j) {
                ci.intervals.push_back({k, i, j, A(i, j), A(i, j) - ci.half_width,
                                        A(i, j) + ci.half_width});
            }
        }
    }
    return ci;
}

struct ExactTestResult {
    bool reject = false;
    double statistic = 0.0;
};

/// Max-root test of H0: A^(k) = A^(k)-dagger for all k; rejects when
/// sqrt(T) max |A_hat - A_dagger| exceeds C*.
inline ExactTestResult exact_test(const PostSelectionFit& fit,
                                  const VarModel& hypothesized, double c_star,
                                  int T) {
    hypothesized.check_shapes();
    if (hypothesized.order() != fit.p || hypothesized.dim() != fit.d) {
        throw std::invalid_argument("hypothesis shape differs from the fit");
    }
    bool any_nonzero = false;
    for (const Matrix& A : hypothesized.coefficients) {
        if (A.cwiseAbs().maxCoeff() > 0.0) any_nonzero = true;
    }
    if (!any_nonzero) {
        throw std::invalid_argument("exact test requires a nonzero hypothesis");
    }
    ExactTestResult result;
    for (int k = 1; k <= fit.p; ++k) {
        const Matrix diff =
            fit.coefficient(k) - hypothesized.coefficients[static_cast<std::size_t>(k - 1)];
        result.statistic = std::max(result.statistic, diff.cwiseAbs().maxCoeff());
    }
    result.statistic *= std::sqrt(static_cast<double>(T));
    result.reject = result.statistic > c_star;
    return result;
}

/// AR-sieve comparator: resample centered fit residuals i.i.d., regenerate a
/// series recursively under the fitted model (100-sample burn-in), re-run the
/// full estimation pipeline at the original (lambda, b_T) and form the same
/// max root over all entries. Valid only under i.i.d. innovations; exercised
/// here as the baseline the wild bootstrap is measured against. Replicates
/// producing non-finite or exploding series are redrawn; more than 10*B
/// rejections is an error.
inline BootstrapDraws ar_sieve_bootstrap(const PostSelectionFit& fit, const Matrix& X,
                                         int B, double alpha, std::uint64_t seed,
                                         int burn_in = 100) {
    if (B < 1) throw std::invalid_argument("need at least one bootstrap replicate");
    const int T = static_cast<int>(X.rows());
    const int p = fit.p, d = fit.d;
    if (T != fit.T || static_cast<int>(X.cols()) != d) {
        throw std::invalid_argument("data shape differs from the fit");
    }
    const VarModel model = fit.fitted_model();
    Matrix resid(T - p, d);
    for (int t = p; t < T; ++t) {  // 0-based rows p..T-1
        Vector pred = Vector::Zero(d);
        for (int k = 1; k <= p; ++k) {
            pred += model.coefficients[static_cast<std::size_t>(k - 1)] *
                    X.row(t - k).transpose();
        }
        resid.row(t - p) = X.row(t) - pred.transpose();
    }
    resid.rowwise() -= resid.colwise().mean();
    const int n_resid = T - p;
    const double sqrt_T = std::sqrt(static_cast<double>(T));

    BootstrapDraws draws;
    draws.alpha = alpha;
    draws.B = B;
    draws.seed = seed;
    draws.psi.assign(static_cast<std::size_t>(B), 0.0);
    std::atomic<int> rejected{0};
    parallel_for(B, [&](int b) {
        Rng rng(seed, static_cast<std::uint64_t>(b));
        const int total = burn_in + T;
        Matrix xb(total, d);
        while (true) {
            bool ok = true;
            for (int t = 0; t < total; ++t) {
                Vector v = resid.row(static_cast<Eigen::Index>(
                                         rng.uniform_index(static_cast<std::uint64_t>(n_resid))))
                               .transpose();
                for (int k = 1; k <= p; ++k) {
                    if (t - k >= 0) {
                        v += model.coefficients[static_cast<std::size_t>(k - 1)] *
                             xb.row(t - k).transpose();
                    }
                }
                if (!v.allFinite() || v.cwiseAbs().maxCoeff() > 1e8) {
                    ok = false;
                    break;
                }
                xb.row(t) = v.transpose();
            }
            if (ok) break;
            if (rejected.fetch_add(1) + 1 > 10 * B) {
                throw std::runtime_error(
                    "AR-sieve bootstrap: unstable fitted model, too many "
                    "rejected replicates");
            }
        }
        // Re-run the whole estimation pipeline (Lasso, threshold, OLS refit)
        // on the regenerated series: the resampled selection step is what
        // lets this comparator register estimator instability.
        const PostSelectionFit refit =
            post_selection_fit(xb.bottomRows(T), p, fit.lambda, fit.b_T);
        draws.psi[static_cast<std::size_t>(b)] =
            sqrt_T * (refit.refit_S - fit.refit_S).cwiseAbs().maxCoeff();
    });
    draws.rejected = rejected.load();
    draws.c_star = bootstrap_quantile(draws.psi, alpha);
    return draws;
}

}  // namespace varinfer
