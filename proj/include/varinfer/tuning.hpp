#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "varinfer/bootstrap.hpp"
#include "varinfer/estimation.hpp"

namespace varinfer {

/// Default hyper-parameter grids; they span every value the simulation
/// studies end up selecting.
inline std::vector<double> default_lambda_grid() {
    return {0.003, 0.009, 0.0195, 0.039, 0.07, 0.1, 0.131};
}
inline std::vector<double> default_bt_grid() {
    return {0.063, 0.1, 0.131, 0.162, 0.2};
}

/// Per-equation ridge-stabilized least squares (ridge 1e-8 on the Gram
/// diagonal), AIC(p) = T log det(Sigma_eps(p)) + 2 p d^2, argmin over
/// p = 1..p_max. Candidates without enough rows for the OLS are skipped.
inline int select_order_aic(const Matrix& X, int p_max) {
    const int T = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    if (p_max < 1) throw std::invalid_argument("p_max must be >= 1");
    int best_p = -1;
    double best_aic = 0.0;
    for (int p = 1; p <= p_max; ++p) {
        if (T - p < p * d + 1) continue;  // not enough rows for per-equation OLS
        const DesignSystem design = build_design(X, p);
        Matrix gram = design.gram;
        gram.diagonal().array() += 1e-8;
        const Eigen::LDLT<Matrix> solver(gram);
        const Matrix rhs = design.W.transpose() * design.Y / static_cast<double>(T);
        const Matrix S = solver.solve(rhs);
        const Matrix resid = design.Y - design.W * S;
        const Matrix sigma = resid.transpose() * resid /
                             static_cast<double>(design.Y.rows());
        const Eigen::LDLT<Matrix> sig_ldlt(sigma);
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double piv = sig_ldlt.vectorD()(i);
            log_det += std::log(std::max(piv, 1e-300));
        }
        const double aic = T * log_det + 2.0 * p * d * d;
        if (best_p < 0 || aic < best_aic) {
            best_p = p;
            best_aic = aic;
        }
    }
    if (best_p < 0) throw std::invalid_argument("no feasible order candidate");
    return best_p;
}

struct GridPoint {
    double lambda = 0.0, b_T = 0.0, tau = 0.0;
};

struct TuningReport {
    int p = 0;
    double lambda = 0.0, b_T = 0.0, k_T = 0.0;
    int T1 = 0;
    std::vector<GridPoint> grid;
    std::vector<double> entry_bandwidths;  // per (i, j) Theta series
};

/// Per-time squared prediction errors |x^(t) - sum_k A^(k) x^(t-k)|_2^2 for
/// t = T1+p..T (1-based), the terms averaged by the held-out score tau.
inline Vector test_set_errors(const Matrix& X, const VarModel& model, int T1) {
    const int T = static_cast<int>(X.rows());
    const int p = model.order();
    Vector errors(T - T1 - p + 1);
    for (int t = T1 + p; t <= T; ++t) {  // 1-based time
        Vector pred = Vector::Zero(model.dim());
        for (int k = 1; k <= p; ++k) {
            pred += model.coefficients[static_cast<std::size_t>(k - 1)] *
                    X.row(t - k - 1).transpose();
        }
        errors(t - T1 - p) = (X.row(t - 1).transpose() - pred).squaredNorm();
    }
    return errors;
}

/// Held-out prediction error of a fitted model on x^(T1+p)..x^(T):
/// tau = (1/(T - T1)) sum_t |x^(t) - sum_k A^(k) x^(t-k)|_2^2.
inline double test_set_tau(const Matrix& X, const VarModel& model, int T1) {
    const int T = static_cast<int>(X.rows());
    return test_set_errors(X, model, T1).sum() / static_cast<double>(T - T1);
}

/// Train/test-split tuning of (lambda, b_T): fit on x^(1)..x^(T1) with
/// T1 = floor(3T/4), score every grid point by the held-out tau, and select
/// by a paired one-standard-error rule: among grid points whose tau is within
/// one paired standard error of the minimum (the errors are evaluated on the
/// same held-out points, so the comparison pairs per-time terms), the fit
/// with the fewest selected coefficients wins; remaining ties resolve toward
/// the smallest lambda, then the smallest b_T. The parsimony step guards the
/// selection against held-out noise: near-tied grid points that only differ
/// by keeping a few spurious coefficients lose to the sparser fit, while
/// grid points that drop true coefficients sit many paired standard errors
/// above the minimum and stay excluded. Lasso paths reuse warm starts along
/// the descending lambda grid.
inline TuningReport tune_lambda_threshold(const Matrix& X, int p,
                                          std::vector<double> lambda_grid,
                                          std::vector<double> bt_grid,
                                          double tol = 1e-8, int max_iter = 100000) {
    if (lambda_grid.empty() || bt_grid.empty()) {
        throw std::invalid_argument("tuning grids must be non-empty");
    }
    const int T = static_cast<int>(X.rows());
    const int T1 = (3 * T) / 4;
    if (T1 < p + 10 || T1 >= T) throw std::invalid_argument("degenerate train/test split");
    std::sort(lambda_grid.begin(), lambda_grid.end());
    std::sort(bt_grid.begin(), bt_grid.end());
    const DesignSystem design = build_design(X.topRows(T1), p);

    TuningReport report;
    report.p = p;
    report.T1 = T1;
    // lasso paths per column, descending lambda with warm starts
    const int m = p * static_cast<int>(X.cols());
    const int n_lambda = static_cast<int>(lambda_grid.size());
    std::vector<Matrix> lasso_paths(static_cast<std::size_t>(n_lambda));
    {
        Matrix warm = Matrix::Zero(m, design.d);
        for (int li = n_lambda - 1; li >= 0; --li) {
            Matrix S(m, design.d);
            for (int l = 0; l < design.d; ++l) {
                const Vector w = warm.col(l);
                S.col(l) = lasso_column(design, l, lambda_grid[static_cast<std::size_t>(li)],
                                        tol, max_iter, &w)
                               .coef;
            }
            warm = S;
            lasso_paths[static_cast<std::size_t>(li)] = std::move(S);
        }
    }
    std::vector<Vector> cell_errors;
    std::vector<std::vector<int>> cell_signature;  // flattened train supports
    for (int li = 0; li < n_lambda; ++li) {
        for (double bt : bt_grid) {
            const PostSelectionFit fit = post_selection_refit(
                design, lasso_paths[static_cast<std::size_t>(li)],
                lambda_grid[static_cast<std::size_t>(li)], bt);
            Vector errors = test_set_errors(X, fit.fitted_model(), T1);
            const double tau = errors.sum() / static_cast<double>(T - T1);
            report.grid.push_back({lambda_grid[static_cast<std::size_t>(li)], bt, tau});
            cell_errors.push_back(std::move(errors));
            std::vector<int> sig;
            for (const IndexSet& s : fit.supports) {
                for (int j : s.indices()) sig.push_back(j);
                sig.push_back(-1);  // column separator
            }
            cell_signature.push_back(std::move(sig));
        }
    }
    // minimizer (first in ascending (lambda, b_T) order among exact ties)
    std::size_t best = 0;
    for (std::size_t c = 1; c < report.grid.size(); ++c) {
        if (report.grid[c].tau < report.grid[best].tau) best = c;
    }
    // eligible cells: held-out error within one paired standard error of the
    // minimum (the per-time errors share the held-out points, so differences
    // pair up and the systematic gap of a genuinely worse fit dominates its SE)
    const Eigen::Index n_t = cell_errors[best].size();
    std::vector<std::size_t> eligible;
    for (std::size_t c = 0; c < report.grid.size(); ++c) {
        double margin = 0.0;
        if (c != best && n_t > 1) {
            const Vector diff = cell_errors[c] - cell_errors[best];
            const double mean = diff.mean();
            const double sd = std::sqrt((diff.array() - mean).square().sum() /
                                        static_cast<double>(n_t - 1));
            margin = sd * std::sqrt(static_cast<double>(n_t)) /
                     static_cast<double>(T - T1);
        }
        if (report.grid[c].tau <= report.grid[best].tau + margin) eligible.push_back(c);
    }
    // consensus model: the training support signature shared by the most
    // eligible cells; stray signatures (a spurious coefficient kept by one
    // corner of the grid, a true one dropped by another) lose the vote
    std::map<std::vector<int>, int> votes;
    for (std::size_t c : eligible) votes[cell_signature[c]] += 1;
    int best_votes = 0;
    const std::vector<int>* consensus = nullptr;
    for (std::size_t c : eligible) {  // grid order stabilizes count ties
        const int v = votes[cell_signature[c]];
        if (v > best_votes) {
            best_votes = v;
            consensus = &cell_signature[c];
        }
    }
    // within the consensus: smallest lambda, then the b_T in the middle of
    // the range the consensus spans — the fits agree on the training data,
    // and the full-data coefficients shift by sampling noise, so the
    // threshold farthest from both edges of the agreeing range is the least
    // likely to flip a coefficient in or out of the support
    double lambda_min = 0.0;
    bool have_lambda = false;
    for (std::size_t c : eligible) {
        if (cell_signature[c] != *consensus) continue;
        if (!have_lambda || report.grid[c].lambda < lambda_min) {
            have_lambda = true;
            lambda_min = report.grid[c].lambda;
        }
    }
    double bt_lo = 0.0, bt_hi = 0.0;
    bool have_bt = false;
    for (std::size_t c : eligible) {
        if (cell_signature[c] != *consensus || report.grid[c].lambda != lambda_min) {
            continue;
        }
        if (!have_bt) {
            have_bt = true;
            bt_lo = bt_hi = report.grid[c].b_T;
        } else {
            bt_lo = std::min(bt_lo, report.grid[c].b_T);
            bt_hi = std::max(bt_hi, report.grid[c].b_T);
        }
    }
    const double bt_mid = 0.5 * (bt_lo + bt_hi);
    std::size_t chosen = report.grid.size();
    for (std::size_t c : eligible) {
        if (cell_signature[c] != *consensus || report.grid[c].lambda != lambda_min) {
            continue;
        }
        if (chosen == report.grid.size() ||
            std::fabs(report.grid[c].b_T - bt_mid) <
                std::fabs(report.grid[chosen].b_T - bt_mid) ||
            (std::fabs(report.grid[c].b_T - bt_mid) ==
                 std::fabs(report.grid[chosen].b_T - bt_mid) &&
             report.grid[c].b_T > report.grid[chosen].b_T)) {
            chosen = c;
        }
    }
    report.lambda = report.grid[chosen].lambda;
    report.b_T = report.grid[chosen].b_T;
    return report;
}

/// Flat-top empirical bandwidth rule for one scalar series: with
/// rho_hat(s) the sample autocorrelations, find the smallest m >= 1 such that
/// |rho_hat(m + k)| < 2 sqrt(log10(n)/n) for k = 0..K_N - 1 with
/// K_N = max(5, ceil(sqrt(log10(n)))); the bandwidth is max(1, 2m), capped at
/// sqrt(n). Constant series get bandwidth 1.
inline double flat_top_bandwidth(const Vector& series) {
    const int n = static_cast<int>(series.size());
    if (n < 4) return 1.0;
    const double mean = series.mean();
    const Vector centered = series.array() - mean;
    const double var0 = centered.squaredNorm() / n;
    if (var0 <= 0.0) return 1.0;
    const double cap = std::sqrt(static_cast<double>(n));
    const int K_N = std::max(5, static_cast<int>(std::ceil(std::sqrt(std::log10(
                                     static_cast<double>(n))))));
    const double threshold = 2.0 * std::sqrt(std::log10(static_cast<double>(n)) / n);
    const int max_m = std::min(n - K_N - 1, static_cast<int>(cap) + K_N);
    auto rho = [&](int s) {
        double acc = 0.0;
        for (int t = 0; t + s < n; ++t) acc += centered(t) * centered(t + s);
        return acc / (n * var0);
    };
    for (int m = 1; m <= max_m; ++m) {
        bool all_small = true;
        for (int k = 0; k < K_N; ++k) {
            if (std::fabs(rho(m + k)) >= threshold) {
                all_small = false;
                break;
            }
        }
        if (all_small) return std::min(cap, std::max(1.0, 2.0 * m));
    }
    return cap;
}

/// Kernel bandwidth for the wild bootstrap: the flat-top rule applied to each
/// scalar second-order residual series Theta^(t)_{ij}, then the median over
/// all pd x d entries.
inline double select_bandwidth(const PostSelectionFit& fit,
                               const DesignSystem& design) {
    const SecondOrderResiduals res = second_order_residuals(fit, design);
    const int n = res.n_terms();
    std::vector<double> bandwidths;
    bandwidths.reserve(static_cast<std::size_t>(design.p * design.d) * design.d);
    Vector series(n);
    for (int i = 0; i < design.p * design.d; ++i) {
        for (int j = 0; j < design.d; ++j) {
            series = res.Z.col(i).array() * res.R.col(j).array();
            bandwidths.push_back(flat_top_bandwidth(series));
        }
    }
    std::vector<double> sorted = bandwidths;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = sorted.size();
    return k % 2 == 1 ? sorted[k / 2]
                      : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
}

/// As above, but also records the per-entry bandwidths in a report.
inline TuningReport bandwidth_report(const PostSelectionFit& fit,
                                     const DesignSystem& design) {
    const SecondOrderResiduals res = second_order_residuals(fit, design);
    TuningReport report;
    report.p = design.p;
    const int n = res.n_terms();
    Vector series(n);
    for (int i = 0; i < design.p * design.d; ++i) {
        for (int j = 0; j < design.d; ++j) {
            series = res.Z.col(i).array() * res.R.col(j).array();
            report.entry_bandwidths.push_back(flat_top_bandwidth(series));
        }
    }
    std::vector<double> sorted = report.entry_bandwidths;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = sorted.size();
    report.k_T = k % 2 == 1 ? sorted[k / 2]
                            : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
    return report;
}

}  // namespace varinfer
