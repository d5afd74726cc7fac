#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "varinfer/model.hpp"
#include "varinfer/rng.hpp"

namespace varinfer {

enum class InnovationFamily {
    independent,
    product_normal,  // two-factor product e^(t) * e^(t-1)
    product_triple,  // three-factor product e^(t) * e^(t-1) * e^(t-2)
    nonstationary
};

/// How the non-stationary family switches regimes: half-split changes from
/// independent to product-normal at t = floor(T/2); parity alternates between
/// the two at odd/even t.
enum class NonstationaryVariant { halfsplit, parity };

inline InnovationFamily family_from_name(const std::string& name) {
    if (name == "independent") return InnovationFamily::independent;
    if (name == "product_normal") return InnovationFamily::product_normal;
    if (name == "product_triple") return InnovationFamily::product_triple;
    if (name == "nonstationary") return InnovationFamily::nonstationary;
    throw std::invalid_argument("unknown innovation family: " + name);
}

inline std::string family_name(InnovationFamily family) {
    switch (family) {
        case InnovationFamily::independent: return "independent";
        case InnovationFamily::product_normal: return "product_normal";
        case InnovationFamily::product_triple: return "product_triple";
        default: return "nonstationary";
    }
}

struct InnovationSpec {
    InnovationFamily family = InnovationFamily::independent;
    NonstationaryVariant variant = NonstationaryVariant::halfsplit;
    int d = 1;
    Matrix mixing;  // d x d; identity when empty
    std::uint64_t seed = 0;

    Matrix mixing_or_identity() const {
        if (mixing.size() == 0) return Matrix::Identity(d, d);
        if (mixing.rows() != d || mixing.cols() != d || !mixing.allFinite()) {
            throw std::invalid_argument("mixing matrix must be finite d x d");
        }
        return mixing;
    }
};

/// Draws T rows of innovations eps^(t) = Theta * eta^(t). The underlying
/// e^(t)_j are i.i.d. standard normals; eta depends on the family:
/// independent eta_j = e^(t)_j, product-normal eta_j = e^(t)_j * e^(t-1)_j,
/// product-triple eta_j = e^(t)_j * e^(t-1)_j * e^(t-2)_j, non-stationary
/// switches between the independent and two-factor forms. A stream index
/// offsets the RNG so parallel replicates can share one base seed.
inline Matrix make_innovations(const InnovationSpec& spec, int T,
                               std::uint64_t stream = 0) {
    if (spec.d < 1) throw std::invalid_argument("dimension must be >= 1");
    if (T < 2) throw std::invalid_argument("need T >= 2 innovations");
    const Matrix theta = spec.mixing_or_identity();
    Rng rng(spec.seed, stream);
    const int d = spec.d;
    Matrix eps(T, d);
    Vector e_prev2 = Vector::Ones(d), e_prev(d), e_cur(d);
    if (spec.family == InnovationFamily::product_triple) {
        for (int j = 0; j < d; ++j) e_prev2(j) = rng.normal();  // e^(-1)
    }
    for (int j = 0; j < d; ++j) e_prev(j) = rng.normal();  // e^(0)
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < d; ++j) e_cur(j) = rng.normal();
        int factors;  // trailing e-factors multiplied into eta
        switch (spec.family) {
            case InnovationFamily::independent: factors = 1; break;
            case InnovationFamily::product_normal: factors = 2; break;
            case InnovationFamily::product_triple: factors = 3; break;
            default:
                if (spec.variant == NonstationaryVariant::halfsplit) {
                    factors = (t + 1) > T / 2 ? 2 : 1;  // 1-based t > floor(T/2)
                } else {
                    factors = ((t + 1) % 2) == 0 ? 2 : 1;  // even 1-based t
                }
        }
        Vector eta = e_cur;
        if (factors >= 2) eta = (eta.array() * e_prev.array()).matrix();
        if (factors >= 3) eta = (eta.array() * e_prev2.array()).matrix();
        eps.row(t) = (theta * eta).transpose();
        e_prev2 = e_prev;
        e_prev = e_cur;
    }
    return eps;
}

/// Runs the VAR recursion x^(t) = sum_j A^(j) x^(t-j) + eps^(t) from a zero
/// initial state, discarding the first burn_in rows. Deterministic for fixed
/// (spec.seed, stream).
inline Matrix generate_var(const VarModel& model, const InnovationSpec& spec, int T,
                           int burn_in = 500, std::uint64_t stream = 0) {
    model.check_shapes();
    if (model.dim() != spec.d) {
        throw std::invalid_argument("model and innovation dimensions differ");
    }
    const double rho = model.spectral_radius();
    if (rho >= 1.0) {
        throw std::invalid_argument("unstable VAR model: spectral radius " +
                                    std::to_string(rho) + " >= 1");
    }
    if (T < 1 || burn_in < 0) throw std::invalid_argument("invalid T or burn_in");
    const int p = model.order(), d = model.dim();
    const int total = T + burn_in;
    const Matrix eps = make_innovations(spec, total, stream);
    Matrix x = Matrix::Zero(total, d);
    for (int t = 0; t < total; ++t) {
        Vector v = eps.row(t).transpose();
        for (int j = 1; j <= p; ++j) {
            if (t - j >= 0) {
                v += model.coefficients[static_cast<std::size_t>(j - 1)] *
                     x.row(t - j).transpose();
            }
        }
        x.row(t) = v.transpose();
    }
    return x.bottomRows(T);
}

struct WhiteNoiseDiagnostics {
    Matrix lag0_covariance;                 // d x d sample covariance
    std::vector<double> max_cross_covariance;  // lags 1..max_lag
};

/// Sample covariance at lag 0 and the max absolute entry of the sample
/// cross-covariance at each lag 1..max_lag.
inline WhiteNoiseDiagnostics white_noise_diagnostics(const Matrix& samples,
                                                     int max_lag) {
    const int T = static_cast<int>(samples.rows());
    if (max_lag < 1 || T <= max_lag) {
        throw std::invalid_argument("need T > max_lag >= 1");
    }
    const Matrix centered = samples.rowwise() - samples.colwise().mean();
    WhiteNoiseDiagnostics diag;
    diag.lag0_covariance = centered.transpose() * centered / static_cast<double>(T);
    diag.max_cross_covariance.reserve(static_cast<std::size_t>(max_lag));
    for (int lag = 1; lag <= max_lag; ++lag) {
        const Matrix cov = centered.topRows(T - lag).transpose() *
                           centered.bottomRows(T - lag) / static_cast<double>(T);
        diag.max_cross_covariance.push_back(cov.cwiseAbs().maxCoeff());
    }
    return diag;
}

}  // namespace varinfer
