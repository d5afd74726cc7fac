#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace varinfer {

/// Multiplier-correlation kernel for the wild bootstrap. The default is the
/// Gaussian kernel K(x) = exp(-x^2/2); a user-tabulated kernel is given on a
/// grid of nonnegative abscissae and evaluated by linear interpolation
/// (symmetric, zero beyond the last grid point).
struct KernelSpec {
    enum class Kind { gaussian, user_tabulated };

    Kind kind = Kind::gaussian;
    double bandwidth = 1.0;  // k_T
    std::vector<double> abscissae;  // tabulated kernels only, increasing, starts at 0
    std::vector<double> values;

    static KernelSpec gaussian(double bandwidth) {
        KernelSpec spec;
        spec.kind = Kind::gaussian;
        spec.bandwidth = bandwidth;
        spec.validate();
        return spec;
    }

    static KernelSpec tabulated(std::vector<double> xs, std::vector<double> ks,
                                double bandwidth) {
        KernelSpec spec;
        spec.kind = Kind::user_tabulated;
        spec.bandwidth = bandwidth;
        spec.abscissae = std::move(xs);
        spec.values = std::move(ks);
        spec.validate();
        return spec;
    }

    /// K(x). Symmetric in x; the bandwidth is applied by callers.
    double operator()(double x) const {
        x = std::fabs(x);
        if (kind == Kind::gaussian) return std::exp(-0.5 * x * x);
        if (x >= abscissae.back()) return 0.0;
        auto hi = std::lower_bound(abscissae.begin(), abscissae.end(), x);
        if (hi == abscissae.begin()) return values.front();
        const std::size_t i = static_cast<std::size_t>(hi - abscissae.begin());
        const double x0 = abscissae[i - 1], x1 = abscissae[i];
        const double w = (x - x0) / (x1 - x0);
        return (1.0 - w) * values[i - 1] + w * values[i];
    }

    /// Checks K(0) = 1, nonnegativity and monotone decrease on [0, inf) over a
    /// grid of 1000 points. Throws std::invalid_argument on violation.
    void validate() const {
        if (!(bandwidth > 0.0)) {
            throw std::invalid_argument("kernel bandwidth must be positive");
        }
        if (kind == Kind::user_tabulated) {
            if (abscissae.size() < 2 || abscissae.size() != values.size()) {
                throw std::invalid_argument("tabulated kernel needs matching grids");
            }
            if (abscissae.front() != 0.0) {
                throw std::invalid_argument("tabulated kernel grid must start at 0");
            }
            for (std::size_t i = 1; i < abscissae.size(); ++i) {
                if (abscissae[i] <= abscissae[i - 1]) {
                    throw std::invalid_argument("tabulated kernel grid must increase");
                }
            }
        }
        const double x_max =
            kind == Kind::gaussian ? 12.0 : abscissae.back() * (1.0 + 1e-12);
        const int n_grid = 1000;
        double prev = (*this)(0.0);
        if (std::fabs(prev - 1.0) > 1e-12) {
            throw std::invalid_argument("kernel must satisfy K(0) = 1");
        }
        for (int i = 1; i <= n_grid; ++i) {
            const double k = (*this)(x_max * i / n_grid);
            if (k < 0.0) throw std::invalid_argument("kernel must be nonnegative");
            if (k > prev + 1e-12) {
                throw std::invalid_argument("kernel must be non-increasing on [0, inf)");
            }
            prev = k;
        }
    }

    std::string kind_name() const {
        return kind == Kind::gaussian ? "gaussian" : "user_tabulated";
    }
};

/// K(x) with the spec's kernel; exposed as a free function for symmetry with
/// the rest of the API.
inline double kernel_eval(const KernelSpec& spec, double x) { return spec(x); }

}  // namespace varinfer
