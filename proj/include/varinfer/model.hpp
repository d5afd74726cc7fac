#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <stdexcept>
#include <string>
#include <vector>

#include "varinfer/linalg.hpp"

namespace varinfer {

/// VAR(p) coefficient model. Stored as the coefficient matrices A^(1)..A^(p);
/// the stacked pd x d matrix S = [A^(1)T; ...; A^(p)T] and the pd x pd
/// companion matrix are derived views.
struct VarModel {
    std::vector<Matrix> coefficients;  // p matrices, each d x d

    int order() const { return static_cast<int>(coefficients.size()); }
    int dim() const {
        return coefficients.empty() ? 0 : static_cast<int>(coefficients[0].rows());
    }

    void check_shapes() const {
        if (coefficients.empty()) throw std::invalid_argument("order must be >= 1");
        const int d = dim();
        for (const Matrix& A : coefficients) {
            if (A.rows() != d || A.cols() != d || !A.allFinite()) {
                throw std::invalid_argument("coefficient matrices must be finite d x d");
            }
        }
    }

    /// Stacked matrix S with S[(k-1)d + j][i] = A^(k)_{ij}.
    Matrix stacked() const {
        const int p = order(), d = dim();
        Matrix S(p * d, d);
        for (int k = 0; k < p; ++k) {
            S.middleRows(k * d, d) = coefficients[static_cast<std::size_t>(k)].transpose();
        }
        return S;
    }

    static VarModel from_stacked(const Matrix& S, int p) {
        if (p < 1 || S.rows() % p != 0 || S.rows() / p != S.cols()) {
            throw std::invalid_argument("stacked matrix must be pd x d");
        }
        const int d = static_cast<int>(S.cols());
        VarModel model;
        model.coefficients.reserve(static_cast<std::size_t>(p));
        for (int k = 0; k < p; ++k) {
            model.coefficients.push_back(S.middleRows(k * d, d).transpose());
        }
        return model;
    }

    /// Companion matrix: S^T on the top block row, shifted identities below.
    Matrix companion() const {
        const int p = order(), d = dim();
        Matrix C = Matrix::Zero(p * d, p * d);
        C.topRows(d) = stacked().transpose();
        for (int k = 0; k + 1 < p; ++k) {
            C.block((k + 1) * d, k * d, d, d) = Matrix::Identity(d, d);
        }
        return C;
    }

    double spectral_radius() const {
        Eigen::EigenSolver<Matrix> eig(companion(), /*computeEigenvectors=*/false);
        return eig.eigenvalues().cwiseAbs().maxCoeff();
    }

    bool stable() const { return spectral_radius() < 1.0; }
};

enum class Scenario { var1, var2, var3 };

inline Scenario scenario_from_name(const std::string& name) {
    if (name == "var1") return Scenario::var1;
    if (name == "var2") return Scenario::var2;
    if (name == "var3") return Scenario::var3;
    throw std::invalid_argument("unknown scenario: " + name);
}

/// The banded simulation models: A^(1) tridiagonal with +/-0.3 off-diagonals,
/// A^(2) superdiagonal -0.3, A^(3) subdiagonal -0.4.
inline VarModel standard_scenario(Scenario name, int d) {
    if (d < 2) throw std::invalid_argument("scenario dimension must be >= 2");
    Matrix A1 = Matrix::Zero(d, d);
    for (int i = 0; i + 1 < d; ++i) {
        A1(i, i + 1) = 0.3;
        A1(i + 1, i) = 0.3;
    }
    VarModel model;
    model.coefficients.push_back(A1);
    const int p = name == Scenario::var1 ? 1 : (name == Scenario::var2 ? 2 : 3);
    if (p >= 2) {
        Matrix A2 = Matrix::Zero(d, d);
        for (int i = 0; i + 1 < d; ++i) A2(i, i + 1) = -0.3;
        model.coefficients.push_back(A2);
    }
    if (p >= 3) {
        Matrix A3 = Matrix::Zero(d, d);
        for (int i = 0; i + 1 < d; ++i) A3(i + 1, i) = -0.4;
        model.coefficients.push_back(A3);
    }
    return model;
}

/// Bidiagonal mixing matrix: 1.0 diagonal, 0.5 superdiagonal, -0.5 subdiagonal.
inline Matrix standard_mixing(int d) {
    Matrix theta = Matrix::Identity(d, d);
    for (int i = 0; i + 1 < d; ++i) {
        theta(i, i + 1) = 0.5;
        theta(i + 1, i) = -0.5;
    }
    return theta;
}

/// The 5-dimensional VAR(1) illustration model, completed to a full 5x5
/// matrix by continuing the displayed column pattern (-0.4 in column 4,
/// 0.4 in column 5) in the fifth row. Stability is verified in tests.
inline VarModel example_model() {
    Matrix A(5, 5);
    A << 0.6, 0.4, 0.0, -0.4, 0.4,
        -0.4, 0.6, 0.4, -0.4, 0.4,
        0.0, -0.4, 0.6, -0.4, 0.4,
        0.0, 0.0, -0.4, -0.4, 0.4,
        0.0, 0.0, 0.0, -0.4, 0.4;
    VarModel model;
    model.coefficients.push_back(A);
    return model;
}

inline Matrix example_mixing() {
    Matrix theta(5, 5);
    theta << 1.0, 0.5, 0.0, 0.0, 0.0,
        -0.5, 1.0, 0.5, 0.0, 0.0,
        0.0, -0.5, 1.0, 0.5, 0.0,
        0.0, 0.0, -0.5, 1.0, 0.5,
        0.0, 0.0, 0.0, -0.5, 1.0;
    return theta;
}

}  // namespace varinfer
