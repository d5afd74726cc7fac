#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "varinfer/innovations.hpp"
#include "varinfer/model.hpp"

using namespace varinfer;

TEST_CASE("scenario var1 matches the banded layout") {
    const VarModel model = standard_scenario(Scenario::var1, 3);
    REQUIRE(model.order() == 1);
    Matrix expected(3, 3);
    expected << 0, 0.3, 0, 0.3, 0, 0.3, 0, 0.3, 0;
    CHECK((model.coefficients[0] - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scenario var3 third lag is purely subdiagonal") {
    const VarModel model = standard_scenario(Scenario::var3, 6);
    REQUIRE(model.order() == 3);
    const Matrix& A3 = model.coefficients[2];
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            if (i == j + 1) {
                REQUIRE(A3(i, j) == -0.4);
            } else {
                REQUIRE(A3(i, j) == 0.0);
            }
        }
    }
}

TEST_CASE("all scenarios are stable") {
    for (const Scenario s : {Scenario::var1, Scenario::var2, Scenario::var3}) {
        for (const int d : {2, 5, 20, 60}) {
            REQUIRE(standard_scenario(s, d).spectral_radius() < 1.0);
        }
    }
}

TEST_CASE("completed 5-dim example model is stable") {
    const VarModel model = example_model();
    CHECK(model.coefficients[0](0, 1) == 0.4);
    CHECK(model.spectral_radius() < 1.0);
}

TEST_CASE("innovations have zero mean") {
    InnovationSpec spec;
    spec.family = InnovationFamily::independent;
    spec.d = 3;
    spec.seed = 11;
    const int T = 100000;
    const Matrix eps = make_innovations(spec, T);
    const double se = 1.0 / std::sqrt(static_cast<double>(T));
    for (int j = 0; j < 3; ++j) {
        REQUIRE(std::fabs(eps.col(j).mean()) < 3.0 * se);
    }
}

TEST_CASE("product-normal innovations have unit variance") {
    InnovationSpec spec;
    spec.family = InnovationFamily::product_normal;
    spec.d = 2;
    spec.seed = 12;
    const int T = 100000;
    const Matrix eps = make_innovations(spec, T);
    // Var(e * e') = 1; the variance estimator of a kurtotic sequence needs its
    // own empirical standard error.
    for (int j = 0; j < 2; ++j) {
        const auto sq = eps.col(j).array().square();
        const double var = sq.mean();
        const double se = std::sqrt((sq - var).square().mean() / T);
        REQUIRE(std::fabs(var - 1.0) < 4.0 * se);
    }
}

TEST_CASE("every family is white noise and shares the mixed covariance") {
    const int d = 4, T = 100000;
    for (const auto family : {InnovationFamily::independent,
                              InnovationFamily::product_normal,
                              InnovationFamily::nonstationary}) {
        InnovationSpec spec;
        spec.family = family;
        spec.d = d;
        spec.mixing = standard_mixing(d);
        spec.seed = 21;
        const Matrix eps = make_innovations(spec, T);
        const auto diag = white_noise_diagnostics(eps, 3);
        // lagged cross-covariances vanish; the products are kurtotic, so each
        // pair is held to its own empirical standard error
        for (int s = 1; s <= 3; ++s) {
            double max_abs = 0.0;
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) {
                    const int n = T - s;
                    const auto prod = eps.col(i).head(n).array() *
                                      eps.col(j).tail(n).array();
                    const double mean = prod.mean();
                    const double se =
                        std::sqrt((prod - mean).square().mean() / n);
                    REQUIRE(std::fabs(mean) < 4.5 * se + 1e-4);
                    max_abs = std::max(max_abs, std::fabs(mean));
                }
            }
            REQUIRE(diag.max_cross_covariance[static_cast<std::size_t>(s - 1)] ==
                    Catch::Approx(max_abs).margin(1e-3));
        }
        const Matrix target = spec.mixing * spec.mixing.transpose();
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                const auto prod = eps.col(i).array() * eps.col(j).array();
                const double se =
                    std::sqrt((prod - prod.mean()).square().mean() / T);
                REQUIRE(std::fabs(diag.lag0_covariance(i, j) - target(i, j)) <
                        4.0 * std::max(se, 1e-3));
            }
        }
    }
}

TEST_CASE("parity variant alternates regimes") {
    InnovationSpec spec;
    spec.family = InnovationFamily::nonstationary;
    spec.variant = NonstationaryVariant::parity;
    spec.d = 2;
    spec.seed = 5;
    const Matrix eps = make_innovations(spec, 50000);
    const auto diag = white_noise_diagnostics(eps, 2);
    for (double m : diag.max_cross_covariance) {
        REQUIRE(m < 4.0 / std::sqrt(50000.0));
    }
}

TEST_CASE("diagnostics of a constant series") {
    const Matrix constant = Matrix::Ones(100, 2) * 3.0;
    const auto diag = white_noise_diagnostics(constant, 2);
    CHECK(diag.lag0_covariance.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero coefficients reproduce the innovations") {
    VarModel model;
    model.coefficients.push_back(Matrix::Zero(3, 3));
    InnovationSpec spec;
    spec.d = 3;
    spec.seed = 9;
    const Matrix x = generate_var(model, spec, 200, /*burn_in=*/0);
    const Matrix eps = make_innovations(spec, 200);
    CHECK((x - eps).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero innovations give an identically zero series") {
    VarModel model = standard_scenario(Scenario::var1, 3);
    InnovationSpec spec;
    spec.d = 3;
    spec.mixing = Matrix::Zero(3, 3);
    spec.seed = 1;
    const Matrix x = generate_var(model, spec, 100, 50);
    CHECK(x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generation is deterministic in the seed") {
    const VarModel model = standard_scenario(Scenario::var2, 4);
    InnovationSpec spec;
    spec.d = 4;
    spec.mixing = standard_mixing(4);
    spec.seed = 42;
    const Matrix a = generate_var(model, spec, 300);
    const Matrix b = generate_var(model, spec, 300);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unstable models are rejected") {
    VarModel model;
    model.coefficients.push_back(Matrix::Identity(2, 2) * 1.05);
    InnovationSpec spec;
    spec.d = 2;
    CHECK_THROWS_AS(generate_var(model, spec, 100), std::invalid_argument);
}

TEST_CASE("AR(1) with 0.5 I has lag-1 autocorrelation 0.5") {
    VarModel model;
    model.coefficients.push_back(Matrix::Identity(2, 2) * 0.5);
    InnovationSpec spec;
    spec.d = 2;
    spec.seed = 77;
    const int T = 10000;
    const Matrix x = generate_var(model, spec, T);
    for (int j = 0; j < 2; ++j) {
        const Vector col = x.col(j).array() - x.col(j).mean();
        const double rho = col.head(T - 1).dot(col.tail(T - 1)) / col.squaredNorm();
        REQUIRE(std::fabs(rho - 0.5) < 0.05);
    }
}

TEST_CASE("example-model OLS recovers A_12 = 0.40") {
    const VarModel model = example_model();
    InnovationSpec spec;
    spec.d = 5;
    spec.mixing = example_mixing();
    spec.seed = 3;
    const int T = 10000;
    const Matrix x = generate_var(model, spec, T);
    // plain least squares on the lag-1 design
    const Matrix W = x.topRows(T - 1);
    const Matrix Y = x.bottomRows(T - 1);
    const Matrix A_hat =
        (W.transpose() * W).ldlt().solve(W.transpose() * Y).transpose();
    CHECK(std::fabs(A_hat(0, 1) - 0.40) < 0.05);
}
