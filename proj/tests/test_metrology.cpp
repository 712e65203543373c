#include <gtest/gtest.h>

#include <random>

#include <fockmetro/loss.hpp>
#include <fockmetro/metrology.hpp>

using namespace fockmetro;

namespace {

Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (A + A.adjoint()));
    Eigen::VectorXd l = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().adjoint();
}

// Uhlmann fidelity
double fidelity(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd sa = psd_sqrt(a);
    Eigen::MatrixXcd inner = psd_sqrt(sa * b * sa);
    const double t = inner.trace().real();
    return t * t;
}

TwoModeState random_state(int N, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    TwoModeState s(N);
    for (auto& c : s.amp) c = cplx(g(rng), g(rng));
    const double n = s.norm();
    for (auto& c : s.amp) c /= n;
    return s;
}

}  // namespace

TEST(Qfi, PureFormulaMatchesMixedSolverOnPureStates) {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 5; ++rep)
        for (auto e : {Encoding::linear, Encoding::nonlinear}) {
            auto s = random_state(3, rng);
            const double a = qfi_pure(s, e), b = qfi_mixed(DensityMatrix::pure(s), e);
            EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, a));
        }
}

TEST(Qfi, PureQfiOfNoon) {
    TwoModeState s(4);
    s(4, 0) = std::sqrt(0.5);
    s(0, 4) = std::sqrt(0.5);
    EXPECT_NEAR(qfi_pure(s, Encoding::linear), 16.0, 1e-12);
    EXPECT_NEAR(qfi_pure(s, Encoding::nonlinear), 256.0, 1e-12);
    EXPECT_THROW(qfi_pure(TwoModeState(2), Encoding::linear), validation_error);
}

// Bures metric: F = 8 (1 - sqrt(fid)) / dphi^2
TEST(Qfi, MixedQfiMatchesFidelityFiniteDifference) {
    for (auto e : {Encoding::linear, Encoding::nonlinear}) {
        const DensityMatrix rho = apply_loss(optimal_state({6, 2.0, e}), LossChannel(0.9, 0.9));
        const double F = qfi_mixed(rho, e);
        const double h = 1e-3;
        const DensityMatrix r2 = apply_phase(rho, e, h);
        const double fb = 8 * (1 - std::sqrt(fidelity(rho.m, r2.m))) / (h * h);
        EXPECT_NEAR(F, fb, 2e-3 * F) << to_string(e);
    }
}

TEST(Qfi, MixedQfiIsPhaseIndependentAndBoundedByPure) {
    const auto st = optimal_state({5, 3.0, Encoding::linear});
    const DensityMatrix rho = apply_loss(st, LossChannel(0.7, 0.95));
    const double F = qfi_mixed(rho, Encoding::linear);
    EXPECT_NEAR(F, qfi_mixed(apply_phase(rho, Encoding::linear, 0.37), Encoding::linear), 1e-9 * F);
    EXPECT_LE(F, qfi_pure(st, Encoding::linear) + 1e-9);
}

TEST(Qfi, NegativeEigenvalueHandling) {
    DensityMatrix r(1);
    r(0, 0, 0, 0) = 0.5 + 1e-11;
    r(1, 0, 1, 0) = 0.5;
    r(0, 1, 0, 1) = -1e-11;
    EXPECT_NO_THROW(qfi_mixed(r, Encoding::linear));
    r(0, 1, 0, 1) = -1e-8;
    EXPECT_THROW(qfi_mixed(r, Encoding::linear), validation_error);
    DensityMatrix nh(1);
    nh(0, 0, 1, 0) = 0.1;
    nh(0, 0, 0, 0) = 1;
    EXPECT_THROW(qfi_mixed(nh, Encoding::linear), validation_error);
}

TEST(Cfi, BernoulliAndErrors) {
    const double p = 0.3, dp = 0.8;
    EXPECT_NEAR(cfi({p, 1 - p}, {dp, -dp}), dp * dp / (p * (1 - p)), 1e-12);
    EXPECT_DOUBLE_EQ(cfi({1.0, 0.0}, {0.0, 0.0}), 0.0);
    EXPECT_THROW(cfi({1.0, 0.0}, {-0.5, 0.5}), numerical_error);
    EXPECT_THROW(cfi({0.5, 0.5}, {0.0}), validation_error);
    EXPECT_THROW(cfi({1.2, -0.2}, {0.0, 0.0}), validation_error);
    EXPECT_THROW(cfi({0.5, 0.4}, {0.0, 0.0}), validation_error);
}

TEST(Cfi, ErrorPropagation) {
    EXPECT_TRUE(std::isinf(error_propagation_variance(0.2, 0.5, 0.0)));
    EXPECT_NEAR(error_propagation_variance(0.0, 1.0, 2.0), 0.25, 1e-15);
    EXPECT_THROW(error_propagation_variance(1.0, 0.5, 1.0), validation_error);
}
