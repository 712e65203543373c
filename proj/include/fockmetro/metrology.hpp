#pragma once

#include <limits>
#include <vector>

#include "fock.hpp"

namespace fockmetro {

enum class FisherKind { QFI_pure, QFI_mixed, CFI };

struct FisherResult {
    double value = 0.0;
    FisherKind kind = FisherKind::CFI;
};

// 4 Var(G) for G = Jz or nJz
inline double qfi_pure(const TwoModeState& s, Encoding e) {
    if (std::abs(s.norm() - 1.0) > 1e-8) throw validation_error("qfi_pure: state is not normalized");
    double m1 = 0, m2 = 0;
    for (int i = 0; i <= s.N; ++i)
        for (int j = 0; j <= s.N; ++j) {
            double p = std::norm(s(i, j));
            if (p == 0) continue;
            double g = 2.0 * generator_value(e, i, j);  // i-j or i^2-j^2
            m1 += p * g;
            m2 += p * g * g;
        }
    return std::max(0.0, m2 - m1 * m1);
}

struct MixedQfiOptions {
    double eps_rel = 1e-12;     // pair cutoff relative to the trace
    double psd_tol = 1e-10;     // eigenvalues in [-psd_tol, 0) become 0; below is an error
};

// SLD formula for rho(phi) = e^{i phi G} rho e^{-i phi G}; independent of phi.
inline double qfi_mixed(const DensityMatrix& rho, Encoding e, const MixedQfiOptions& opt = {}) {
    const int d = rho.dim();
    if ((rho.m - rho.m.adjoint()).cwiseAbs().maxCoeff() > 1e-10) throw validation_error("qfi_mixed: rho is not Hermitian");
    Eigen::MatrixXcd H = 0.5 * (rho.m + rho.m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    if (es.info() != Eigen::Success) throw numerical_error("qfi_mixed: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    for (int k = 0; k < d; ++k) {
        if (lam(k) < -opt.psd_tol) throw validation_error("qfi_mixed: rho is not positive semidefinite");
        if (lam(k) < 0) lam(k) = 0;
    }
    const double tr = lam.sum();
    const double eps = opt.eps_rel * tr;
    Eigen::VectorXd g(d);
    for (int i = 0; i <= rho.N; ++i)
        for (int j = 0; j <= rho.N; ++j) g(rho.index(i, j)) = generator_value(e, i, j);
    const Eigen::MatrixXcd& V = es.eigenvectors();
    Eigen::MatrixXcd G = V.adjoint() * g.asDiagonal() * V;
    double F = 0;
    for (int k = 0; k < d; ++k)
        for (int l = k + 1; l < d; ++l) {
            double s = lam(k) + lam(l);
            if (s <= eps) continue;
            double df = lam(k) - lam(l);
            F += 4.0 * df * df / s * std::norm(G(k, l));
        }
    return F;
}

inline constexpr double kCfiProbFloor = 1e-14;
inline constexpr double kCfiSlopeFloor = 1e-10;

inline double cfi(const std::vector<double>& P, const std::vector<double>& dP) {
    if (P.size() != dP.size()) throw validation_error("cfi: probability and derivative lists differ in length");
    double sum = 0, I = 0;
    for (std::size_t k = 0; k < P.size(); ++k) {
        if (P[k] < -1e-12) throw validation_error("cfi: negative probability");
        sum += P[k];
        if (P[k] <= kCfiProbFloor) {
            if (std::abs(dP[k]) <= kCfiSlopeFloor) continue;
            throw numerical_error("cfi: singular outcome (vanishing probability with nonzero slope)");
        }
        I += dP[k] * dP[k] / P[k];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw validation_error("cfi: probabilities do not sum to 1");
    return I;
}

// (<A^2> - <A>^2) / |d<A>/dphi|^2; +inf when the slope vanishes
inline double error_propagation_variance(double mean, double second_moment, double dmean_dphi) {
    if (second_moment < mean * mean - 1e-12) throw validation_error("second moment below squared mean");
    if (dmean_dphi == 0.0) return std::numeric_limits<double>::infinity();
    return std::max(0.0, second_moment - mean * mean) / (dmean_dphi * dmean_dphi);
}

}  // namespace fockmetro
