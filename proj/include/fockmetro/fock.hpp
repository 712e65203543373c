#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <mutex>
#include <vector>

#include "common.hpp"

namespace fockmetro {

// Two-mode pure state on the (N+1)^2 Fock grid, row-major k = i*(N+1)+j.
struct TwoModeState {
    int N = 1;
    std::vector<cplx> amp;

    TwoModeState() : TwoModeState(1) {}
    explicit TwoModeState(int cutoff) : N(cutoff) {
        if (cutoff < 1) throw validation_error("cutoff N must be >= 1");
        amp.assign(std::size_t(N + 1) * (N + 1), cplx{});
    }

    int dim() const { return (N + 1) * (N + 1); }
    std::size_t index(int i, int j) const { return std::size_t(i) * (N + 1) + j; }
    cplx& operator()(int i, int j) { return amp[index(i, j)]; }
    const cplx& operator()(int i, int j) const { return amp[index(i, j)]; }

    double norm() const {
        double s = 0;
        for (auto& c : amp) s += std::norm(c);
        return std::sqrt(s);
    }

    double mean_photon() const {
        double s = 0;
        for (int i = 0; i <= N; ++i)
            for (int j = 0; j <= N; ++j) s += (i + j) * std::norm((*this)(i, j));
        return s;
    }

    // largest i+j carrying amplitude; -1 for the zero vector
    int max_total() const {
        int m = -1;
        for (int i = 0; i <= N; ++i)
            for (int j = 0; j <= N; ++j)
                if ((*this)(i, j) != cplx{}) m = std::max(m, i + j);
        return m;
    }

    TwoModeState embedded(int M) const {
        if (M < N) {
            for (int i = 0; i <= N; ++i)
                for (int j = 0; j <= N; ++j)
                    if ((i > M || j > M) && (*this)(i, j) != cplx{})
                        throw validation_error("cannot shrink cutoff below populated kets");
        }
        TwoModeState out(M);
        for (int i = 0; i <= std::min(N, M); ++i)
            for (int j = 0; j <= std::min(N, M); ++j) out(i, j) = (*this)(i, j);
        return out;
    }

    void validate(double tol = 1e-12) const {
        if (int(amp.size()) != dim()) throw validation_error("amplitude vector has wrong size");
        if (std::abs(norm() - 1.0) > tol) throw validation_error("state is not normalized");
    }
};

inline TwoModeState fock_basis(int N, int i, int j) {
    if (i < 0 || j < 0 || i > N || j > N) throw validation_error("Fock index outside [0,N]");
    TwoModeState s(N);
    s(i, j) = 1.0;
    return s;
}

enum class OpLabel { Jx, Jy, Jz, n, nJz };

inline OpLabel parse_op_label(const std::string& s) {
    if (s == "Jx") return OpLabel::Jx;
    if (s == "Jy") return OpLabel::Jy;
    if (s == "Jz") return OpLabel::Jz;
    if (s == "n") return OpLabel::n;
    if (s == "nJz") return OpLabel::nJz;
    throw validation_error("unknown operator label '" + s + "'");
}

// Dense operator in the |ij> basis.  Off-diagonal J's from a^dag b and a b^dag.
inline Eigen::MatrixXcd build_operator(int N, OpLabel label) {
    if (N < 1) throw validation_error("cutoff N must be >= 1");
    const int d = (N + 1) * (N + 1);
    auto k = [N](int i, int j) { return i * (N + 1) + j; };
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(d, d);
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j) {
            switch (label) {
                case OpLabel::Jz: M(k(i, j), k(i, j)) = 0.5 * (i - j); break;
                case OpLabel::n: M(k(i, j), k(i, j)) = i + j; break;
                case OpLabel::nJz: M(k(i, j), k(i, j)) = 0.5 * (i + j) * (i - j); break;
                case OpLabel::Jx:
                case OpLabel::Jy: {
                    // a^dag b |i,j> = sqrt((i+1) j) |i+1,j-1>
                    if (i < N && j > 0) {
                        double a = 0.5 * std::sqrt(double(i + 1) * j);
                        cplx up = label == OpLabel::Jx ? cplx(a) : cplx(0, -a);
                        M(k(i + 1, j - 1), k(i, j)) += up;
                        M(k(i, j), k(i + 1, j - 1)) += std::conj(up);
                    }
                    break;
                }
            }
        }
    return M;
}

inline TwoModeState apply_phase(TwoModeState s, Encoding e, double phi) {
    for (int i = 0; i <= s.N; ++i)
        for (int j = 0; j <= s.N; ++j) {
            if (s(i, j) == cplx{}) continue;
            s(i, j) *= std::polar(1.0, phi * generator_value(e, i, j));
        }
    return s;
}

inline TwoModeState apply_linear_phase(TwoModeState s, double phi) { return apply_phase(std::move(s), Encoding::linear, phi); }
inline TwoModeState apply_nonlinear_phase(TwoModeState s, double phi) { return apply_phase(std::move(s), Encoding::nonlinear, phi); }

enum class BSDirection { forward, inverse };  // exp(-i pi/2 Jx), exp(+i pi/2 Jx)

namespace detail {

// exp(sign * i pi/2 Jx) restricted to the block with s photons, basis |i, s-i>, i = 0..s
inline Eigen::MatrixXcd bs_block_compute(int s, BSDirection dir) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(s + 1, s + 1);
    for (int i = 0; i < s; ++i) {
        double a = 0.5 * std::sqrt(double(i + 1) * (s - i));
        J(i + 1, i) = a;
        J(i, i + 1) = a;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double sign = dir == BSDirection::inverse ? 1.0 : -1.0;
    Eigen::VectorXcd ph(s + 1);
    for (int k = 0; k <= s; ++k) {
        // spectrum is exactly {-s/2, ..., s/2}
        double lam = std::round(2.0 * es.eigenvalues()(k)) / 2.0;
        ph(k) = std::polar(1.0, sign * 0.5 * pi * lam);
    }
    const Eigen::MatrixXd& V = es.eigenvectors();
    return V.cast<cplx>() * ph.asDiagonal() * V.transpose().cast<cplx>();
}

}  // namespace detail

inline const Eigen::MatrixXcd& bs_block(int s, BSDirection dir) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, Eigen::MatrixXcd> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(s, dir == BSDirection::inverse ? 1 : 0);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, detail::bs_block_compute(s, dir)).first;
    return it->second;
}

// 50:50 beam splitter.  Output cutoff grows to the largest populated i+j.
inline TwoModeState beam_splitter_50_50(const TwoModeState& in, BSDirection dir) {
    const int M = std::max(in.N, in.max_total());
    TwoModeState out(M);
    const int smax = std::min(2 * in.N, M);
    for (int s = 0; s <= smax; ++s) {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(s + 1);
        bool any = false;
        for (int i = std::max(0, s - in.N); i <= std::min(s, in.N); ++i) {
            v(i) = in(i, s - i);
            any = any || v(i) != cplx{};
        }
        if (!any) continue;
        Eigen::VectorXcd w = bs_block(s, dir) * v;
        for (int i = 0; i <= s; ++i) out(i, s - i) = w(i);
    }
    return out;
}

// Hermitian trace-one operator on the (N+1)^2 grid.
struct DensityMatrix {
    int N = 1;
    Eigen::MatrixXcd m;

    DensityMatrix() : DensityMatrix(1) {}
    explicit DensityMatrix(int cutoff) : N(cutoff) {
        if (cutoff < 1) throw validation_error("cutoff N must be >= 1");
        m = Eigen::MatrixXcd::Zero(dim(), dim());
    }

    static DensityMatrix pure(const TwoModeState& s) {
        DensityMatrix r(s.N);
        Eigen::Map<const Eigen::VectorXcd> v(s.amp.data(), s.dim());
        r.m = v * v.adjoint();
        return r;
    }

    int dim() const { return (N + 1) * (N + 1); }
    int index(int i, int j) const { return i * (N + 1) + j; }
    cplx& operator()(int i, int j, int k, int l) { return m(index(i, j), index(k, l)); }
    const cplx& operator()(int i, int j, int k, int l) const { return m(index(i, j), index(k, l)); }

    double trace() const { return m.trace().real(); }

    double hermiticity_error() const { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }

    void validate(double herm_tol = 1e-12, double tr_tol = 1e-10, double psd_tol = 1e-10) const {
        if (m.rows() != dim() || m.cols() != dim()) throw validation_error("density matrix has wrong size");
        if (hermiticity_error() > herm_tol) throw validation_error("density matrix is not Hermitian");
        if (std::abs(trace() - 1.0) > tr_tol) throw validation_error("density matrix trace is not 1");
        if (min_eigenvalue() < -psd_tol) throw validation_error("density matrix is not positive semidefinite");
    }
};

// U rho U^dag for the 50:50 splitter; only blocks of equal photon number are kept
// when diag_blocks_only is set (enough for number-conserving measurements).
inline DensityMatrix beam_splitter_50_50(const DensityMatrix& in, BSDirection dir, bool diag_blocks_only = false) {
    const int N = in.N;
    const int M = 2 * N;
    DensityMatrix out(M);
    auto block_idx = [](int n, int s) {
        std::vector<int> v;
        for (int i = std::max(0, s - n); i <= std::min(s, n); ++i) v.push_back(i);
        return v;
    };
    for (int s = 0; s <= 2 * N; ++s) {
        auto is = block_idx(N, s);
        for (int t = 0; t <= 2 * N; ++t) {
            if (diag_blocks_only && t != s) continue;
            auto it = block_idx(N, t);
            Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(s + 1, t + 1);
            bool any = false;
            for (int a : is)
                for (int b : it) {
                    B(a, b) = in(a, s - a, b, t - b);
                    any = any || B(a, b) != cplx{};
                }
            if (!any) continue;
            Eigen::MatrixXcd R = bs_block(s, dir) * B * bs_block(t, dir).adjoint();
            for (int a = 0; a <= s; ++a)
                for (int b = 0; b <= t; ++b) out(a, s - a, b, t - b) = R(a, b);
        }
    }
    return out;
}

inline DensityMatrix apply_phase(DensityMatrix r, Encoding e, double phi) {
    const int N = r.N;
    std::vector<cplx> ph(r.dim());
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j) ph[r.index(i, j)] = std::polar(1.0, phi * generator_value(e, i, j));
    for (int a = 0; a < r.dim(); ++a)
        for (int b = 0; b < r.dim(); ++b) r.m(a, b) *= ph[a] * std::conj(ph[b]);
    return r;
}

}  // namespace fockmetro
