#pragma once

#include "probe_states.hpp"

namespace fockmetro {

struct LossChannel {
    double T1 = 1.0, T2 = 1.0;

    LossChannel() = default;
    LossChannel(double t1, double t2) : T1(t1), T2(t2) { validate(); }

    double R1() const { return 1.0 - T1; }
    double R2() const { return 1.0 - T2; }
    // T = cos^2(eta/2)
    double eta1() const { return 2.0 * std::acos(std::sqrt(T1)); }
    double eta2() const { return 2.0 * std::acos(std::sqrt(T2)); }
    bool identity() const { return T1 == 1.0 && T2 == 1.0; }

    void validate() const {
        if (!(T1 >= 0.0 && T1 <= 1.0 && T2 >= 0.0 && T2 <= 1.0))
            throw validation_error("transmissions must lie in [0,1]");
    }
};

namespace detail {
// amplitude of losing k photons from n: sqrt(C(n,k) T^(n-k) R^k)
inline double kraus_amp(int n, int k, double T, double R) {
    return std::sqrt(binom(n, k) * ipow(T, n - k) * ipow(R, k));
}
}  // namespace detail

// Kraus-sum form of the two fictitious beam splitters.
inline DensityMatrix apply_loss(const DensityMatrix& in, const LossChannel& ch) {
    ch.validate();
    const int N = in.N;
    const double T1 = ch.T1, T2 = ch.T2, R1 = ch.R1(), R2 = ch.R2();
    DensityMatrix out(N);
    // per-ket weights: w[n][k] = kraus_amp(n, k)
    std::vector<std::vector<double>> w1(N + 1, std::vector<double>(N + 1)), w2 = w1;
    for (int n = 0; n <= N; ++n)
        for (int k = 0; k <= n; ++k) {
            w1[n][k] = detail::kraus_amp(n, k, T1, R1);
            w2[n][k] = detail::kraus_amp(n, k, T2, R2);
        }
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j)
            for (int ip = 0; ip <= N; ++ip)
                for (int jp = 0; jp <= N; ++jp) {
                    const cplx r = in(i, j, ip, jp);
                    if (r == cplx{}) continue;
                    for (int k = 0; k <= std::min(i, ip); ++k) {
                        const double a = w1[i][k] * w1[ip][k];
                        if (a == 0) continue;
                        for (int l = 0; l <= std::min(j, jp); ++l) {
                            const double b = w2[j][l] * w2[jp][l];
                            if (b == 0) continue;
                            out(i - k, j - l, ip - k, jp - l) += a * b * r;
                        }
                    }
                }
    return out;
}

inline DensityMatrix apply_loss(const TwoModeState& s, const LossChannel& ch) {
    if (std::abs(s.norm() - 1.0) > 1e-10) throw validation_error("apply_loss: state is not normalized");
    ch.validate();
    const int N = s.N, d = s.dim();
    const double T1 = ch.T1, T2 = ch.T2, R1 = ch.R1(), R2 = ch.R2();
    DensityMatrix out(N);
    Eigen::VectorXcd v(d);
    for (int k = 0; k <= N; ++k)
        for (int l = 0; l <= N; ++l) {
            v.setZero();
            bool any = false;
            for (int i = k; i <= N; ++i)
                for (int j = l; j <= N; ++j) {
                    const cplx c = s(i, j);
                    if (c == cplx{}) continue;
                    const double a = detail::kraus_amp(i, k, T1, R1) * detail::kraus_amp(j, l, T2, R2);
                    if (a == 0) continue;
                    v(out.index(i - k, j - l)) += a * c;
                    any = true;
                }
            if (any) out.m.noalias() += v * v.adjoint();
        }
    return out;
}

// Closed-form reduced density matrices.  Each block has its own helper.
namespace rho_blocks {

using Mat = Eigen::MatrixXcd;

inline Mat zero(int N) { return Mat::Zero((N + 1) * (N + 1), (N + 1) * (N + 1)); }
inline int ix(int N, int i, int j) { return i * (N + 1) + j; }

// coherences between |00> and |N0>, |0N>
inline Mat rho1(const ProbeSpec& s, const LossChannel& ch) {
    const int N = s.N;
    Mat m = zero(N);
    const double a = std::pow(ch.T1, 0.5 * N), b = std::pow(ch.T2, 0.5 * N);
    m(ix(N, 0, 0), ix(N, N, 0)) += a * std::polar(1.0, -s.theta2);
    m(ix(N, N, 0), ix(N, 0, 0)) += a * std::polar(1.0, s.theta2);
    m(ix(N, 0, 0), ix(N, 0, N)) += b * std::polar(1.0, -s.theta1);
    m(ix(N, 0, N), ix(N, 0, 0)) += b * std::polar(1.0, s.theta1);
    return m;
}

inline Mat rho2(const ProbeSpec& s, const LossChannel& ch, int k) {
    const int N = s.N;
    Mat m = zero(N);
    m(ix(N, N - k, 0), ix(N, N - k, 0)) += ipow(ch.T1, N - k) * ipow(ch.R1(), k);
    m(ix(N, 0, N - k), ix(N, 0, N - k)) += ipow(ch.T2, N - k) * ipow(ch.R2(), k);
    return m;
}

inline Mat rho3(const ProbeSpec& s, const LossChannel& ch) {
    const int N = s.N;
    Mat m = zero(N);
    const double a = std::pow(ch.T1 * ch.T2, 0.5 * N);
    m(ix(N, 0, N), ix(N, N, 0)) += a * std::polar(1.0, s.theta1 - s.theta2);
    m(ix(N, N, 0), ix(N, 0, N)) += a * std::polar(1.0, s.theta2 - s.theta1);
    return m;
}

inline Mat rho4(const ProbeSpec& s, const LossChannel& ch, int k) {
    const int N = s.N;
    Mat m = zero(N);
    const double a = ipow(ch.T2, N - k) * ipow(ch.R2(), k) * std::pow(ch.T1, 0.5 * N);
    m(ix(N, 0, N - k), ix(N, N, N - k)) += a * std::polar(1.0, s.theta1);
    m(ix(N, N, N - k), ix(N, 0, N - k)) += a * std::polar(1.0, -s.theta1);
    return m;
}

inline Mat rho5(const ProbeSpec& s, const LossChannel& ch, int k) {
    const int N = s.N;
    Mat m = zero(N);
    const double a = ipow(ch.T1, N - k) * ipow(ch.R1(), k) * std::pow(ch.T2, 0.5 * N);
    m(ix(N, N - k, 0), ix(N, N - k, N)) += a * std::polar(1.0, s.theta2);
    m(ix(N, N - k, N), ix(N, N - k, 0)) += a * std::polar(1.0, -s.theta2);
    return m;
}

inline Mat rho6(const ProbeSpec& s, const LossChannel& ch, int k, int l) {
    const int N = s.N;
    Mat m = zero(N);
    m(ix(N, N - k, N - l), ix(N, N - k, N - l)) +=
        ipow(ch.T1, N - k) * ipow(ch.R1(), k) * ipow(ch.T2, N - l) * ipow(ch.R2(), l);
    return m;
}

inline Mat rho7(const ProbeSpec& s, const LossChannel& ch, int k, int l) {
    const int N = s.N, M = int(std::lround(s.nbar)) - N;
    Mat m = zero(N);
    m(ix(N, M - k, N - l), ix(N, M - k, N - l)) +=
        ipow(ch.T1, M - k) * ipow(ch.R1(), k) * ipow(ch.T2, N - l) * ipow(ch.R2(), l);
    m(ix(N, N - l, M - k), ix(N, N - l, M - k)) +=
        ipow(ch.T1, N - l) * ipow(ch.R1(), l) * ipow(ch.T2, M - k) * ipow(ch.R2(), k);
    return m;
}

inline Mat rho8(const ProbeSpec& s, const LossChannel& ch, int k, int l) {
    const int N = s.N, nb = int(std::lround(s.nbar)), M = nb - N;
    Mat m = zero(N);
    const double a = std::pow(ch.T1, 0.5 * nb - k) * ipow(ch.R1(), k) * std::pow(ch.T2, 0.5 * nb - l) * ipow(ch.R2(), l);
    m(ix(N, M - k, N - l), ix(N, N - k, M - l)) += a * std::polar(1.0, -s.theta);
    m(ix(N, N - k, M - l), ix(N, M - k, N - l)) += a * std::polar(1.0, s.theta);
    return m;
}

}  // namespace rho_blocks

inline DensityMatrix closed_form_rho_linear_low(const ProbeSpec& spec, const LossChannel& ch) {
    const ProbeSpec s = normalized_spec(spec);
    validate_spec(s);
    ch.validate();
    if (s.nbar > s.N) throw validation_error("closed_form_rho_linear_low requires nbar <= N");
    const int N = s.N;
    const double nb = s.nbar;
    DensityMatrix r(N);
    r(0, 0, 0, 0) += (N - nb) / N;
    r.m += std::sqrt(nb * (N - nb) / (2.0 * N * N)) * rho_blocks::rho1(s, ch);
    for (int k = 0; k <= N; ++k) r.m += nb / (2.0 * N) * binom(N, k) * rho_blocks::rho2(s, ch, k);
    r.m += nb / (2.0 * N) * rho_blocks::rho3(s, ch);
    return r;
}

inline DensityMatrix closed_form_rho_linear_high(const ProbeSpec& spec, const LossChannel& ch) {
    const ProbeSpec s = normalized_spec(spec);
    validate_spec(s);
    ch.validate();
    if (s.nbar < s.N) throw validation_error("closed_form_rho_linear_high requires nbar >= N");
    const int N = s.N;
    const double nb = s.nbar;
    DensityMatrix r(N);
    const double c1 = (2.0 * N - nb) / (2.0 * N);
    for (int k = 0; k <= N; ++k) r.m += c1 * binom(N, k) * rho_blocks::rho2(s, ch, k);
    r.m += c1 * rho_blocks::rho3(s, ch);
    const double c2 = std::sqrt((2.0 * N - nb) * (nb - N) / (2.0 * N * N));
    for (int k = 0; k <= N; ++k) r.m += c2 * binom(N, k) * (rho_blocks::rho4(s, ch, k) + rho_blocks::rho5(s, ch, k));
    const double c3 = (nb - N) / N;
    for (int k = 0; k <= N; ++k)
        for (int l = 0; l <= N; ++l) r.m += c3 * binom(N, k) * binom(N, l) * rho_blocks::rho6(s, ch, k, l);
    return r;
}

inline DensityMatrix closed_form_rho_nonlinear_mid(const ProbeSpec& spec, const LossChannel& ch) {
    const ProbeSpec s = normalized_spec(spec);
    validate_spec(s);
    ch.validate();
    if (!is_integer(s.nbar) || s.nbar < s.N || 3.0 * s.nbar > 4.0 * s.N)
        throw validation_error("closed_form_rho_nonlinear_mid requires integer nbar in [N, 4N/3]");
    const int N = s.N, M = int(std::lround(s.nbar)) - N;
    DensityMatrix r(N);
    for (int k = 0; k <= M; ++k)
        for (int l = 0; l <= N; ++l) r.m += 0.5 * binom(M, k) * binom(N, l) * rho_blocks::rho7(s, ch, k, l);
    for (int k = 0; k <= M; ++k)
        for (int l = 0; l <= M; ++l)
            r.m += 0.5 * std::sqrt(binom(M, k) * binom(N, k) * binom(M, l) * binom(N, l)) * rho_blocks::rho8(s, ch, k, l);
    return r;
}

}  // namespace fockmetro
