#pragma once

#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "loss.hpp"
#include "metrology.hpp"

namespace fockmetro {

enum class MeasurementKind { parity, photon_counting };

inline const char* to_string(MeasurementKind k) { return k == MeasurementKind::parity ? "parity" : "counting"; }

inline MeasurementKind parse_measurement(const std::string& s) {
    if (s == "parity") return MeasurementKind::parity;
    if (s == "counting" || s == "photon_counting") return MeasurementKind::photon_counting;
    throw validation_error("unknown measurement '" + s + "'");
}

struct MeasurementModel {
    MeasurementKind kind = MeasurementKind::parity;
    ProbeSpec spec;
    std::optional<LossChannel> channel;

    int outcome_count() const { return kind == MeasurementKind::parity ? 2 : 2 * spec.N + 1; }
    bool lossy() const { return channel.has_value() && !channel->identity(); }
};

// ---------------------------------------------------------------- phases and coefficients

struct InterferencePhases {
    double beta1 = 0, beta2 = 0, gamma = 0;
    double step = 0;  // 2 (2N - nbar) psi
    double gamma_k(int k) const { return gamma - k * step; }
};

inline InterferencePhases interference_phases(const ProbeSpec& s, double psi) {
    const double N = s.N, nb = s.nbar;
    InterferencePhases p;
    p.beta1 = s.theta2 - s.theta1 + 0.5 * pi * N + psi * N;
    p.beta2 = s.theta2 - s.theta1 + 0.5 * pi * N + psi * N * N;
    p.gamma = s.theta + 0.5 * pi * (2 * N - nb) + psi * nb * (2 * N - nb);
    p.step = 2.0 * (2 * N - nb) * psi;
    return p;
}

namespace coeffs {

inline double step_h(int m, int N) { return m - N <= 0 ? 1.0 : 0.0; }

inline double Omega(int N, const LossChannel& ch) { return 1.0 - 0.5 * (ipow(ch.R1(), N) + ipow(ch.R2(), N)); }

inline double kappa(int N, double nbar, const LossChannel& ch) {
    double s = 0;
    for (int k = 0; k <= N; ++k) s += binom(N, k) * binom(N, k) * ipow(ch.T1 * ch.T2, N - k) * ipow(ch.R1() * ch.R2(), k);
    return (nbar - N) / N * s + (2.0 * N - nbar) / N * (1.0 - Omega(N, ch));
}

inline double Lambda(int N, int m, const LossChannel& ch) {
    double s = 0;
    for (int k = 0; k <= N - m; ++k)
        s += std::ldexp(1.0, k - N - 1) * binom(N, k) * binom(N - k, m) *
             (ipow(ch.T1, N - k) * ipow(ch.R1(), k) + ipow(ch.T2, N - k) * ipow(ch.R2(), k));
    return s;
}

inline double chi1(int N, int m) {
    double s = 0;
    for (int k = std::max(0, m - N); k <= std::min(N, m); ++k) s += (k % 2 ? -1.0 : 1.0) * binom(N, k) * binom(N, m - k);
    return s;
}

inline double chi2(int N, int nbar, int m) {
    double s = 0;
    for (int k = std::max(0, N + m - nbar); k <= std::min(N, m); ++k)
        s += (k % 2 ? -1.0 : 1.0) * binom(N, k) * binom(nbar - N, m - k);
    return s;
}

}  // namespace coeffs

// ---------------------------------------------------------------- closed forms

namespace detail {

inline int integer_nbar_mid(const ProbeSpec& s) {
    if (!is_integer(s.nbar))
        throw unsupported_branch("no closed form for non-integer nbar in the nonlinear mid branch "
                                 "(only integer nbar has one); use generic_probs");
    return int(std::lround(s.nbar));
}

inline void require_supported(const MeasurementModel& m) {
    const RegimeTag t = classify_regime(m.spec);
    if (t.branch == Branch::non_high)
        throw unsupported_branch("no closed-form probabilities for the nonlinear high branch; use generic_probs");
    if (t.branch == Branch::non_mid) integer_nbar_mid(m.spec);
}

inline double sgn(int m) { return m % 2 ? -1.0 : 1.0; }

}  // namespace detail

// P(+1), P(-1) at total phase psi = phi + phi_u
inline std::array<double, 2> parity_probs(const MeasurementModel& model, double phi, double phi_u) {
    if (model.kind != MeasurementKind::parity) throw validation_error("parity_probs on a counting model");
    detail::require_supported(model);
    const ProbeSpec s = normalized_spec(model.spec);
    const RegimeTag t = classify_regime(s);
    const double N = s.N, nb = s.nbar;
    const InterferencePhases ph = interference_phases(s, phi + phi_u);
    double Pp = 0;
    if (!model.lossy()) {
        switch (t.branch) {
            case Branch::lin_low: Pp = 1 - nb / (2 * N) * (1 - std::cos(ph.beta1)); break;
            case Branch::lin_high: Pp = 1 - (2 * N - nb) / (2 * N) * (1 - std::cos(ph.beta1)); break;
            case Branch::non_low: Pp = 1 - nb / (2 * N) * (1 - std::cos(ph.beta2)); break;
            case Branch::non_mid: Pp = 0.5 * (1 + std::cos(ph.gamma)); break;
            default: break;
        }
        return {Pp, 1 - Pp};
    }
    const LossChannel& ch = *model.channel;
    const double Om = coeffs::Omega(s.N, ch), tt = std::pow(ch.T1 * ch.T2, 0.5 * N);
    switch (t.branch) {
        case Branch::lin_low: Pp = 1 - nb / (2 * N) * (Om - tt * std::cos(ph.beta1)); break;
        case Branch::non_low: Pp = 1 - nb / (2 * N) * (Om - tt * std::cos(ph.beta2)); break;
        case Branch::lin_high: {
            const double kap = coeffs::kappa(s.N, nb, ch);
            Pp = 0.5 * (1 + kap) + (2 * N - nb) / (2 * N) * tt * std::cos(ph.beta1);
            break;
        }
        case Branch::non_mid: {
            const int n = detail::integer_nbar_mid(s), M = n - s.N;
            const double T12 = ch.T1 * ch.T2, R12 = ch.R1() * ch.R2();
            double E = 0;
            for (int k = 0; k <= M; ++k)
                E += binom(M, k) * binom(s.N, k) * std::pow(T12, 0.5 * n - k) * ipow(R12, k) * std::cos(ph.gamma_k(k));
            double E2 = 0;
            for (int k = 0; k <= M; ++k) E2 += binom(M, k) * binom(s.N, M - k) * ipow(T12, M - k) * ipow(R12, k);
            E += 0.5 * E2 * (ipow(ch.R1(), 2 * s.N - n) + ipow(ch.R2(), 2 * s.N - n));
            Pp = 0.5 * (1 + E);
            break;
        }
        default: break;
    }
    return {Pp, 1 - Pp};
}

inline std::vector<double> photon_counting_probs(const MeasurementModel& model, double phi, double phi_u) {
    if (model.kind != MeasurementKind::photon_counting) throw validation_error("photon_counting_probs on a parity model");
    detail::require_supported(model);
    const ProbeSpec s = normalized_spec(model.spec);
    const RegimeTag t = classify_regime(s);
    const int N = s.N;
    const double nb = s.nbar;
    const InterferencePhases ph = interference_phases(s, phi + phi_u);
    std::vector<double> P(2 * N + 1, 0.0);
    const long double NF = factorial(N);

    if (!model.lossy()) {
        for (int m = 0; m <= 2 * N; ++m) {
            switch (t.branch) {
                case Branch::lin_low:
                case Branch::non_low: {
                    const double c = t.branch == Branch::lin_low ? std::cos(ph.beta1) : std::cos(ph.beta2);
                    P[m] = (m == 0 ? (N - nb) / N : 0.0) +
                           coeffs::step_h(m, N) * std::ldexp(1.0, -N) * nb / N * binom(N, m) * (1 + detail::sgn(m) * c);
                    break;
                }
                case Branch::lin_high: {
                    const double c = std::cos(ph.beta1);
                    const double x1 = coeffs::chi1(N, m);
                    P[m] = coeffs::step_h(m, N) * std::ldexp(1.0, -N) * (2 - nb / N) * binom(N, m) * (1 + detail::sgn(m) * c) +
                           std::ldexp(1.0, -2 * N) * (nb / N - 1) *
                               double(factorial(m) * factorial(2 * N - m) / (NF * NF)) * x1 * x1;
                    break;
                }
                case Branch::non_mid: {
                    const int n = detail::integer_nbar_mid(s);
                    if (m > n) break;
                    const double x2 = coeffs::chi2(N, n, m);
                    P[m] = std::ldexp(1.0, -n) * double(factorial(m) * factorial(n - m) / (factorial(n - N) * NF)) *
                           (1 + detail::sgn(m) * std::cos(ph.gamma)) * x2 * x2;
                    break;
                }
                default: break;
            }
        }
        return P;
    }

    const LossChannel& ch = *model.channel;
    const double T1 = ch.T1, T2 = ch.T2, R1 = ch.R1(), R2 = ch.R2();
    const double tt = std::pow(T1 * T2, 0.5 * N);
    for (int m = 0; m <= 2 * N; ++m) {
        switch (t.branch) {
            case Branch::lin_low:
            case Branch::non_low: {
                const double c = t.branch == Branch::lin_low ? std::cos(ph.beta1) : std::cos(ph.beta2);
                P[m] = (m == 0 ? 1 - nb / N : 0.0) + nb / N * coeffs::Lambda(N, m, ch) +
                       coeffs::step_h(m, N) * std::ldexp(1.0, -N) * nb / N * binom(N, m) * tt * detail::sgn(m) * c;
                break;
            }
            case Branch::lin_high: {
                const double c = std::cos(ph.beta1);
                double S = 0;
                for (int k = 0; k <= N; ++k)
                    for (int l = 0; l <= N; ++l) {
                        if (2 * N - m - k - l < 0) continue;  // no kets left to host m photons
                        double inner = 0;
                        for (int q = std::max(0, m - N + l); q <= std::min(N - k, m); ++q)
                            inner += detail::sgn(q) * binom(N - k, q) * binom(N - l, m - q);
                        S += std::ldexp(1.0, k + l) *
                             double(factorial(m) * factorial(2 * N - m - k - l) / (factorial(N - k) * factorial(N - l))) *
                             ipow(T1, N - k) * ipow(R1, k) * ipow(T2, N - l) * ipow(R2, l) * binom(N, k) * binom(N, l) * inner * inner;
                    }
                P[m] = (2 - nb / N) * coeffs::Lambda(N, m, ch) +
                       coeffs::step_h(m, N) * (2 - nb / N) * std::ldexp(1.0, -N) * detail::sgn(m) * binom(N, m) * tt * c +
                       std::ldexp(1.0, -2 * N) * (nb / N - 1) * S;
                break;
            }
            case Branch::non_mid: {
                const int n = detail::integer_nbar_mid(s), M = n - N;
                if (m > n) break;
                double S1 = 0;
                for (int k = 0; k <= M; ++k)
                    for (int l = 0; l <= N; ++l) {
                        if (n - m - k - l < 0) continue;
                        double inner = 0;
                        for (int q = std::max(0, N + m - n + k); q <= std::min(N - l, m); ++q)
                            inner += detail::sgn(q) * binom(N - l, q) * binom(M - k, m - q);
                        S1 += std::ldexp(1.0, k + l - n - 1) *
                              double(factorial(m) * factorial(n - m - k - l) / (factorial(M - k) * factorial(N - l))) *
                              binom(M, k) * binom(N, l) * inner * inner *
                              (ipow(T1, M - k) * ipow(R1, k) * ipow(T2, N - l) * ipow(R2, l) +
                               ipow(T1, N - l) * ipow(R1, l) * ipow(T2, M - k) * ipow(R2, k));
                    }
                double S2 = 0;
                for (int k = 0; k <= M; ++k)
                    for (int l = 0; l <= M; ++l) {
                        if (n - m - k - l < 0) continue;
                        double dd = 0;
                        for (int a = std::max(0, m - N + k); a <= std::min(M - l, m); ++a)
                            for (int b = std::max(0, N + m - n + k); b <= std::min(N - l, m); ++b)
                                dd += detail::sgn(a + b) * binom(M - l, a) * binom(N - k, m - a) * binom(M - k, m - b) * binom(N - l, b);
                        S2 += std::ldexp(1.0, k + l - n) *
                              double(factorial(m) * factorial(n - m - k - l) * factorial(k) * factorial(l) / (factorial(M) * NF)) *
                              binom(M, k) * binom(N, k) * binom(M, l) * binom(N, l) * std::pow(T1, 0.5 * n - k) * ipow(R1, k) *
                              std::pow(T2, 0.5 * n - l) * ipow(R2, l) * std::cos(ph.gamma - (k + l) * (2.0 * N - n) * (phi + phi_u)) * dd;
                    }
                P[m] = S1 + S2;
                break;
            }
            default: break;
        }
    }
    return P;
}

inline std::vector<double> closed_form_probs(const MeasurementModel& model, double psi) {
    if (model.kind == MeasurementKind::parity) {
        auto p = parity_probs(model, psi, 0.0);
        return {p[0], p[1]};
    }
    return photon_counting_probs(model, psi, 0.0);
}

// ---------------------------------------------------------------- Born-rule oracle

// encode, (optionally) lose photons, rotate by exp(i pi/2 Jx), project
inline std::vector<double> generic_probs(const DensityMatrix& rho_in, const std::optional<LossChannel>& channel, Encoding e,
                                         double phi, double phi_u, MeasurementKind kind) {
    DensityMatrix rho = channel ? apply_loss(rho_in, *channel) : rho_in;
    rho = apply_phase(std::move(rho), e, phi + phi_u);
    const int N = rho.N;
    std::vector<double> Pm(2 * N + 1, 0.0);
    for (int s = 0; s <= 2 * N; ++s) {
        const int lo = std::max(0, s - N), hi = std::min(s, N);
        Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(s + 1, s + 1);
        bool any = false;
        for (int a = lo; a <= hi; ++a)
            for (int b = lo; b <= hi; ++b) {
                B(a, b) = rho(a, s - a, b, s - b);
                any = any || B(a, b) != cplx{};
            }
        if (!any) continue;
        const Eigen::MatrixXcd& U = bs_block(s, BSDirection::inverse);
        Eigen::MatrixXcd R = U * B * U.adjoint();
        for (int m = 0; m <= s; ++m) Pm[m] += R(m, m).real();
    }
    if (kind == MeasurementKind::photon_counting) return Pm;
    double pe = 0, po = 0;
    for (int m = 0; m <= 2 * N; ++m) (m % 2 ? po : pe) += Pm[m];
    return {pe, po};
}

inline std::vector<double> generic_probs(const TwoModeState& s, const std::optional<LossChannel>& channel, Encoding e, double phi,
                                         double phi_u, MeasurementKind kind) {
    return generic_probs(DensityMatrix::pure(s), channel, e, phi, phi_u, kind);
}

inline DensityMatrix model_state(const MeasurementModel& m) {
    TwoModeState st = optimal_state(m.spec);
    if (m.lossy()) return apply_loss(st, *m.channel);
    return DensityMatrix::pure(st);
}

inline std::vector<double> generic_probs(const MeasurementModel& m, double phi, double phi_u) {
    return generic_probs(model_state(m), std::nullopt, m.spec.encoding, phi, phi_u, m.kind);
}

// ---------------------------------------------------------------- exact trigonometric likelihood

// P(y|psi) = Re C[y][0] + 2 Re sum_{q=1..Q} C[y][q] exp(i q w0 psi)
struct TrigLikelihood {
    double omega0 = 1.0;
    int Q = 0;
    int outcomes = 0;
    std::vector<std::vector<cplx>> C;

    double period() const { return 2 * pi / omega0; }

    // P, dP/dpsi, d2P/dpsi2 for every outcome
    void eval(double psi, double* P, double* dP = nullptr, double* d2P = nullptr) const {
        const cplx z = std::polar(1.0, omega0 * psi);
        for (int y = 0; y < outcomes; ++y) {
            const auto& c = C[y];
            cplx zq = 1.0, s0 = 0, s1 = 0, s2 = 0;
            for (int q = 1; q <= Q; ++q) {
                zq *= z;
                cplx t = c[q] * zq;
                s0 += t;
                s1 += double(q) * t;
                s2 += double(q) * q * t;
            }
            P[y] = c[0].real() + 2 * s0.real();
            if (dP) dP[y] = 2 * (I * omega0 * s1).real();
            if (d2P) d2P[y] = -2 * omega0 * omega0 * s2.real();
        }
    }

    std::vector<double> probs(double psi) const {
        std::vector<double> P(outcomes);
        eval(psi, P.data());
        return P;
    }
};

namespace detail {

inline long gcd_l(long a, long b) { return std::gcd(a, b); }

// exact Fourier coefficients per integer frequency from a density matrix (already lossy)
inline std::vector<std::map<long, cplx>> frequency_content(const DensityMatrix& rho, Encoding e, MeasurementKind kind) {
    const int N = rho.N;
    std::vector<std::map<long, cplx>> per_m(2 * N + 1);
    for (int s = 0; s <= 2 * N; ++s) {
        const int lo = std::max(0, s - N), hi = std::min(s, N);
        const Eigen::MatrixXcd& U = bs_block(s, BSDirection::inverse);
        for (int a = lo; a <= hi; ++a)
            for (int b = lo; b <= hi; ++b) {
                const cplx r = rho(a, s - a, b, s - b);
                if (r == cplx{}) continue;
                const long f = frequency(e, a, s - a, b, s - b);
                for (int m = 0; m <= s; ++m) {
                    const cplx v = U(m, a) * r * std::conj(U(m, b));
                    per_m[m][f] += v;
                }
            }
    }
    if (kind == MeasurementKind::photon_counting) return per_m;
    std::vector<std::map<long, cplx>> par(2);
    for (int m = 0; m <= 2 * N; ++m)
        for (auto& [f, v] : per_m[m]) par[m % 2][f] += v;
    return par;
}

inline TrigLikelihood trig_from_content(const std::vector<std::map<long, cplx>>& content, double drop = 1e-15) {
    long g = 0, fmax = 0;
    for (auto& mp : content)
        for (auto& [f, v] : mp)
            if (f > 0 && std::abs(v) > drop) {
                g = gcd_l(g, f);
                fmax = std::max(fmax, f);
            }
    TrigLikelihood L;
    L.omega0 = g > 0 ? double(g) : 1.0;
    L.Q = g > 0 ? int(fmax / g) : 0;
    L.outcomes = int(content.size());
    L.C.assign(L.outcomes, std::vector<cplx>(L.Q + 1, cplx{}));
    for (int y = 0; y < L.outcomes; ++y)
        for (auto& [f, v] : content[y]) {
            if (f < 0) continue;
            if (f == 0) {
                L.C[y][0] += v.real();
                continue;
            }
            if (std::abs(v) <= drop) continue;
            L.C[y][int(f / g)] += v;
        }
    return L;
}

}  // namespace detail

inline TrigLikelihood trig_from_generic(const DensityMatrix& rho, Encoding e, MeasurementKind kind) {
    return detail::trig_from_content(detail::frequency_content(rho, e, kind));
}

inline TrigLikelihood trig_from_generic(const MeasurementModel& m) {
    return trig_from_generic(model_state(m), m.spec.encoding, m.kind);
}

inline bool has_closed_form(const MeasurementModel& m) {
    try {
        detail::require_supported(m);
        return true;
    } catch (const unsupported_branch&) {
        return false;
    }
}

// Sample the closed form on 2Q+1 equispaced points of one period; exact for a trigonometric
// polynomial whose frequency set comes from the Born-rule analysis.
inline TrigLikelihood trig_from_closed_form(const MeasurementModel& m) {
    TrigLikelihood L = trig_from_generic(m);
    const int n = 2 * L.Q + 1;
    std::vector<std::vector<double>> samples(n);
    for (int k = 0; k < n; ++k) samples[k] = closed_form_probs(m, L.period() * k / n);
    for (int y = 0; y < L.outcomes; ++y)
        for (int q = 0; q <= L.Q; ++q) {
            cplx acc = 0;
            for (int k = 0; k < n; ++k) acc += samples[k][y] * std::polar(1.0, -2 * pi * double(q) * k / n);
            acc /= double(n);
            L.C[y][q] = q == 0 ? cplx(acc.real(), 0) : acc;
        }
    return L;
}

// the likelihood used by cfi_at and the adaptive engine
inline TrigLikelihood build_likelihood(const MeasurementModel& m) {
    return has_closed_form(m) ? trig_from_closed_form(m) : trig_from_generic(m);
}

inline double model_period(const MeasurementModel& m) { return trig_from_generic(m).period(); }

// ---------------------------------------------------------------- CFI

// outcomes with P <= 1e-14 use the Bernoulli-rule limit (dP)^2/P -> 2 d2P
inline double cfi_at(const TrigLikelihood& L, double psi) {
    std::vector<double> P(L.outcomes), d1(L.outcomes), d2(L.outcomes);
    L.eval(psi, P.data(), d1.data(), d2.data());
    double I = 0;
    for (int y = 0; y < L.outcomes; ++y) {
        if (P[y] <= kCfiProbFloor) {
            I += std::max(0.0, 2.0 * d2[y]);
            continue;
        }
        I += d1[y] * d1[y] / P[y];
    }
    return I;
}

inline double cfi_at(const MeasurementModel& m, double phi, double phi_u) { return cfi_at(build_likelihood(m), phi + phi_u); }

// max of cfi_at over an equispaced grid covering one period
inline std::pair<double, double> cfi_grid_max(const TrigLikelihood& L, int points) {
    double best = -1, arg = 0;
    for (int k = 0; k < points; ++k) {
        const double psi = L.period() * k / points;
        const double v = cfi_at(L, psi);
        if (v > best) {
            best = v;
            arg = psi;
        }
    }
    return {best, arg};
}

// ---------------------------------------------------------------- closed-form CFI, derivative and variance

// closed-form parity CFI, noiseless and lossy, as a function of total phase psi
inline double parity_cfi_formula(const MeasurementModel& model, double psi) {
    detail::require_supported(model);
    const ProbeSpec s = normalized_spec(model.spec);
    const RegimeTag t = classify_regime(s);
    const double N = s.N, nb = s.nbar;
    const InterferencePhases ph = interference_phases(s, psi);
    if (!model.lossy()) {
        switch (t.branch) {
            case Branch::lin_low: {
                const double c = 1 - std::cos(ph.beta1), sn = std::sin(ph.beta1);
                return nb * N * N * sn * sn / (c * (2 * N - nb * c));
            }
            case Branch::lin_high: {
                const double c = 1 - std::cos(ph.beta1), sn = std::sin(ph.beta1);
                return (2 * N - nb) * N * N * sn * sn / (c * (2 * N - (2 * N - nb) * c));
            }
            case Branch::non_low: {
                const double c = 1 - std::cos(ph.beta2), sn = std::sin(ph.beta2);
                return nb * N * N * N * N * sn * sn / (c * (2 * N - nb * c));
            }
            case Branch::non_mid: return nb * nb * (2 * N - nb) * (2 * N - nb);
            default: break;
        }
    }
    const LossChannel& ch = *model.channel;
    const double Om = coeffs::Omega(s.N, ch), T12 = ch.T1 * ch.T2, tt = std::pow(T12, 0.5 * N), tN = std::pow(T12, N);
    switch (t.branch) {
        case Branch::lin_low: {
            const double x = Om - tt * std::cos(ph.beta1), sn = std::sin(ph.beta1);
            return nb * N * N * tN * sn * sn / (x * (2 * N - nb * x));
        }
        case Branch::non_low: {
            const double x = Om - tt * std::cos(ph.beta2), sn = std::sin(ph.beta2);
            return nb * N * N * N * N * tN * sn * sn / (x * (2 * N - nb * x));
        }
        case Branch::lin_high: {
            const double kap = coeffs::kappa(s.N, nb, ch), sn = std::sin(ph.beta1);
            const double e = kap + (2 * N - nb) / N * tt * std::cos(ph.beta1);
            return (2 * N - nb) * (2 * N - nb) * tN * sn * sn / (1 - e * e);
        }
        default: break;
    }
    throw unsupported_branch("no closed-form parity CFI for this lossy branch");
}

// closed-form d P_m / d phi for noiseless photon counting
inline std::vector<double> counting_dprobs_formula(const MeasurementModel& model, double psi) {
    if (model.lossy()) throw unsupported_branch("no closed-form counting derivative under loss");
    detail::require_supported(model);
    const ProbeSpec s = normalized_spec(model.spec);
    const RegimeTag t = classify_regime(s);
    const int N = s.N;
    const double nb = s.nbar;
    const InterferencePhases ph = interference_phases(s, psi);
    std::vector<double> d(2 * N + 1, 0.0);
    for (int m = 0; m <= 2 * N; ++m) {
        const double base = coeffs::step_h(m, N) * -detail::sgn(m) * std::ldexp(1.0, -N) * binom(N, m);
        switch (t.branch) {
            case Branch::lin_low: d[m] = base * nb * std::sin(ph.beta1); break;
            case Branch::lin_high: d[m] = base * (2 * N - nb) * std::sin(ph.beta1); break;
            case Branch::non_low: d[m] = base * nb * N * std::sin(ph.beta2); break;
            case Branch::non_mid: {
                const int n = int(std::lround(nb));
                if (m > n) break;
                const double x2 = coeffs::chi2(N, n, m);
                d[m] = std::ldexp(1.0, -n) * n * (2.0 * N - n) * std::sin(ph.gamma) *
                       double(factorial(m) * factorial(n - m) / (factorial(n - N) * factorial(N))) * -detail::sgn(m) * x2 * x2;
                break;
            }
            default: break;
        }
    }
    return d;
}

// closed-form error-propagation variance of the parity observable (noiseless)
inline double parity_variance_formula(const MeasurementModel& model, double psi) {
    if (model.lossy()) throw unsupported_branch("no closed-form parity variance under loss");
    detail::require_supported(model);
    const ProbeSpec s = normalized_spec(model.spec);
    const RegimeTag t = classify_regime(s);
    const double N = s.N, nb = s.nbar;
    const InterferencePhases ph = interference_phases(s, psi);
    switch (t.branch) {
        case Branch::lin_low: {
            const double c = 1 - std::cos(ph.beta1), s2 = std::pow(std::sin(ph.beta1), 2);
            return 2 * c / (nb * N * s2) - c * c / (N * N * s2);
        }
        case Branch::lin_high: {
            const double c = 1 - std::cos(ph.beta1), s2 = std::pow(std::sin(ph.beta1), 2);
            return 2 * c / (N * (2 * N - nb) * s2) - c * c / (N * N * s2);
        }
        case Branch::non_low: {
            const double c = 1 - std::cos(ph.beta2), s2 = std::pow(std::sin(ph.beta2), 2);
            return 2 * c / (nb * N * N * N * s2) - c * c / (N * N * N * N * s2);
        }
        case Branch::non_mid: return 1.0 / (nb * nb * (2 * N - nb) * (2 * N - nb));
        default: break;
    }
    return 0;
}

// ---------------------------------------------------------------- lossy parity maximum CFI

struct MaxCfi {
    double I_max = 0;
    double cos_beta = 0;
};

inline MaxCfi max_cfi_parity_lossy(const MeasurementModel& model) {
    if (model.kind != MeasurementKind::parity) throw validation_error("max_cfi_parity_lossy needs a parity model");
    if (!model.channel) throw validation_error("max_cfi_parity_lossy needs a loss channel");
    const ProbeSpec s = normalized_spec(model.spec);
    const RegimeTag t = classify_regime(s);
    const LossChannel& ch = *model.channel;
    const double N = s.N, nb = s.nbar;
    const double Om = coeffs::Omega(s.N, ch), T12 = ch.T1 * ch.T2, tN = std::pow(T12, N), tt = std::pow(T12, 0.5 * N);
    MaxCfi r;
    if (t.branch == Branch::lin_low || t.branch == Branch::non_low) {
        const double d = Om * Om - tN;
        const double v = nb * N * Om - 0.5 * nb * (nb * d + std::sqrt(std::max(0.0, ((2 * N - nb * Om) * (2 * N - nb * Om) - tN * nb * nb) * d)));
        r.I_max = t.branch == Branch::lin_low ? v : N * N * v;
        if (std::abs(N - nb * Om) <= 1e-12 * N || tt == 0) {
            r.cos_beta = 0;
        } else {
            r.cos_beta = (2 * N * Om - (tN + Om * Om) * nb - std::sqrt(std::max(0.0, d * nb * nb - 4 * nb * N * Om + 4 * N * N)) * std::sqrt(std::max(0.0, d))) /
                         (2 * tt * (N - nb * Om));
        }
        return r;
    }
    if (t.branch == Branch::lin_high) {
        const double kap = coeffs::kappa(s.N, nb, ch);
        const double A2 = (2 * N - nb) * (2 * N - nb) * tN;
        const double inner = (A2 - N * N * (1 + kap * kap)) * (A2 - N * N * (1 + kap * kap)) - 4 * N * N * N * N * kap * kap;
        const double root = std::sqrt(std::max(0.0, inner));
        r.I_max = 0.5 * (N * N * (1 - kap * kap) + A2 - root);
        if (std::abs(kap) < 1e-14 || tt == 0) {
            r.cos_beta = 0;
        } else {
            r.cos_beta = (N * N * (1 - kap * kap) - root) / (2 * tt * N * (2 * N - nb) * kap) - (2 * N - nb) * tt / (2 * N * kap);
        }
        return r;
    }
    throw unsupported_branch("no closed-form maximum parity CFI for the nonlinear branch above nbar = N");
}

// ---------------------------------------------------------------- optimal true values

struct OptimalTrueValues {
    bool all_phi = false;
    double offset = 0, spacing = 0;  // phi_k = offset + k * spacing
    double at(int k) const { return offset + k * spacing; }
};

inline OptimalTrueValues optimal_true_values(const MeasurementModel& model) {
    if (model.lossy()) throw validation_error("no closed-form optimal true values under loss");
    const ProbeSpec s = normalized_spec(model.spec);
    const RegimeTag t = classify_regime(s);
    const double N = s.N;
    OptimalTrueValues r;
    switch (t.branch) {
        case Branch::lin_low:
        case Branch::lin_high:
            r.offset = (s.theta1 - s.theta2) / N - pi / 2;
            r.spacing = 2 * pi / N;
            return r;
        case Branch::non_low:
            r.offset = (s.theta1 - s.theta2) / (N * N) - pi / (2 * N);
            r.spacing = 2 * pi / (N * N);
            return r;
        case Branch::non_mid:
            detail::integer_nbar_mid(s);
            r.all_phi = true;
            return r;
        default: break;
    }
    throw unsupported_branch("no optimal true-value set for the nonlinear high branch");
}

}  // namespace fockmetro
