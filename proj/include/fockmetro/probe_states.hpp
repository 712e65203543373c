#pragma once

#include <string>

#include "fock.hpp"

namespace fockmetro {

struct ProbeSpec {
    int N = 1;
    double nbar = 0.5;
    Encoding encoding = Encoding::linear;
    double theta1 = 0.0, theta2 = 0.0, theta3 = 0.0, theta = 0.0;
};

enum class Branch { lin_low, lin_high, non_low, non_mid, non_high };

inline const char* to_string(Branch b) {
    switch (b) {
        case Branch::lin_low: return "lin_low";
        case Branch::lin_high: return "lin_high";
        case Branch::non_low: return "non_low";
        case Branch::non_mid: return "non_mid";
        case Branch::non_high: return "non_high";
    }
    return "?";
}

struct RegimeTag {
    Branch branch = Branch::lin_low;
    int zeta = -1;  // set only for non_high
};

// floor(4N/3) + [N mod 3 == 2]
inline int mid_high_boundary(int N) { return (4 * N) / 3 + (N % 3 == 2 ? 1 : 0); }
inline int zeta_of(int N) { return mid_high_boundary(N) - N; }

inline double wrap_phase(double x) {
    double r = std::fmod(x, 2 * pi);
    return r < 0 ? r + 2 * pi : r;
}

inline ProbeSpec normalized_spec(ProbeSpec s) {
    s.theta1 = wrap_phase(s.theta1);
    s.theta2 = wrap_phase(s.theta2);
    s.theta3 = wrap_phase(s.theta3);
    s.theta = wrap_phase(s.theta);
    return s;
}

inline void validate_spec(const ProbeSpec& s) {
    if (s.N < 1) throw validation_error("N must be >= 1");
    if (!(s.nbar > 0.0 && s.nbar < 2.0 * s.N))
        throw validation_error("nbar out of (0,2N): nbar=" + std::to_string(s.nbar) + ", N=" + std::to_string(s.N));
}

inline RegimeTag classify_regime(const ProbeSpec& s) {
    validate_spec(s);
    RegimeTag t;
    if (s.encoding == Encoding::linear) {
        t.branch = s.nbar <= s.N ? Branch::lin_low : Branch::lin_high;
        return t;
    }
    if (s.nbar <= s.N) {
        t.branch = Branch::non_low;
    } else if (s.nbar <= mid_high_boundary(s.N)) {
        t.branch = Branch::non_mid;
    } else {
        t.branch = Branch::non_high;
        t.zeta = zeta_of(s.N);
    }
    return t;
}

inline bool is_integer(double x, double tol = 1e-12) { return std::abs(x - std::round(x)) <= tol; }

inline TwoModeState optimal_state(const ProbeSpec& spec_in) {
    const ProbeSpec s = normalized_spec(spec_in);
    const RegimeTag tag = classify_regime(s);
    const int N = s.N;
    const double nb = s.nbar;
    TwoModeState st(N);
    switch (tag.branch) {
        case Branch::lin_low:
        case Branch::non_low: {
            st(0, 0) += std::sqrt(std::max(0.0, 1.0 - nb / N));
            const double a = std::sqrt(nb / (2.0 * N));
            st(0, N) += a * std::polar(1.0, s.theta1);
            st(N, 0) += a * std::polar(1.0, s.theta2);
            break;
        }
        case Branch::lin_high: {
            const double a = std::sqrt(1.0 - nb / (2.0 * N));
            st(0, N) += a * std::polar(1.0, s.theta1);
            st(N, 0) += a * std::polar(1.0, s.theta2);
            st(N, N) += std::sqrt(nb / N - 1.0);
            break;
        }
        case Branch::non_mid: {
            if (is_integer(nb)) {
                // two-ket form with a single relative phase
                const int M = int(std::lround(nb)) - N;
                st(M, N) += std::sqrt(0.5);
                st(N, M) += std::sqrt(0.5) * std::polar(1.0, s.theta);
                break;
            }
            const int f = int(std::floor(nb));
            const double frac = nb - f;
            const double a = std::sqrt(frac / 2.0), b = std::sqrt((1.0 - frac) / 2.0);
            st(f + 1 - N, N) += a;
            st(N, f + 1 - N) += a * std::polar(1.0, s.theta1);
            st(f - N, N) += b * std::polar(1.0, s.theta2);
            st(N, f - N) += b * std::polar(1.0, s.theta3);
            break;
        }
        case Branch::non_high: {
            const int z = tag.zeta;
            const double a = std::sqrt((2.0 * N - nb) / (2.0 * (N - z)));
            st(z, N) += a * std::polar(1.0, s.theta1);
            st(N, z) += a * std::polar(1.0, s.theta2);
            st(N, N) += std::sqrt((nb - N - z) / double(N - z));
            break;
        }
    }
    return st;
}

inline TwoModeState noon_state(int n, double theta, int N_embed) {
    if (n < 1) throw validation_error("NOON photon number must be >= 1");
    if (n > N_embed) throw validation_error("NOON photon number exceeds embedding cutoff");
    TwoModeState st(N_embed);
    st(0, n) += std::sqrt(0.5);
    st(n, 0) += std::sqrt(0.5) * std::polar(1.0, theta);
    return st;
}

inline double closed_form_qfi(const ProbeSpec& s) {
    const RegimeTag tag = classify_regime(s);
    const double N = s.N, nb = s.nbar;
    switch (tag.branch) {
        case Branch::lin_low: return nb * N;
        case Branch::lin_high: return N * (2 * N - nb);
        case Branch::non_low: return nb * N * N * N;
        case Branch::non_mid: {
            const double f = std::floor(nb), fr = nb - f;
            return fr * (f + 1) * (f + 1) * (2 * N - f - 1) * (2 * N - f - 1) + (1 - fr) * f * f * (2 * N - f) * (2 * N - f);
        }
        case Branch::non_high: {
            const double sb = mid_high_boundary(s.N);
            return (2 * N - nb) / (2 * N - sb) * sb * sb * (2 * N - sb) * (2 * N - sb);
        }
    }
    return 0.0;
}

// |alpha|^2 from nbar = |alpha|^2 / (1 + exp(-|alpha|^2)), bisection
inline double ecs_alpha2(double nbar) {
    if (!(nbar > 0)) throw validation_error("nbar must be > 0");
    auto f = [](double a2) { return a2 / (1.0 + std::exp(-a2)); };
    double lo = 0.0, hi = std::max(4.0 * nbar, 50.0);
    for (int it = 0; it < 400; ++it) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) < nbar) lo = mid; else hi = mid;
        if (std::abs(f(mid) - nbar) <= 1e-12 && hi - lo < 1e-15 * std::max(1.0, mid)) break;
    }
    return 0.5 * (lo + hi);
}

inline double entangled_coherent_qfi_from_alpha2(double a2, Encoding e) {
    const double C2 = 1.0 / (2.0 * (1.0 + std::exp(-a2)));
    if (e == Encoding::linear) return 2 * C2 * a2 * (1 + a2);
    return 2 * C2 * a2 * (a2 * a2 * a2 + 6 * a2 * a2 + 7 * a2 + 1);
}

inline double entangled_coherent_qfi(double nbar, Encoding e) {
    return entangled_coherent_qfi_from_alpha2(ecs_alpha2(nbar), e);
}

// smallest N0 <= Nmax such that the optimal state beats the entangled coherent state for all
// N in [N0, Nmax]; N ranges over cutoffs with nbar < 2N.  Returns -1 if none.
inline int ecs_crossover(double nbar, Encoding e, int Nmax = 64) {
    const double Fe = entangled_coherent_qfi(nbar, e);
    int start = -1;
    for (int N = 1; N <= Nmax; ++N) {
        if (!(nbar < 2.0 * N)) continue;
        ProbeSpec s{N, nbar, e};
        bool wins = closed_form_qfi(s) > Fe;
        if (wins && start < 0) start = N;
        if (!wins) start = -1;
    }
    return start;
}

}  // namespace fockmetro
