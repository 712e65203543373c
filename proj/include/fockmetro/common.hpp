#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fockmetro {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

enum class Encoding { linear, nonlinear };

inline const char* to_string(Encoding e) { return e == Encoding::linear ? "linear" : "nonlinear"; }

// errors map onto CLI exit codes 2, 3, 4
struct validation_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct unsupported_branch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Encoding parse_encoding(const std::string& s) {
    if (s == "linear" || s == "lin") return Encoding::linear;
    if (s == "nonlinear" || s == "non") return Encoding::nonlinear;
    throw validation_error("unknown encoding '" + s + "'");
}

// n! as long double; exact below ~25, log-space far above
inline long double factorial(int n) {
    if (n < 0) throw validation_error("factorial of negative integer");
    if (n > 170) return std::exp(std::lgamma(static_cast<long double>(n) + 1.0L));
    long double r = 1.0L;
    for (int k = 2; k <= n; ++k) r *= k;
    return r;
}

// C(n,k); zero outside 0<=k<=n
inline double binom(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0.0;
    if (n > 60) {
        long double l = std::lgamma(n + 1.0L) - std::lgamma(k + 1.0L) - std::lgamma(n - k + 1.0L);
        return static_cast<double>(std::exp(l));
    }
    k = std::min(k, n - k);
    long double r = 1.0L;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return static_cast<double>(std::round(r));
}

// eigenvalue of the phase generator on |ij>
inline double generator_value(Encoding e, int i, int j) {
    return e == Encoding::linear ? 0.5 * (i - j) : 0.5 * (double(i) * i - double(j) * j);
}

// integer version of 2*(g_a - g_b) is not needed; the frequency of a coherence between
// |i j> and |i' j'> with i+j == i'+j' is (i-i') for J_z and (i+j)(i-i') for nJ_z
inline long frequency(Encoding e, int i, int j, int ip, int jp) {
    return e == Encoding::linear ? long(i - ip) : long(i + j) * long(i - ip);
}

inline double ipow(double x, int k) {
    if (k < 0) throw validation_error("negative power");
    double r = 1.0;
    while (k) {
        if (k & 1) r *= x;
        x *= x;
        k >>= 1;
    }
    return r;
}

}  // namespace fockmetro
