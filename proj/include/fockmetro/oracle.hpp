#pragma once

#include <map>
#include <random>

#include "probe_states.hpp"

namespace fockmetro {

// Weights w_s on total photon number s = 0..2N with sum w = 1 and sum s w = nbar.
// Reported variables: P_00 = w_0, P_{2N,0} = w_{2N}, and w_s / 2 for the others.
struct ReducedProblem {
    int N = 1;
    double nbar = 0.5;
    Encoding encoding = Encoding::linear;

    int levels() const { return 2 * N + 1; }

    // QFI of the best balanced two-ket pair with s photons
    double value(int s) const {
        const double t = s <= N ? s : 2.0 * N - s;
        if (encoding == Encoding::linear) return t * t;
        return s <= N ? t * t * t * t : double(s) * s * t * t;
    }

    void validate() const {
        if (N < 1) throw validation_error("N must be >= 1");
        if (!(nbar >= 0 && nbar <= 2.0 * N)) throw validation_error("infeasible constraints: nbar outside [0, 2N]");
    }
};

struct OracleReport {
    double best_value = 0;
    std::map<std::string, double> best_distribution;
    double theorem_value = 0;
    double gap = 0;
    int starts = 0;
    double symmetry_error = 0;  // full problem only
};

namespace detail {

inline std::string reduced_label(int N, int s) {
    if (s <= N) return "P_" + std::to_string(s) + "_" + std::to_string(s);
    return "P_" + std::to_string(s) + "_" + std::to_string(2 * N - s);
}

inline double reduced_objective(const ReducedProblem& p, const std::vector<double>& w) {
    double v = 0;
    for (int s = 0; s < p.levels(); ++s) v += w[s] * p.value(s);
    return v;
}

// best two-point (or one-point) support for a linear objective c_s over levels
inline std::pair<double, std::pair<int, int>> best_pair(const std::vector<double>& c, double nbar) {
    const int L = int(c.size());
    double best = -std::numeric_limits<double>::infinity();
    std::pair<int, int> sup{-1, -1};
    for (int a = 0; a < L; ++a)
        for (int b = a; b < L; ++b) {
            double v;
            if (a == b) {
                if (std::abs(a - nbar) > 1e-12) continue;
                v = c[a];
            } else {
                if (nbar < a - 1e-12 || nbar > b + 1e-12) continue;
                const double t = (nbar - a) / (b - a);
                v = (1 - t) * c[a] + t * c[b];
            }
            if (sup.first < 0 || v > best + 1e-12 * std::max(1.0, std::abs(best))) {
                best = v;
                sup = {a, b};
            }
        }
    return {best, sup};
}

inline std::vector<double> pair_weights(int L, std::pair<int, int> sup, double nbar) {
    std::vector<double> w(L, 0.0);
    auto [a, b] = sup;
    if (a == b) {
        w[a] = 1;
    } else {
        const double t = (nbar - a) / (b - a);
        w[a] = 1 - t;
        w[b] += t;
    }
    return w;
}

// mass transfer along the direction that keeps both constraints, on levels a < b < c
inline bool triple_move(const ReducedProblem& p, std::vector<double>& w, int a, int b, int c) {
    const double da = c - b, db = -(c - a), dc = b - a;
    const double slope = da * p.value(a) + db * p.value(b) + dc * p.value(c);
    if (std::abs(slope) <= 1e-13 * std::max(1.0, p.value(2 * p.N))) return false;
    const double sg = slope > 0 ? 1.0 : -1.0;
    double tmax = std::numeric_limits<double>::infinity();
    for (auto [k, d] : {std::pair{a, da}, std::pair{b, db}, std::pair{c, dc}}) {
        const double dd = sg * d;
        if (dd < 0) tmax = std::min(tmax, w[k] / -dd);
    }
    if (!(tmax > 1e-15)) return false;
    w[a] = std::max(0.0, w[a] + sg * da * tmax);
    w[b] = std::max(0.0, w[b] + sg * db * tmax);
    w[c] = std::max(0.0, w[c] + sg * dc * tmax);
    return true;
}

}  // namespace detail

inline OracleReport brute_force_reduced(const ReducedProblem& prob, int starts = 16, double tol = 1e-10, std::uint64_t seed = 1) {
    prob.validate();
    const int L = prob.levels();
    std::vector<double> c(L);
    for (int s = 0; s < L; ++s) c[s] = prob.value(s);

    // exhaustive small supports; a three-point support is a segment whose ends are two-point supports
    auto [best, sup] = detail::best_pair(c, prob.nbar);
    if (sup.first < 0) throw validation_error("infeasible constraints");
    std::vector<double> bestw = detail::pair_weights(L, sup, prob.nbar);

    // random feasible starts followed by constraint-preserving triple moves
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int st = 0; st < starts; ++st) {
        std::vector<double> w(L, 0.0);
        for (int r = 0; r < 4; ++r) {
            // random feasible two-point vertex, mixed in with random weight
            int a, b;
            do {
                a = int(U(rng) * L) % L;
                b = int(U(rng) * L) % L;
                if (a > b) std::swap(a, b);
            } while (!(a <= prob.nbar + 1e-12 && prob.nbar <= b + 1e-12) || (a == b && std::abs(a - prob.nbar) > 1e-12));
            auto v = detail::pair_weights(L, {a, b}, prob.nbar);
            const double lam = r == 0 ? 1.0 : U(rng);
            for (int s = 0; s < L; ++s) w[s] = (1 - lam) * w[s] + lam * v[s];
        }
        for (int sweep = 0; sweep < 200; ++sweep) {
            bool moved = false;
            for (int a = 0; a < L; ++a)
                for (int b = a + 1; b < L; ++b)
                    for (int cc = b + 1; cc < L; ++cc) {
                        if (w[a] + w[b] + w[cc] <= 0) continue;
                        moved = detail::triple_move(prob, w, a, b, cc) || moved;
                    }
            if (!moved) break;
        }
        const double v = detail::reduced_objective(prob, w);
        if (v > best + tol) {
            best = v;
            bestw = w;
        }
    }

    OracleReport r;
    r.best_value = best;
    for (int s = 0; s < L; ++s) {
        if (bestw[s] <= 1e-12) continue;
        const bool edge = s == 0 || s == 2 * prob.N;
        r.best_distribution[detail::reduced_label(prob.N, s)] = edge ? bestw[s] : 0.5 * bestw[s];
    }
    ProbeSpec ps{prob.N, prob.nbar, prob.encoding};
    if (prob.nbar > 0 && prob.nbar < 2.0 * prob.N) r.theorem_value = closed_form_qfi(ps);
    r.gap = r.theorem_value - r.best_value;
    r.starts = starts;
    return r;
}

// support of the reduced optimum: levels carrying weight
inline std::vector<int> reduced_support(const ReducedProblem& prob) {
    std::vector<double> c(prob.levels());
    for (int s = 0; s < prob.levels(); ++s) c[s] = prob.value(s);
    auto [v, sup] = detail::best_pair(c, prob.nbar);
    if (sup.first == sup.second) return {sup.first};
    return {sup.first, sup.second};
}

// first integer s >= N whose optimum at nbar = s + 1/2 puts weight on level 2N
inline int nonlinear_breakpoint(int N) {
    for (int s = N; s < 2 * N; ++s) {
        auto sup = reduced_support({N, s + 0.5, Encoding::nonlinear});
        if (sup.back() == 2 * N) return s;
    }
    return -1;
}

// ---------------------------------------------------------------- full problem over P_ij

struct FullProblem {
    int N = 1;
    double nbar = 0.5;
    Encoding encoding = Encoding::linear;
    int dim() const { return (N + 1) * (N + 1); }
    double g(int k) const {
        const int i = k / (N + 1), j = k % (N + 1);
        return encoding == Encoding::linear ? double(i - j) : double(i * i - j * j);
    }
    int n(int k) const { return k / (N + 1) + k % (N + 1); }
};

inline double full_objective(const FullProblem& p, const std::vector<double>& P) {
    double m1 = 0, m2 = 0;
    for (int k = 0; k < p.dim(); ++k) {
        m1 += P[k] * p.g(k);
        m2 += P[k] * p.g(k) * p.g(k);
    }
    return m2 - m1 * m1;
}

namespace detail {

// vertex of {P >= 0, sum P = 1, sum n P = nbar} maximizing sum c P
inline std::vector<double> full_lmo(const FullProblem& p, const std::vector<double>& c) {
    const int L = 2 * p.N + 1;
    std::vector<double> lv(L, -std::numeric_limits<double>::infinity());
    std::vector<int> arg(L, -1);
    for (int k = 0; k < p.dim(); ++k) {
        const int n = p.n(k);
        if (c[k] > lv[n]) {
            lv[n] = c[k];
            arg[n] = k;
        }
    }
    auto [v, sup] = best_pair(lv, p.nbar);
    auto w = pair_weights(L, sup, p.nbar);
    std::vector<double> V(p.dim(), 0.0);
    for (int s = 0; s < L; ++s)
        if (w[s] > 0) V[arg[s]] += w[s];
    return V;
}

inline std::vector<double> random_vertex(const FullProblem& p, std::mt19937_64& rng) {
    std::normal_distribution<double> Z(0.0, 1.0);
    std::vector<double> c(p.dim());
    for (auto& x : c) x = Z(rng);
    return full_lmo(p, c);
}

}  // namespace detail

// random feasible point: convex mixture of random vertices
inline std::vector<double> random_feasible_full(const FullProblem& p, std::mt19937_64& rng, int mix = 6) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> P(p.dim(), 0.0);
    double tot = 0;
    for (int r = 0; r < mix; ++r) {
        const double a = U(rng) + 1e-3;
        auto V = detail::random_vertex(p, rng);
        for (int k = 0; k < p.dim(); ++k) P[k] += a * V[k];
        tot += a;
    }
    for (auto& x : P) x /= tot;
    return P;
}

// Concave maximization by Frank-Wolfe with exact line search; each start runs until the
// duality gap drops below tol.
inline OracleReport brute_force_full(const FullProblem& prob, int starts = 8, double tol = 1e-10, std::uint64_t seed = 1, int max_iter = 20000) {
    if (prob.N < 1) throw validation_error("N must be >= 1");
    if (!(prob.nbar >= 0 && prob.nbar <= 2.0 * prob.N)) throw validation_error("infeasible constraints: nbar outside [0, 2N]");
    std::mt19937_64 rng(seed);
    const int d = prob.dim();
    double best = -1;
    std::vector<double> bestP;
    for (int st = 0; st < starts; ++st) {
        std::vector<double> P = random_feasible_full(prob, rng);
        std::vector<double> grad(d);
        for (int it = 0; it < max_iter; ++it) {
            double mu = 0;
            for (int k = 0; k < d; ++k) mu += P[k] * prob.g(k);
            for (int k = 0; k < d; ++k) grad[k] = prob.g(k) * prob.g(k) - 2 * mu * prob.g(k);
            auto V = detail::full_lmo(prob, grad);
            double gap = 0, A = 0, delta = 0;
            for (int k = 0; k < d; ++k) {
                const double D = V[k] - P[k];
                gap += grad[k] * D;
                A += D * prob.g(k) * prob.g(k);
                delta += D * prob.g(k);
            }
            if (gap <= tol) break;
            double gam = 1.0;
            if (delta != 0) gam = std::clamp((A - 2 * mu * delta) / (2 * delta * delta), 0.0, 1.0);
            for (int k = 0; k < d; ++k) P[k] += gam * (V[k] - P[k]);
        }
        const double v = full_objective(prob, P);
        if (v > best) {
            best = v;
            bestP = P;
        }
    }
    OracleReport r;
    r.best_value = best;
    r.starts = starts;
    const int N = prob.N;
    for (int k = 0; k < d; ++k)
        if (bestP[k] > 1e-9) r.best_distribution["P_" + std::to_string(k / (N + 1)) + "_" + std::to_string(k % (N + 1))] = bestP[k];
    for (int s = 1; s <= N; ++s) r.symmetry_error = std::max(r.symmetry_error, std::abs(bestP[s] - bestP[s * (N + 1)]));
    if (prob.nbar > 0 && prob.nbar < 2.0 * N) r.theorem_value = closed_form_qfi({N, prob.nbar, prob.encoding});
    r.gap = r.theorem_value - r.best_value;
    return r;
}

}  // namespace fockmetro
