#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>

#include "measurement.hpp"

namespace fockmetro {

enum class Objective { sharpness, mutual_information, none };

inline const char* to_string(Objective o) {
    switch (o) {
        case Objective::sharpness: return "sharpness";
        case Objective::mutual_information: return "mutual_information";
        case Objective::none: return "none";
    }
    return "?";
}

inline Objective parse_objective(const std::string& s) {
    if (s == "sharpness") return Objective::sharpness;
    if (s == "mutual_information" || s == "mi") return Objective::mutual_information;
    if (s == "none" || s == "bayes") return Objective::none;
    throw validation_error("unknown objective '" + s + "'");
}

// ---------------------------------------------------------------- prior grid

// Weights are density values; nodes outside [first, last] are exactly zero.
struct PriorGrid {
    double lo = 0, hi = 1;
    std::vector<double> w;
    int first = 0, last = -1;

    PriorGrid() = default;
    PriorGrid(double a, double b, int K) : lo(a), hi(b), w(K, 1.0 / (b - a)), first(0), last(K - 1) {
        if (K < 2) throw validation_error("prior grid needs K >= 2");
        if (!(b > a)) throw validation_error("prior support must have hi > lo");
    }

    int K() const { return int(w.size()); }
    double step() const { return (hi - lo) / (K() - 1); }
    double node(int k) const { return lo + (hi - lo) * k / (K() - 1); }
    double tw(int k) const { return (k == 0 || k == K() - 1) ? 0.5 * step() : step(); }

    double integral() const {
        double s = 0;
        for (int k = first; k <= last; ++k) s += tw(k) * w[k];
        return s;
    }
};

// three quoted windows for N = 10, otherwise a half-period window centered on phi_true
inline PriorGrid default_prior(const MeasurementModel& m, std::optional<double> phi_true = std::nullopt, int K = 2000) {
    std::optional<std::pair<double, double>> preset;
    if (m.spec.N == 10) {
        if (m.spec.encoding == Encoding::linear) preset = {0.0, pi / 10};
        else if (is_integer(m.spec.nbar) && std::lround(m.spec.nbar) == 8) preset = {3 * pi / 50, 7 * pi / 100};
        else if (is_integer(m.spec.nbar) && std::lround(m.spec.nbar) == 12) preset = {pi / 16, 7 * pi / 96};
    }
    if (preset && (!phi_true || (*phi_true >= preset->first && *phi_true <= preset->second)))
        return PriorGrid(preset->first, preset->second, K);
    const double width = 0.5 * model_period(m);
    const double lo = phi_true ? *phi_true - 0.5 * width : 0.0;
    return PriorGrid(lo, lo + width, K);
}

// ---------------------------------------------------------------- grouped likelihood

// Outcomes whose Fourier coefficient vectors are positive multiples of each other carry the
// same information about phi; they are merged for the update and the objectives.
struct GroupedLikelihood {
    TrigLikelihood full;    // one entry per physical outcome
    TrigLikelihood groups;  // summed coefficients per group
    std::vector<int> group_of;
};

inline GroupedLikelihood group_outcomes(const TrigLikelihood& L, double tol = 1e-12) {
    GroupedLikelihood G;
    G.full = L;
    G.groups.omega0 = L.omega0;
    G.groups.Q = L.Q;
    std::vector<std::vector<cplx>> unit;
    G.group_of.assign(L.outcomes, -1);
    auto normed = [&](const std::vector<cplx>& v) {
        double n = 0;
        for (auto& c : v) n += std::norm(c);
        n = std::sqrt(n);
        std::vector<cplx> u(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) u[i] = n > 0 ? v[i] / n : cplx{};
        return u;
    };
    for (int y = 0; y < L.outcomes; ++y) {
        auto u = normed(L.C[y]);
        int g = -1;
        for (std::size_t h = 0; h < unit.size() && g < 0; ++h) {
            double d = 0;
            for (std::size_t i = 0; i < u.size(); ++i) d = std::max(d, std::abs(u[i] - unit[h][i]));
            if (d <= tol) g = int(h);
        }
        if (g < 0) {
            g = int(unit.size());
            unit.push_back(u);
            G.groups.C.emplace_back(L.Q + 1, cplx{});
        }
        G.group_of[y] = g;
        for (int q = 0; q <= L.Q; ++q) G.groups.C[g][q] += L.C[y][q];
    }
    G.groups.outcomes = int(G.groups.C.size());
    return G;
}

// ---------------------------------------------------------------- Bayes update, MAP, variance

inline void trim_active(PriorGrid& p, double rel = 1e-30) {
    double mx = 0;
    for (int k = p.first; k <= p.last; ++k) mx = std::max(mx, p.w[k]);
    const double cut = mx * rel;
    while (p.first < p.last && p.w[p.first] < cut) p.w[p.first++] = 0;
    while (p.last > p.first && p.w[p.last] < cut) p.w[p.last--] = 0;
}

// E_k = exp(i w0 phi_k) on the grid, shared across runs
struct GridPhases {
    std::vector<cplx> E;
    GridPhases() = default;
    GridPhases(const PriorGrid& p, double omega0) : E(p.K()) {
        for (int k = 0; k < p.K(); ++k) E[k] = std::polar(1.0, omega0 * p.node(k));
    }
};

inline double eval_one(const TrigLikelihood& L, int y, cplx z) {
    const auto& c = L.C[y];
    cplx zq = 1.0, s = 0;
    for (int q = 1; q <= L.Q; ++q) {
        zq *= z;
        s += c[q] * zq;
    }
    return c[0].real() + 2 * s.real();
}

inline void bayes_update(PriorGrid& p, const TrigLikelihood& L, int y, double phi_u, const GridPhases* ph = nullptr) {
    if (y < 0 || y >= L.outcomes) throw validation_error("bayes_update: outcome index out of range");
    const cplx zu = std::polar(1.0, L.omega0 * phi_u);
    double Z = 0;
    for (int k = p.first; k <= p.last; ++k) {
        const cplx z = ph ? ph->E[k] * zu : std::polar(1.0, L.omega0 * (p.node(k) + phi_u));
        const double lk = std::max(0.0, eval_one(L, y, z));
        p.w[k] *= lk;
        Z += p.tw(k) * p.w[k];
    }
    if (!(Z >= 1e-300)) throw numerical_error("bayes_update: degenerate evidence (outcome impossible under the prior)");
    const double inv = 1.0 / Z;
    for (int k = p.first; k <= p.last; ++k) p.w[k] *= inv;
    trim_active(p);
}

inline double map_estimate(const PriorGrid& p) {
    int best = p.first;
    for (int k = p.first; k <= p.last; ++k)
        if (p.w[k] > p.w[best]) best = k;
    double x = p.node(best);
    if (best > 0 && best < p.K() - 1) {
        const double a = p.w[best - 1], b = p.w[best], c = p.w[best + 1];
        const double den = a - 2 * b + c;
        if (den < 0) {
            const double d = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
            x += d * p.step();
        }
    }
    return x;
}

inline std::pair<double, double> posterior_mean_variance(const PriorGrid& p) {
    double m0 = 0, m1 = 0;
    for (int k = p.first; k <= p.last; ++k) {
        const double t = p.tw(k) * p.w[k];
        m0 += t;
        m1 += t * p.node(k);
    }
    const double mean = m1 / m0;
    double v = 0;
    for (int k = p.first; k <= p.last; ++k) {
        const double d = p.node(k) - mean;
        v += p.tw(k) * p.w[k] * d * d;
    }
    return {mean, std::max(0.0, v / m0)};
}

inline double posterior_variance(const PriorGrid& p) { return posterior_mean_variance(p).second; }

// ---------------------------------------------------------------- objectives

namespace detail {

// M_q = int exp(i(1 + q w0) phi) p(phi) dphi for q = -Q..Q, stored at index q + Q
inline std::vector<cplx> sharpness_moments(const PriorGrid& p, const TrigLikelihood& L, const GridPhases* ph) {
    const int Q = L.Q;
    std::vector<cplx> M(2 * Q + 1, cplx{});
    for (int k = p.first; k <= p.last; ++k) {
        const double t = p.tw(k) * p.w[k];
        if (t == 0) continue;
        const double x = p.node(k);
        const cplx base = std::polar(t, x);
        const cplx z = ph ? ph->E[k] : std::polar(1.0, L.omega0 * x);
        M[Q] += base;
        cplx zp = base, zm = base;
        const cplx zc = std::conj(z);
        for (int q = 1; q <= Q; ++q) {
            zp *= z;
            zm *= zc;
            M[Q + q] += zp;
            M[Q - q] += zm;
        }
    }
    return M;
}

inline double sharpness_from_moments(const TrigLikelihood& L, const std::vector<cplx>& M, const cplx* zpow) {
    const int Q = L.Q;
    double s = 0;
    for (int y = 0; y < L.outcomes; ++y) {
        const auto& c = L.C[y];
        cplx a = c[0].real() * M[Q];
        for (int q = 1; q <= Q; ++q) a += c[q] * zpow[q] * M[Q + q] + std::conj(c[q]) * std::conj(zpow[q]) * M[Q - q];
        s += std::abs(a);
    }
    return s;
}

inline double xlog2x(double p) { return p > 0 ? p * std::log2(p) : 0.0; }

}  // namespace detail

inline double sharpness(const PriorGrid& p, const TrigLikelihood& L, double phi_u) {
    auto M = detail::sharpness_moments(p, L, nullptr);
    std::vector<cplx> zp(L.Q + 1, 1.0);
    const cplx z = std::polar(1.0, L.omega0 * phi_u);
    for (int q = 1; q <= L.Q; ++q) zp[q] = zp[q - 1] * z;
    return detail::sharpness_from_moments(L, M, zp.data());
}

// direct trapezoid evaluation, in bits
inline double mutual_information(const PriorGrid& p, const TrigLikelihood& L, double phi_u) {
    std::vector<double> Pbar(L.outcomes, 0.0), P(L.outcomes);
    double cond = 0;
    for (int k = p.first; k <= p.last; ++k) {
        const double t = p.tw(k) * p.w[k];
        if (t == 0) continue;
        L.eval(p.node(k) + phi_u, P.data());
        for (int y = 0; y < L.outcomes; ++y) {
            const double v = std::max(0.0, P[y]);
            Pbar[y] += t * v;
            cond += t * detail::xlog2x(v);
        }
    }
    double hy = 0;
    for (double v : Pbar) hy -= detail::xlog2x(v);
    return hy + cond;
}

// Tabulated conditional entropy h(psi) = -sum_y P log2 P over one period, linear interpolation.
// Two periods are stored so shifted lookups need no wrap.
struct EntropyTable {
    double period = 1;
    int n = 0;
    std::vector<double> h;

    EntropyTable() = default;
    EntropyTable(const TrigLikelihood& L, int points = 4096) : period(L.period()), n(points), h(2 * points + 1) {
        std::vector<double> P(L.outcomes);
        for (int t = 0; t < n; ++t) {
            L.eval(period * t / n, P.data());
            double s = 0;
            for (double v : P) s -= detail::xlog2x(std::max(0.0, v));
            h[t] = s;
            h[t + n] = s;
        }
        h[2 * n] = h[0];
    }

    double operator()(double psi) const {
        double x = std::fmod(psi, period);
        if (x < 0) x += period;
        x *= n / period;
        const int i = std::min(n - 1, int(x));
        const double f = x - i;
        return h[i] + f * (h[i + 1] - h[i]);
    }
};

// Candidate grid and search state shared by all runs of one ensemble.
struct ControlContext {
    const TrigLikelihood* L = nullptr;
    const GridPhases* ph = nullptr;
    const EntropyTable* ent = nullptr;
    int G = 720;
    int ratio = 1;  // entropy-table points per candidate step
    double period = 1;
    std::vector<std::vector<cplx>> zpow;  // zpow[c][q] = exp(i q w0 phi_c)
    std::vector<double> zre, zim;         // same, flattened as [c * (Q + 1) + q]
    bool exhaustive = false;              // evaluate every candidate for mutual information

    ControlContext() = default;
    ControlContext(const TrigLikelihood& lik, int grid) : L(&lik), G(grid), period(lik.period()) {
        if (grid < 1) throw validation_error("control grid must have at least one point");
        ratio = (4096 + G - 1) / G;
        zpow.assign(G, std::vector<cplx>(lik.Q + 1, 1.0));
        zre.assign(std::size_t(G) * (lik.Q + 1), 1.0);
        zim.assign(std::size_t(G) * (lik.Q + 1), 0.0);
        for (int c = 0; c < G; ++c) {
            const cplx z = std::polar(1.0, lik.omega0 * candidate(c));
            for (int q = 1; q <= lik.Q; ++q) zpow[c][q] = zpow[c][q - 1] * z;
            for (int q = 0; q <= lik.Q; ++q) {
                zre[std::size_t(c) * (lik.Q + 1) + q] = zpow[c][q].real();
                zim[std::size_t(c) * (lik.Q + 1) + q] = zpow[c][q].imag();
            }
        }
    }

    double candidate(int c) const { return period * c / G; }
    int table_points() const { return G * ratio; }
};

namespace detail {

struct MiState {
    std::vector<cplx> Nq;  // int exp(i q w0 phi) p, q = 0..Q
    std::vector<double> bw, frac;
    std::vector<int> base;
};

inline MiState mi_prepare(const PriorGrid& p, const ControlContext& ctx, int bins = 64) {
    const TrigLikelihood& L = *ctx.L;
    MiState s;
    s.Nq.assign(L.Q + 1, cplx{});
    const int n = p.last - p.first + 1;
    const int B = std::min(bins, n);
    std::vector<double> bw(B, 0.0), bc(B, 0.0);
    for (int k = p.first; k <= p.last; ++k) {
        const double t = p.tw(k) * p.w[k];
        if (t == 0) continue;
        const cplx z = ctx.ph ? ctx.ph->E[k] : std::polar(1.0, L.omega0 * p.node(k));
        cplx zq = t;
        s.Nq[0] += zq;
        for (int q = 1; q <= L.Q; ++q) {
            zq *= z;
            s.Nq[q] += zq;
        }
        const int b = int((long long)(k - p.first) * B / n);
        bw[b] += t;
        bc[b] += t * p.node(k);
    }
    const int tp = ctx.ent->n;
    for (int b = 0; b < B; ++b) {
        if (bw[b] <= 0) continue;
        double x = std::fmod(bc[b] / bw[b], ctx.period);
        if (x < 0) x += ctx.period;
        x *= tp / ctx.period;
        const int i = std::min(tp - 1, int(x));
        s.bw.push_back(bw[b]);
        s.base.push_back(i);
        s.frac.push_back(x - i);
    }
    return s;
}

inline double mi_fast(const MiState& s, const ControlContext& ctx, int c) {
    const TrigLikelihood& L = *ctx.L;
    const int Q = L.Q;
    const double* zr = &ctx.zre[std::size_t(c) * (Q + 1)];
    const double* zi = &ctx.zim[std::size_t(c) * (Q + 1)];
    double hy = 0;
    for (int y = 0; y < L.outcomes; ++y) {
        const auto& C = L.C[y];
        double a = 0;
        for (int q = 1; q <= Q; ++q) {
            const cplx cn = C[q] * s.Nq[q];
            a += cn.real() * zr[q] - cn.imag() * zi[q];
        }
        hy -= xlog2x(C[0].real() * s.Nq[0].real() + 2 * a);
    }
    const double* h = ctx.ent->h.data();
    const int off = c * ctx.ratio;
    double hc = 0;
    for (std::size_t b = 0; b < s.bw.size(); ++b) {
        const int i = s.base[b] + off;
        hc += s.bw[b] * (h[i] + s.frac[b] * (h[i + 1] - h[i]));
    }
    return hy - hc;
}

// |sum over terms| per group, evaluated for every candidate at once
inline void sharpness_all(const TrigLikelihood& L, const std::vector<cplx>& M, const ControlContext& ctx, std::vector<double>& out) {
    const int Q = L.Q, G = ctx.G;
    out.assign(G, 0.0);
    std::vector<double> a0r(L.outcomes), a0i(L.outcomes), ar(L.outcomes * (Q + 1)), ai(ar.size()), br(ar.size()), bi(ar.size());
    for (int y = 0; y < L.outcomes; ++y) {
        const auto& c = L.C[y];
        const cplx a0 = c[0].real() * M[Q];
        a0r[y] = a0.real();
        a0i[y] = a0.imag();
        for (int q = 1; q <= Q; ++q) {
            const cplx al = c[q] * M[Q + q], be = std::conj(c[q]) * M[Q - q];
            ar[y * (Q + 1) + q] = al.real();
            ai[y * (Q + 1) + q] = al.imag();
            br[y * (Q + 1) + q] = be.real();
            bi[y * (Q + 1) + q] = be.imag();
        }
    }
    for (int c = 0; c < G; ++c) {
        const double* zr = &ctx.zre[std::size_t(c) * (Q + 1)];
        const double* zi = &ctx.zim[std::size_t(c) * (Q + 1)];
        double s = 0;
        for (int y = 0; y < L.outcomes; ++y) {
            double re = a0r[y], im = a0i[y];
            const int o = y * (Q + 1);
            for (int q = 1; q <= Q; ++q) {
                // al z^q + be conj(z^q)
                re += (ar[o + q] + br[o + q]) * zr[q] - (ai[o + q] - bi[o + q]) * zi[q];
                im += (ai[o + q] + bi[o + q]) * zr[q] + (ar[o + q] - br[o + q]) * zi[q];
            }
            s += std::sqrt(re * re + im * im);
        }
        out[c] = s;
    }
}

}  // namespace detail

// index of the chosen candidate; ties go to the smallest phi_u
inline int choose_control_index(const PriorGrid& p, const ControlContext& ctx, Objective obj) {
    if (obj == Objective::none) return 0;
    const int G = ctx.G;
    if (obj == Objective::sharpness) {
        auto M = detail::sharpness_moments(p, *ctx.L, ctx.ph);
        std::vector<double> vals;
        detail::sharpness_all(*ctx.L, M, ctx, vals);
        int best = 0;
        double bv = -1;
        for (int c = 0; c < G; ++c) {
            const double v = vals[c];
            if (v > bv) {
                bv = v;
                best = c;
            }
        }
        return best;
    }
    if (!ctx.ent || ctx.ent->n != ctx.table_points())
        throw validation_error("choose_control: mutual information needs an entropy table aligned with the candidate grid");
    const auto st = detail::mi_prepare(p, ctx);
    std::vector<double> val(G, std::numeric_limits<double>::quiet_NaN());
    auto get = [&](int c) {
        c = ((c % G) + G) % G;
        if (std::isnan(val[c])) val[c] = detail::mi_fast(st, ctx, c);
        return val[c];
    };
    const int stride = ctx.exhaustive ? 1 : std::max(1, G / 48);
    if (stride == 1) {
        for (int c = 0; c < G; ++c) get(c);
    } else {
        // coarse pass, then every fine candidate within one coarse step of the two best
        int b1 = -1, b2 = -1;
        for (int c = 0; c < G; c += stride) {
            const double v = get(c);
            if (b1 < 0 || v > val[b1]) {
                b2 = b1;
                b1 = c;
            } else if (b2 < 0 || v > val[b2]) {
                b2 = c;
            }
        }
        for (int centre : {b1, b2}) {
            if (centre < 0) continue;
            for (int d = -stride + 1; d < stride; ++d) get(centre + d);
        }
    }
    int best = -1;
    for (int c = 0; c < G; ++c)
        if (!std::isnan(val[c]) && (best < 0 || val[c] > val[best])) best = c;
    return best;
}

inline double choose_control(const PriorGrid& p, const TrigLikelihood& L, Objective obj, int control_grid = 720, bool exhaustive = true) {
    if (obj == Objective::none) return 0.0;
    ControlContext ctx(L, control_grid);
    ctx.exhaustive = exhaustive;
    EntropyTable ent;
    if (obj == Objective::mutual_information) {
        ent = EntropyTable(L, ctx.table_points());
        ctx.ent = &ent;
    }
    return ctx.candidate(choose_control_index(p, ctx, obj));
}

// ---------------------------------------------------------------- randomness and sampling

inline std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline constexpr const char* kRngAlgorithm = "mt19937_64 seeded by splitmix64(seed ^ splitmix64(run_index)); u = (x >> 11) * 2^-53";

struct RngStream {
    std::mt19937_64 eng;
    RngStream(std::uint64_t seed, std::uint64_t run) {
        std::uint64_t r = run;
        std::uint64_t s = seed ^ splitmix64(r);
        eng.seed(splitmix64(s));
    }
    double uniform() { return double(eng() >> 11) * 0x1.0p-53; }
};

// inverse CDF in the given outcome order (parity: +1, -1; counting: m = 0, 1, ...)
inline int simulate_outcome(const std::vector<double>& P, double u) {
    double cum = 0;
    const int n = int(P.size());
    for (int y = 0; y < n; ++y) {
        cum += std::max(0.0, P[y]);
        if (u < cum) return y;
    }
    for (int y = n - 1; y >= 0; --y)
        if (P[y] > 0) return y;
    return n - 1;
}

inline int simulate_outcome(const TrigLikelihood& L, double phi_true, double phi_u, RngStream& rng) {
    return simulate_outcome(L.probs(phi_true + phi_u), rng.uniform());
}

// ---------------------------------------------------------------- ensembles

struct AdaptiveConfig {
    MeasurementModel model;
    Objective objective = Objective::sharpness;
    int iterations = 1000;
    int runs = 1;
    double phi_true = 0.2;
    std::uint64_t seed = 1;
    int control_grid = 720;
    int grid_points = 2000;
    std::optional<std::pair<double, double>> prior_window;
    int threads = 0;
    bool keep_trajectories = false;
    bool exhaustive_mi = false;
};

struct TrajectoryRecord {
    int iter = 0;
    int outcome = 0;
    double phi_u = 0, phi_hat = 0, var = 0;
};

struct EnsembleSummary {
    std::vector<int> iters;
    std::vector<double> mean_phi_hat, mean_var;
    int runs = 0;
    double prior_lo = 0, prior_hi = 0;
    std::vector<std::vector<TrajectoryRecord>> trajectories;
};

inline bool recorded_iteration(int m, int total) { return m <= 1000 || m % 10 == 0 || m == total; }

inline PriorGrid config_prior(const AdaptiveConfig& c) {
    PriorGrid p = c.prior_window ? PriorGrid(c.prior_window->first, c.prior_window->second, c.grid_points)
                                 : default_prior(c.model, c.phi_true, c.grid_points);
    if (c.phi_true < p.lo || c.phi_true > p.hi) throw validation_error("phi_true lies outside the prior support");
    return p;
}

inline void validate_config(const AdaptiveConfig& c) {
    if (c.iterations < 1) throw validation_error("iterations must be >= 1");
    if (c.runs < 1) throw validation_error("runs must be >= 1");
    if (c.control_grid < 1) throw validation_error("control grid must be >= 1");
}

inline EnsembleSummary run_ensemble(const AdaptiveConfig& cfg) {
    validate_config(cfg);
    const PriorGrid prior0 = config_prior(cfg);
    const GroupedLikelihood GL = group_outcomes(build_likelihood(cfg.model));
    const TrigLikelihood& Lg = GL.groups;
    const GridPhases ph(prior0, Lg.omega0);
    ControlContext ctx(Lg, cfg.control_grid);
    ctx.ph = &ph;
    ctx.exhaustive = cfg.exhaustive_mi;
    EntropyTable ent;
    if (cfg.objective == Objective::mutual_information) {
        ent = EntropyTable(Lg, ctx.table_points());
        ctx.ent = &ent;
    }

    std::vector<int> iters;
    for (int m = 1; m <= cfg.iterations; ++m)
        if (recorded_iteration(m, cfg.iterations)) iters.push_back(m);
    const std::size_t R = iters.size();

    std::vector<std::vector<double>> hat(cfg.runs), var(cfg.runs);
    std::vector<std::vector<TrajectoryRecord>> traj(cfg.keep_trajectories ? cfg.runs : 0);

    auto one_run = [&](int r) {
        RngStream rng(cfg.seed, std::uint64_t(r));
        PriorGrid p = prior0;
        hat[r].resize(R);
        var[r].resize(R);
        std::vector<double> P(GL.full.outcomes);
        std::size_t slot = 0;
        for (int m = 1; m <= cfg.iterations; ++m) {
            const double phu = cfg.objective == Objective::none ? 0.0 : ctx.candidate(choose_control_index(p, ctx, cfg.objective));
            GL.full.eval(cfg.phi_true + phu, P.data());
            const int y = simulate_outcome(P, rng.uniform());
            bayes_update(p, Lg, GL.group_of[y], phu, &ph);
            if (slot < R && iters[slot] == m) {
                const double est = map_estimate(p);
                const double v = posterior_variance(p);
                hat[r][slot] = est;
                var[r][slot] = v;
                ++slot;
                if (cfg.keep_trajectories) traj[r].push_back({m, y, phu, est, v});
            }
        }
    };

    int nt = cfg.threads > 0 ? cfg.threads : int(std::max(1u, std::thread::hardware_concurrency()));
    nt = std::min(nt, cfg.runs);
    if (nt <= 1) {
        for (int r = 0; r < cfg.runs; ++r) one_run(r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::exception_ptr> errs(nt);
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (int r; (r = next++) < cfg.runs;) one_run(r);
                } catch (...) {
                    errs[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }

    EnsembleSummary S;
    S.iters = iters;
    S.runs = cfg.runs;
    S.prior_lo = prior0.lo;
    S.prior_hi = prior0.hi;
    S.mean_phi_hat.assign(R, 0.0);
    S.mean_var.assign(R, 0.0);
    for (int r = 0; r < cfg.runs; ++r)
        for (std::size_t i = 0; i < R; ++i) {
            S.mean_phi_hat[i] += hat[r][i];
            S.mean_var[i] += var[r][i];
        }
    for (std::size_t i = 0; i < R; ++i) {
        S.mean_phi_hat[i] /= cfg.runs;
        S.mean_var[i] /= cfg.runs;
    }
    S.trajectories = std::move(traj);
    return S;
}

}  // namespace fockmetro
