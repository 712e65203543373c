#pragma once

#include "loss.hpp"
#include "metrology.hpp"

namespace fockmetro {

enum class Region { opt_beats_lossless_noon, opt_beats_lossy_noon, noon_wins };

inline const char* to_string(Region r) {
    switch (r) {
        case Region::opt_beats_lossless_noon: return "opt_beats_lossless_noon";
        case Region::opt_beats_lossy_noon: return "opt_beats_lossy_noon";
        case Region::noon_wins: return "noon_wins";
    }
    return "?";
}

struct LossmapRow {
    double T1 = 1, T2 = 1;
    double F_opt_loss = 0, F_noon_loss = 0, F_noon_lossless = 0;
    Region region = Region::noon_wins;
};

inline double lossy_qfi(const TwoModeState& s, Encoding e, const LossChannel& ch) { return qfi_mixed(apply_loss(s, ch), e); }

inline int noon_photons(double nbar) {
    if (!is_integer(nbar) || nbar < 1) throw validation_error("NOON comparison needs an integer nbar >= 1");
    return int(std::lround(nbar));
}

inline double noon_lossless_qfi(int n, Encoding e) {
    const double a = n;
    return e == Encoding::linear ? a * a : a * a * a * a;
}

inline Region classify_region(double F_opt_loss, double F_noon_loss, double F_noon_lossless) {
    if (F_opt_loss > F_noon_lossless) return Region::opt_beats_lossless_noon;
    if (F_opt_loss > F_noon_loss) return Region::opt_beats_lossy_noon;
    return Region::noon_wins;
}

// transmissions k/(grid-1), k = 0..grid-1
inline std::vector<double> transmission_axis(int grid) {
    if (grid < 2) throw validation_error("grid must be >= 2");
    std::vector<double> t(grid);
    for (int k = 0; k < grid; ++k) t[k] = double(k) / (grid - 1);
    return t;
}

// rows ordered T1-major
inline std::vector<LossmapRow> lossmap(const ProbeSpec& spec, int grid) {
    const TwoModeState opt = optimal_state(spec);
    const int n = noon_photons(spec.nbar);
    const TwoModeState noon = noon_state(n, 0.0, n);
    const double F0 = noon_lossless_qfi(n, spec.encoding);
    const auto ax = transmission_axis(grid);
    std::vector<LossmapRow> rows;
    rows.reserve(std::size_t(grid) * grid);
    for (double t1 : ax)
        for (double t2 : ax) {
            LossmapRow r;
            r.T1 = t1;
            r.T2 = t2;
            const LossChannel ch(t1, t2);
            r.F_opt_loss = lossy_qfi(opt, spec.encoding, ch);
            r.F_noon_loss = lossy_qfi(noon, spec.encoding, ch);
            r.F_noon_lossless = F0;
            r.region = classify_region(r.F_opt_loss, r.F_noon_loss, r.F_noon_lossless);
            rows.push_back(r);
        }
    return rows;
}

struct RobustnessRow {
    double nbar = 0, threshold = 0, proportion = 0;
};

// fraction of the (T1, T2) grid where F_loss / F >= threshold
inline std::vector<RobustnessRow> robustness(int N, Encoding e, const std::vector<double>& nbars, const std::vector<double>& thresholds, int grid) {
    const auto ax = transmission_axis(grid);
    std::vector<RobustnessRow> out;
    for (double nb : nbars) {
        ProbeSpec s{N, nb, e};
        const TwoModeState st = optimal_state(s);
        const double F = closed_form_qfi(s);
        std::vector<double> ratio;
        ratio.reserve(ax.size() * ax.size());
        for (double t1 : ax)
            for (double t2 : ax) ratio.push_back(lossy_qfi(st, e, LossChannel(t1, t2)) / F);
        for (double th : thresholds) {
            std::size_t c = 0;
            for (double r : ratio) c += r >= th;
            out.push_back({nb, th, double(c) / ratio.size()});
        }
    }
    return out;
}

// nbar = step, 2 step, ... below 2N
inline std::vector<double> nbar_axis(int N, double step) {
    if (!(step > 0)) throw validation_error("nbar step must be positive");
    std::vector<double> v;
    for (int k = 1; k * step < 2.0 * N - 1e-12; ++k) v.push_back(k * step);
    return v;
}

}  // namespace fockmetro
