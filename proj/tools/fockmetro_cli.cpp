#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <fockmetro/fockmetro.hpp>

using namespace fockmetro;
namespace fs = std::filesystem;

namespace {

struct Common {
    int N = 10;
    double nbar = 8;
    std::string encoding = "linear";
    double theta1 = 0, theta2 = 0, theta3 = 0, theta = 0;
    std::optional<double> T1, T2;
    std::string out;
};

void add_spec(CLI::App* c, Common& o) {
    c->add_option("--N", o.N, "per-mode cutoff")->required();
    c->add_option("--nbar", o.nbar, "mean photon number")->required();
    c->add_option("--encoding", o.encoding, "linear | nonlinear");
    c->add_option("--theta1", o.theta1);
    c->add_option("--theta2", o.theta2);
    c->add_option("--theta3", o.theta3);
    c->add_option("--theta", o.theta);
}

void add_loss(CLI::App* c, Common& o) {
    c->add_option("--T1", o.T1, "transmission of mode a");
    c->add_option("--T2", o.T2, "transmission of mode b");
}

void add_out(CLI::App* c, Common& o) { c->add_option("--out", o.out, "output file (default: $FOCKMETRO_OUT_DIR/<command>.<ext>)"); }

ProbeSpec spec_of(const Common& o) {
    ProbeSpec s{o.N, o.nbar, parse_encoding(o.encoding), o.theta1, o.theta2, o.theta3, o.theta};
    validate_spec(s);
    return s;
}

std::optional<LossChannel> channel_of(const Common& o) {
    if (!o.T1 && !o.T2) return std::nullopt;
    return LossChannel(o.T1.value_or(1.0), o.T2.value_or(1.0));
}

json spec_json(const ProbeSpec& s) {
    return {{"N", s.N}, {"nbar", s.nbar}, {"encoding", to_string(s.encoding)}, {"theta1", s.theta1},
            {"theta2", s.theta2}, {"theta3", s.theta3}, {"theta", s.theta}};
}

std::string out_path(const Common& o, const std::string& cmd, const std::string& ext) {
    if (!o.out.empty()) return o.out;
    const char* dir = std::getenv("FOCKMETRO_OUT_DIR");
    return (fs::path(dir && *dir ? dir : ".") / (cmd + "." + ext)).string();
}

void emit(const std::string& path, const std::string& body, const std::string& cmd, const json& params, std::uint64_t seed = 0) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text(path, body);
    RunManifest m;
    m.command = cmd;
    m.parameters = params;
    m.seed = seed;
    m.timestamp = utc_now();
    write_text(path + ".manifest.json", m.to_json().dump(2) + "\n");
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            v.push_back(std::stod(tok));
        } catch (...) {
            throw validation_error("cannot parse number '" + tok + "'");
        }
    }
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal Fock-space probe states: QFI, measurements, loss and adaptive estimation"};
    app.require_subcommand(1);
    Common o;

    // state
    bool mzi = false;
    auto* st = app.add_subcommand("state", "optimal probe state as JSON");
    add_spec(st, o);
    add_out(st, o);
    st->add_flag("--mzi", mzi, "rotate by exp(i pi Jx / 2)");

    // qfi
    auto* qf = app.add_subcommand("qfi", "closed-form and numeric QFI");
    add_spec(qf, o);
    add_loss(qf, o);
    add_out(qf, o);

    // cfi
    std::string meas = "parity";
    double phi = 0.2, phi_u = 0.0;
    int cfi_grid = 0;
    auto* cf = app.add_subcommand("cfi", "classical Fisher information of parity or photon counting");
    add_spec(cf, o);
    add_loss(cf, o);
    add_out(cf, o);
    cf->add_option("--measurement", meas, "parity | counting");
    cf->add_option("--phi", phi);
    cf->add_option("--phi-u", phi_u);
    cf->add_option("--grid", cfi_grid, "tabulate over one period instead of a single point");

    // lossmap
    int lm_grid = 41;
    bool robust = false;
    std::string thresholds = "0.6,0.8";
    double nbar_step = 0.5;
    auto* lm = app.add_subcommand("lossmap", "QFI under loss versus NOON, or robustness proportions");
    lm->add_option("--N", o.N)->required();
    lm->add_option("--nbar", o.nbar);
    lm->add_option("--encoding", o.encoding);
    lm->add_option("--grid", lm_grid, "points per transmission axis");
    lm->add_flag("--robustness", robust);
    lm->add_option("--thresholds", thresholds);
    lm->add_option("--nbar-step", nbar_step);
    add_out(lm, o);

    // adapt
    std::string objective = "sharpness";
    int iterations = 1000, runs = 1, control_grid = 720, grid_points = 2000, threads = 0;
    double phi_true = 0.2;
    std::uint64_t seed = 1;
    std::vector<double> prior;
    bool traj = false;
    auto* ad = app.add_subcommand("adapt", "Bayesian adaptive phase estimation ensemble");
    add_spec(ad, o);
    add_loss(ad, o);
    add_out(ad, o);
    ad->add_option("--measurement", meas);
    ad->add_option("--objective", objective, "sharpness | mutual_information | none");
    ad->add_option("--iterations", iterations);
    ad->add_option("--runs", runs);
    ad->add_option("--phi-true", phi_true);
    ad->add_option("--seed", seed);
    ad->add_option("--control-grid", control_grid);
    ad->add_option("--grid-points", grid_points);
    ad->add_option("--prior", prior, "lo hi")->expected(2);
    ad->add_option("--threads", threads, "0 = auto");
    ad->add_flag("--trajectories", traj, "also write per-run trajectories");

    // oracle
    std::string mode = "reduced";
    int starts = 16;
    double tol = 1e-10;
    bool breakpoint = false;
    auto* orc = app.add_subcommand("oracle", "brute-force check of the optimal-state theorems");
    orc->add_option("--N", o.N)->required();
    orc->add_option("--nbar", o.nbar);
    orc->add_option("--encoding", o.encoding);
    orc->add_option("--mode", mode, "reduced | full");
    orc->add_option("--starts", starts);
    orc->add_option("--tol", tol);
    orc->add_option("--seed", seed);
    orc->add_option("--threads", threads, "accepted for symmetry; restarts run in order");
    orc->add_flag("--breakpoint", breakpoint, "report the nonlinear breakpoint instead");
    add_out(orc, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (st->parsed()) {
            const ProbeSpec s = spec_of(o);
            TwoModeState psi = optimal_state(s);
            if (mzi) psi = beam_splitter_50_50(psi, BSDirection::inverse);
            json j{{"spec", spec_json(s)}, {"branch", to_string(classify_regime(s).branch)}, {"mzi", mzi}, {"state", state_to_json(psi)}};
            const std::string body = j.dump(2) + "\n";
            std::cout << body;
            emit(out_path(o, "state", "json"), body, "state", {{"spec", spec_json(s)}, {"mzi", mzi}});
        } else if (qf->parsed()) {
            const ProbeSpec s = spec_of(o);
            const auto ch = channel_of(o);
            const TwoModeState psi = optimal_state(s);
            json j{{"spec", spec_json(s)}, {"branch", to_string(classify_regime(s).branch)}};
            if (ch) {
                j["T1"] = ch->T1;
                j["T2"] = ch->T2;
                j["qfi_lossless_closed_form"] = closed_form_qfi(s);
                j["qfi_mixed"] = qfi_mixed(apply_loss(psi, *ch), s.encoding);
            } else {
                j["qfi_closed_form"] = closed_form_qfi(s);
                j["qfi_pure"] = qfi_pure(psi, s.encoding);
            }
            const std::string body = j.dump(2) + "\n";
            std::cout << body;
            emit(out_path(o, "qfi", "json"), body, "qfi", j);
        } else if (cf->parsed()) {
            MeasurementModel m;
            m.kind = parse_measurement(meas);
            m.spec = spec_of(o);
            m.channel = channel_of(o);
            const TrigLikelihood L = build_likelihood(m);
            json params{{"spec", spec_json(m.spec)}, {"measurement", to_string(m.kind)}, {"phi", phi}, {"phi_u", phi_u}, {"grid", cfi_grid}};
            if (m.channel) params["T1"] = m.channel->T1, params["T2"] = m.channel->T2;
            if (cfi_grid > 0) {
                Csv csv({"psi", "cfi"});
                for (int k = 0; k < cfi_grid; ++k) {
                    const double psi = L.period() * k / cfi_grid;
                    csv.cell(psi).cell(cfi_at(L, psi));
                }
                const std::string path = out_path(o, "cfi", "csv");
                emit(path, csv.str(), "cfi", params);
                std::cout << "wrote " << path << "\n";
            } else {
                json j = params;
                j["cfi"] = cfi_at(L, phi + phi_u);
                j["probabilities"] = L.probs(phi + phi_u);
                j["period"] = L.period();
                j["closed_form"] = has_closed_form(m);
                if (m.kind == MeasurementKind::parity && m.channel) {
                    try {
                        auto mx = max_cfi_parity_lossy(m);
                        j["I_max"] = mx.I_max;
                        j["cos_beta_at_max"] = mx.cos_beta;
                    } catch (const unsupported_branch&) {
                    }
                }
                const std::string body = j.dump(2) + "\n";
                std::cout << body;
                emit(out_path(o, "cfi", "json"), body, "cfi", params);
            }
        } else if (lm->parsed()) {
            const Encoding e = parse_encoding(o.encoding);
            if (robust) {
                const auto th = parse_list(thresholds);
                const auto rows = robustness(o.N, e, nbar_axis(o.N, nbar_step), th, lm_grid);
                Csv csv({"nbar", "threshold", "proportion"});
                for (auto& r : rows) csv.cell(r.nbar).cell(r.threshold).cell(r.proportion);
                const std::string path = out_path(o, "robustness", "csv");
                emit(path, csv.str(), "lossmap",
                     {{"N", o.N}, {"encoding", to_string(e)}, {"robustness", true}, {"thresholds", th}, {"nbar_step", nbar_step}, {"grid", lm_grid}});
                std::cout << "wrote " << path << "\n";
            } else {
                ProbeSpec s{o.N, o.nbar, e};
                validate_spec(s);
                const auto rows = lossmap(s, lm_grid);
                Csv csv({"T1", "T2", "F_opt_loss", "F_noon_loss", "F_noon_lossless", "region"});
                for (auto& r : rows) csv.cell(r.T1).cell(r.T2).cell(r.F_opt_loss).cell(r.F_noon_loss).cell(r.F_noon_lossless).cell(to_string(r.region));
                const std::string path = out_path(o, "lossmap", "csv");
                emit(path, csv.str(), "lossmap", {{"spec", spec_json(s)}, {"grid", lm_grid}});
                std::cout << "wrote " << path << "\n";
            }
        } else if (ad->parsed()) {
            AdaptiveConfig c;
            c.model.kind = parse_measurement(meas);
            c.model.spec = spec_of(o);
            c.model.channel = channel_of(o);
            c.objective = parse_objective(objective);
            c.iterations = iterations;
            c.runs = runs;
            c.phi_true = phi_true;
            c.seed = seed;
            c.control_grid = control_grid;
            c.grid_points = grid_points;
            c.threads = threads;
            c.keep_trajectories = traj;
            if (!prior.empty()) c.prior_window = std::make_pair(prior[0], prior[1]);
            const EnsembleSummary S = run_ensemble(c);

            Csv csv({"iter", "mean_phi_hat", "mean_var", "runs"});
            for (std::size_t i = 0; i < S.iters.size(); ++i) csv.cell(S.iters[i]).cell(S.mean_phi_hat[i]).cell(S.mean_var[i]).cell(S.runs);
            const std::string path = out_path(o, "adapt", "csv");
            json cfg{{"spec", spec_json(c.model.spec)},
                     {"measurement", to_string(c.model.kind)},
                     {"objective", to_string(c.objective)},
                     {"iterations", c.iterations},
                     {"runs", c.runs},
                     {"phi_true", c.phi_true},
                     {"control_grid", c.control_grid},
                     {"grid_points", c.grid_points},
                     {"prior", {S.prior_lo, S.prior_hi}}};
            if (c.model.channel) cfg["T1"] = c.model.channel->T1, cfg["T2"] = c.model.channel->T2;
            emit(path, csv.str(), "adapt", cfg, seed);
            json meta{{"config", cfg}, {"seed", seed}, {"rng", kRngAlgorithm}, {"code_version", kToolVersion},
                      {"mutual_information_search", "coarse stride G/48, then every candidate within one stride of the two best"}};
            write_text(path + ".meta.json", meta.dump(2) + "\n");
            if (traj) {
                Csv t({"run", "iter", "outcome", "phi_u", "phi_hat", "var"});
                for (std::size_t r = 0; r < S.trajectories.size(); ++r)
                    for (auto& rec : S.trajectories[r])
                        t.cell(int(r)).cell(rec.iter).cell(rec.outcome).cell(rec.phi_u).cell(rec.phi_hat).cell(rec.var);
                write_text(path + ".trajectories.csv", t.str());
            }
            std::cout << "wrote " << path << "\n";
        } else if (orc->parsed()) {
            const Encoding e = parse_encoding(o.encoding);
            json j;
            json params{{"N", o.N}, {"encoding", to_string(e)}, {"mode", mode}, {"starts", starts}, {"tol", tol}, {"breakpoint", breakpoint}};
            if (breakpoint) {
                j = {{"N", o.N}, {"breakpoint", nonlinear_breakpoint(o.N)}, {"theorem", mid_high_boundary(o.N)}};
            } else {
                params["nbar"] = o.nbar;
                OracleReport r;
                if (mode == "reduced") {
                    if (o.N > 8) throw validation_error("reduced oracle is limited to N <= 8");
                    r = brute_force_reduced({o.N, o.nbar, e}, starts, tol, seed);
                } else if (mode == "full") {
                    if (o.N > 4) throw validation_error("full oracle is limited to N <= 4");
                    r = brute_force_full({o.N, o.nbar, e}, starts, tol, seed);
                } else {
                    throw validation_error("unknown oracle mode '" + mode + "'");
                }
                j = {{"best_value", r.best_value}, {"best_distribution", r.best_distribution}, {"theorem_value", r.theorem_value},
                     {"gap", r.gap}, {"starts", r.starts}};
                if (mode == "full") j["symmetry_error"] = r.symmetry_error;
            }
            const std::string body = j.dump(2) + "\n";
            std::cout << body;
            emit(out_path(o, "oracle", "json"), body, "oracle", params, seed);
        }
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const unsupported_branch& e) {
        std::cerr << "unsupported: " << e.what() << "\n";
        return 3;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
