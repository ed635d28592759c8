// End-to-end acceptance checks. Each criterion prints one PASS or FAIL line
// plus the measured numbers it was judged on; the exit code is the number of
// failed criteria. The heavyweight six-mode check (criterion 7) defaults to a
// wall-clock probe that projects the full cost and fails honestly when the
// machine cannot finish it; --full forces the complete runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gcsdyn/config.hpp"
#include "gcsdyn/fock.hpp"
#include "gcsdyn/gcs.hpp"
#include "gcsdyn/io.hpp"
#include "gcsdyn/linalg.hpp"
#include "gcsdyn/scenario.hpp"
#include "gcsdyn/variational.hpp"
#include "support/fock_reference.hpp"

using namespace gcsdyn;
using nlohmann::json;

namespace {

struct RunStats {
    std::string label;
    double norm_drift = 0.0;
    double energy_drift = 0.0;
    double xi_drift = 0.0;
};

struct Outcome {
    bool pass = false;
    std::vector<std::string> detail;
    std::vector<RunStats> autonomous;
};

struct Options {
    std::string out_dir = "acceptance_out";
    std::string cache_path;
    double budget_seconds = 900.0;
    bool full = false;
    std::set<int> only;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

RunStats stats_from(const std::string& label, const Trajectory& traj) {
    RunStats st;
    st.label = label;
    const double n0 = traj.norms.front();
    const double e0 = traj.energies.front();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        st.norm_drift = std::max(st.norm_drift, std::abs(traj.norms[i] - n0));
        st.energy_drift = std::max(st.energy_drift,
                                   std::abs(traj.energies[i] - e0) / std::max(1.0, std::abs(e0)));
    }
    st.xi_drift = traj.xi_drift.empty() ? 0.0 : traj.xi_drift.back();
    return st;
}

double max_mode_deviation(const Trajectory& a, const Trajectory& b, int mode) {
    double dev = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        dev = std::max(dev, std::abs(a.populations[i][mode] - b.populations[i][mode]));
    return dev;
}

// compact parameter signature so cached outcomes invalidate when a preset or
// tolerance changes
std::string fingerprint(const ScenarioConfig& cfg) {
    std::ostringstream s;
    s.precision(17);
    s << cfg.model.M << '|' << cfg.model.S << '|' << cfg.model.J0 << '|' << cfg.model.J1 << '|'
      << cfg.model.omega << '|' << cfg.model.U << '|' << cfg.model.K << '|' << cfg.model.j0
      << '|';
    for (Eigen::Index i = 0; i < cfg.initial_xi.size(); ++i)
        s << cfg.initial_xi[i].real() << ',' << cfg.initial_xi[i].imag() << ';';
    for (int n : cfg.initial_occupation) s << n << ';';
    s << '|' << (cfg.grid_mode == GridMode::Random ? 'r' : 'd') << cfg.N << '|' << cfg.beta
      << '|' << cfg.seed << '|' << cfg.extent << '|' << cfg.engine.rtol << '|'
      << cfg.engine.atol << '|' << cfg.engine.reg_epsilon << '|' << cfg.t_final << '|'
      << cfg.n_samples;
    return s.str();
}

std::vector<Complex> to_std(const VectorC& v) {
    return std::vector<Complex>(v.data(), v.data() + v.size());
}

// ---------------------------------------------------------------------------

Outcome criterion_dimensions() {
    Outcome out;
    out.pass = true;
    const struct {
        int M;
        std::int64_t S;
        std::int64_t want;
    } cases[] = {{2, 50, 51}, {3, 20, 231}, {4, 30, 5456}, {6, 20, 53130}, {2, 200, 201}};
    for (const auto& c : cases) {
        const std::int64_t got = fock_dimension(c.M, c.S);
        if (got != c.want) out.pass = false;
        out.detail.push_back("M=" + std::to_string(c.M) + " S=" + std::to_string(c.S) + " -> " +
                             std::to_string(got) + " (want " + std::to_string(c.want) + ")");
    }
    return out;
}

Outcome criterion_algebra() {
    Outcome out;
    std::mt19937_64 rng(20260815);
    std::normal_distribution<double> gauss;
    double worst_overlap = 0.0, worst_transition = 0.0, worst_pop = 0.0, worst_energy = 0.0;

    for (int trial = 0; trial < 200; ++trial) {
        const int M = 2 + (int)(rng() % 2);
        const std::int64_t S = 1 + (std::int64_t)(rng() % 6);

        const std::vector<Complex> eta = fockref::random_unit(rng, M);
        const std::vector<Complex> xi = fockref::random_unit(rng, M);
        GCSParams bra{S, Eigen::Map<const VectorC>(eta.data(), M)};
        GCSParams ket{S, Eigen::Map<const VectorC>(xi.data(), M)};
        const fockref::StateMap fbra = fockref::coherent_expand(eta, (int)S);
        const fockref::StateMap fket = fockref::coherent_expand(xi, (int)S);

        const Complex ov = gcs_overlap(bra, ket);
        const Complex ov_ref = fockref::inner(fbra, fket);
        worst_overlap =
            std::max(worst_overlap, std::abs(ov - ov_ref) / std::max(1.0, std::abs(ov_ref)));

        const int j = (int)(rng() % M), k = (int)(rng() % M);
        const Complex tr = transition_element(bra, ket, j, k);
        const Complex tr_ref =
            fockref::inner(fbra, fockref::apply_adag(fockref::apply_a(fket, k), j));
        worst_transition =
            std::max(worst_transition, std::abs(tr - tr_ref) / std::max(1.0, std::abs(tr_ref)));

        // small random ensemble for the state-level quantities
        const int N = 1 + (int)(rng() % 3);
        GCSEnsemble ens;
        ens.A.resize(N);
        std::vector<std::vector<Complex>> xis;
        for (int q = 0; q < N; ++q) {
            xis.push_back(fockref::random_unit(rng, M));
            ens.basis.push_back(GCSParams{S, Eigen::Map<const VectorC>(xis.back().data(), M)});
            ens.A[q] = Complex(gauss(rng), gauss(rng));
        }
        std::vector<Complex> coeff = to_std(ens.A);
        const fockref::StateMap psi = fockref::ensemble_expand(xis, coeff, (int)S);
        const double nrm2 = fockref::norm_squared(psi);

        const VectorR pop = gcs_populations(ens);
        const std::vector<double> occ = fockref::mode_occupations(psi, M);
        for (int i = 0; i < M; ++i) {
            const double ref = occ[(std::size_t)i] / ((double)S * nrm2);
            worst_pop = std::max(worst_pop, std::abs(pop[i] - ref));
        }

        HamiltonianParams p;
        p.M = M;
        p.S = S;
        p.J0 = 0.2 + 1.3 * std::abs(gauss(rng));
        p.J1 = 0.5 * gauss(rng);
        p.omega = std::abs(gauss(rng));
        p.U = 0.5 * std::abs(gauss(rng));
        p.K = 0.3 * std::abs(gauss(rng));
        p.j0 = default_trap_center(M);
        const double t = std::abs(gauss(rng));
        const double en = energy_expectation(ens, p, t);
        const fockref::StateMap hpsi =
            fockref::apply_hamiltonian(psi, p.hopping(t), p.U, p.K, p.j0);
        const double en_ref = fockref::inner(psi, hpsi).real() / nrm2;
        worst_energy =
            std::max(worst_energy, std::abs(en - en_ref) / std::max(1.0, std::abs(en_ref)));
    }

    out.detail.push_back("worst relative error over 200 instances:");
    out.detail.push_back("overlap " + fmt(worst_overlap) + ", transition " +
                         fmt(worst_transition) + ", populations " + fmt(worst_pop) +
                         ", energy " + fmt(worst_energy) + " (tolerance 1e-10)");
    out.pass = worst_overlap <= 1e-10 && worst_transition <= 1e-10 && worst_pop <= 1e-10 &&
               worst_energy <= 1e-10;
    return out;
}

Outcome criterion_two_mode(const Options& opt) {
    Outcome out;
    ScenarioConfig wide = preset_scenario("two-mode-driven");
    wide.output_dir = opt.out_dir;
    const ScenarioResult res = run_scenario(wide);
    if (!res.oracle_ran) throw std::runtime_error("two-mode oracle unexpectedly skipped");
    const double dev25 = max_mode_deviation(res.gcs, res.oracle, 0);

    ScenarioConfig mf = preset_scenario("two-mode-driven-n1");
    mf.output_dir = opt.out_dir;
    const ScenarioResult res1 = run_scenario(mf);
    const double dev1 = max_mode_deviation(res1.gcs, res1.oracle, 0);

    out.detail.push_back("N=" + std::to_string(wide.N) + " max mode-1 deviation " + fmt(dev25) +
                         " (need <= 0.01)");
    out.detail.push_back("N=" + std::to_string(mf.N) + " max mode-1 deviation " + fmt(dev1) +
                         " (need > 0.05)");
    out.pass = dev25 <= 0.01 && dev1 > 0.05;
    return out;
}

Outcome criterion_three_mode(const Options& opt) {
    Outcome out;
    ScenarioConfig c50 = preset_scenario("three-mode-gcs");
    c50.output_dir = opt.out_dir;
    const ScenarioResult r50 = run_scenario(c50);
    ScenarioConfig c100 = preset_scenario("three-mode-gcs-n100");
    c100.output_dir = opt.out_dir;
    const ScenarioResult r100 = run_scenario(c100);
    if (!r50.oracle_ran || !r100.oracle_ran)
        throw std::runtime_error("three-mode oracle unexpectedly skipped");

    const double dev50 = max_mode_deviation(r50.gcs, r50.oracle, 0);
    const double dev100 = max_mode_deviation(r100.gcs, r100.oracle, 0);
    const double cross = max_mode_deviation(r50.gcs, r100.gcs, 0);
    out.detail.push_back("N=50 vs oracle " + fmt(dev50) + ", N=100 vs oracle " + fmt(dev100) +
                         ", N=50 vs N=100 " + fmt(cross) + " (all need <= 0.01)");
    out.pass = dev50 <= 0.01 && dev100 <= 0.01 && cross <= 0.01;
    out.autonomous.push_back(stats_from("three-mode-gcs", r50.gcs));
    out.autonomous.push_back(stats_from("three-mode-gcs-n100", r100.gcs));
    return out;
}

// counts how often a mode population comes back within 0.05 of its starting
// value after a real excursion (moving away by more than 0.2), and reports
// the best mode. Near-periodic dynamics returns repeatedly, self-trapped
// dynamics never does.
int count_returns(const Trajectory& traj) {
    int best = 0;
    for (int m = 0; m < traj.populations.front().size(); ++m) {
        const double p0 = traj.populations.front()[m];
        bool away = false;
        int returns = 0;
        for (std::size_t i = 1; i < traj.size(); ++i) {
            const double d = std::abs(traj.populations[i][m] - p0);
            if (!away && d > 0.2) away = true;
            if (away && d <= 0.05) {
                ++returns;
                away = false;
            }
        }
        best = std::max(best, returns);
    }
    return best;
}

Outcome criterion_regimes(const Options& opt) {
    Outcome out;
    ScenarioConfig rabi = preset_scenario("rabi");
    rabi.output_dir = opt.out_dir;
    const ScenarioResult rr = run_scenario(rabi);
    ScenarioConfig jos = preset_scenario("three-mode-josephson");
    jos.output_dir = opt.out_dir;
    const ScenarioResult rj = run_scenario(jos);
    if (!rr.oracle_ran || !rj.oracle_ran)
        throw std::runtime_error("regime oracle unexpectedly skipped");

    const double devR = max_population_deviation(rr.gcs, rr.oracle);
    const double devJ = max_population_deviation(rj.gcs, rj.oracle);
    const int retR = count_returns(rr.gcs);
    const int retJ = count_returns(rj.gcs);
    out.detail.push_back("weak coupling: all-mode deviation " + fmt(devR) +
                         " (need <= 0.02), returns to a mode's initial value " +
                         std::to_string(retR) + " (need >= 2)");
    out.detail.push_back("strong coupling: all-mode deviation " + fmt(devJ) +
                         " (need <= 0.02), returns to a mode's initial value " +
                         std::to_string(retJ) + " (need 0)");
    out.pass = devR <= 0.02 && devJ <= 0.02 && retR >= 2 && retJ == 0;
    out.autonomous.push_back(stats_from("rabi", rr.gcs));
    out.autonomous.push_back(stats_from("three-mode-josephson", rj.gcs));
    return out;
}

double sweep_cell_deviation(const SweepResult& res, double beta) {
    for (const SweepCell& cell : res.cells) {
        if (cell.beta != beta) continue;
        if (!cell.ok) throw std::runtime_error("sweep cell failed: " + cell.error);
        if (!cell.result.oracle_ran) throw std::runtime_error("sweep cell ran without oracle");
        return cell.result.max_oracle_deviation;
    }
    throw std::runtime_error("sweep cell not found");
}

Outcome criterion_spacing(const Options& opt) {
    Outcome out;
    SweepConfig s50 = preset_sweep("two-mode-sweep");
    s50.base.output_dir = opt.out_dir;
    s50.betas = {kSqrtPi, kSqrtPi / 4.0};
    const SweepResult r50 = run_sweep(s50);
    const double wide50 = sweep_cell_deviation(r50, kSqrtPi);
    const double fine50 = sweep_cell_deviation(r50, kSqrtPi / 4.0);

    SweepConfig s200 = preset_sweep("two-mode-sweep-s200");
    s200.base.output_dir = opt.out_dir;
    s200.betas = {kSqrtPi / 4.0, kSqrtPi / 8.0};
    const SweepResult r200 = run_sweep(s200);
    const double wide200 = sweep_cell_deviation(r200, kSqrtPi / 4.0);
    const double fine200 = sweep_cell_deviation(r200, kSqrtPi / 8.0);

    out.detail.push_back("S=50, N=25 diagonal: spacing sqrt_pi/4 deviates " + fmt(fine50) +
                         " (need <= 0.01), sqrt_pi deviates " + fmt(wide50) +
                         " (need > the fine run)");
    out.detail.push_back("S=200, N=81 diagonal: spacing sqrt_pi/8 deviates " + fmt(fine200) +
                         " (need <= 0.01), sqrt_pi/4 deviates " + fmt(wide200) +
                         " (need > the fine run)");
    out.pass = fine50 <= 0.01 && wide50 > fine50 && fine200 <= 0.01 && wide200 > fine200;
    return out;
}

struct ProbeReport {
    double t_reached = 0.0;
    std::int64_t evals = 0;
    double seconds = 0.0;
    bool finished = false;
    Trajectory traj;
};

ProbeReport probe_run(const ScenarioConfig& cfg, double budget_seconds) {
    ProbeReport rep;
    GCSEnsemble ens;
    ens.basis = sample_ensemble(cfg.grid_spec());
    ens.A = VectorC::Zero((Eigen::Index)ens.basis.size());
    ens.A[0] = 1.0;
    const std::vector<double> t_grid = sample_times(cfg.t_final, cfg.n_samples);

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&start] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    EngineHooks hooks;
    double budget = budget_seconds;
    hooks.keep_going = [&](double t, std::int64_t evals) {
        rep.t_reached = std::max(rep.t_reached, t);
        rep.evals = evals;
        return budget <= 0.0 || elapsed() < budget;
    };
    try {
        rep.traj = propagate_gcs(ens, cfg.model, t_grid, cfg.engine, hooks);
        rep.finished = true;
        rep.t_reached = cfg.t_final;
    } catch (const EngineFailure& e) {
        if (std::string(e.what()).find("aborted by caller hook") == std::string::npos) throw;
    }
    rep.seconds = elapsed();
    return rep;
}

Outcome criterion_six_mode(const Options& opt) {
    Outcome out;
    ScenarioConfig dense = preset_scenario("six-mode");
    dense.output_dir = opt.out_dir;
    ScenarioConfig standard = preset_scenario("six-mode-vn");
    standard.output_dir = opt.out_dir;

    const std::int64_t params_count = (dense.model.M + 1) * dense.N;
    const std::int64_t dim = fock_dimension(dense.model.M, dense.model.S);
    const bool compressed = 10 * params_count < dim;
    out.detail.push_back("parameter count " + std::to_string(params_count) + " vs Fock dimension " +
                         std::to_string(dim) + (compressed ? " (>10x compression)" : ""));
    if (!compressed) {
        out.pass = false;
        return out;
    }

    if (!opt.full) {
        // probe both configurations, then project the full cost honestly
        bool affordable = true;
        double projected_total = 0.0;
        for (const ScenarioConfig* cfg : {&dense, &standard}) {
            const ProbeReport rep = probe_run(*cfg, opt.budget_seconds / 2.0);
            const double per_eval = rep.evals > 0 ? rep.seconds / (double)rep.evals : 0.0;
            std::string line = "N=" + std::to_string(cfg->N) + ": " +
                               std::to_string(rep.evals) + " derivative evaluations (" +
                               fmt(per_eval) + " s each) reached t=" + fmt(rep.t_reached) +
                               " of " + fmt(cfg->t_final) + " in " + fmt(rep.seconds) + " s";
            if (rep.finished) {
                line += " (finished)";
            } else if (rep.t_reached > 0.0 && rep.evals > 0) {
                const double projected =
                    (double)rep.evals / rep.t_reached * cfg->t_final * per_eval;
                projected_total += projected;
                line += ", projected full run " + fmt(projected / 3600.0) + " h";
                affordable = false;
            } else {
                line += ", no measurable progress";
                affordable = false;
            }
            out.detail.push_back(line);
        }
        if (!affordable) {
            out.detail.push_back("projected " + fmt(projected_total / 3600.0) +
                                 " h total exceeds the " + fmt(opt.budget_seconds) +
                                 " s budget on this machine; rerun with --full (or use the "
                                 "six-mode presets) to evaluate the physics claim");
            out.pass = false;
            return out;
        }
    }

    const ScenarioResult dense_res = run_scenario(dense);
    const ScenarioResult standard_res = run_scenario(standard);
    const double dev = max_mode_deviation(dense_res.gcs, standard_res.gcs, 0);
    const RunStats sd = stats_from("six-mode", dense_res.gcs);
    const RunStats ss = stats_from("six-mode-vn", standard_res.gcs);
    out.detail.push_back("mode-1 deviation between the two grids " + fmt(dev) +
                         " (need <= 0.02)");
    out.detail.push_back("drifts: norm " + fmt(std::max(sd.norm_drift, ss.norm_drift)) +
                         ", energy " + fmt(std::max(sd.energy_drift, ss.energy_drift)) +
                         " (need <= 1e-5)");
    out.pass = dev <= 0.02 && sd.norm_drift <= 1e-5 && ss.norm_drift <= 1e-5 &&
               sd.energy_drift <= 1e-5 && ss.energy_drift <= 1e-5;
    return out;
}

Outcome criterion_conservation(const std::vector<RunStats>& runs) {
    Outcome out;
    if (runs.empty()) {
        out.detail.push_back("no autonomous runs were executed by the earlier criteria");
        out.pass = false;
        return out;
    }
    out.pass = true;
    for (const RunStats& st : runs) {
        const bool ok =
            st.norm_drift <= 1e-6 && st.energy_drift <= 1e-6 && st.xi_drift <= 1e-6;
        if (!ok) out.pass = false;
        out.detail.push_back(st.label + ": norm drift " + fmt(st.norm_drift) +
                             ", relative energy drift " + fmt(st.energy_drift) +
                             ", state normalization drift " + fmt(st.xi_drift) +
                             (ok ? "" : " (exceeds 1e-6)"));
    }
    return out;
}

Outcome criterion_tangent_structure() {
    Outcome out;
    std::mt19937_64 rng(424242);
    std::normal_distribution<double> gauss;
    double worst_herm = 0.0, worst_psd = 0.0;

    for (int trial = 0; trial < 100; ++trial) {
        const int M = 2 + (int)(rng() % 3);
        const std::int64_t S = 1 + (std::int64_t)(rng() % 30);
        const int N = 1 + (int)(rng() % 6);
        GCSEnsemble ens;
        ens.A.resize(N);
        for (int q = 0; q < N; ++q) {
            const std::vector<Complex> xi = fockref::random_unit(rng, M);
            ens.basis.push_back(GCSParams{S, Eigen::Map<const VectorC>(xi.data(), M)});
            ens.A[q] = Complex(gauss(rng), gauss(rng));
        }
        HamiltonianParams p;
        p.M = M;
        p.S = S;
        p.J0 = 0.2 + std::abs(gauss(rng));
        p.J1 = 0.5 * gauss(rng);
        p.omega = std::abs(gauss(rng));
        p.U = 0.5 * std::abs(gauss(rng));
        p.K = 0.3 * std::abs(gauss(rng));
        p.j0 = default_trap_center(M);

        const TangentSystem sys = assemble_blocks(ens, p, std::abs(gauss(rng)));
        const double scale = sys.lhs.cwiseAbs().maxCoeff();
        worst_herm = std::max(
            worst_herm, (sys.lhs - sys.lhs.adjoint()).cwiseAbs().maxCoeff() / scale);
        const HermitianEig eig = hermitian_eig(sys.lhs.topLeftCorner(N, N));
        worst_psd = std::min(worst_psd, eig.values.minCoeff());
    }
    out.detail.push_back("100 random ensembles: worst Hermiticity defect " + fmt(worst_herm) +
                         " (need <= 1e-10), smallest overlap-block eigenvalue " +
                         fmt(worst_psd) + " (need >= -1e-10)");

    // residual check along an integrated trajectory: parameter velocities from
    // central differences of a tightly propagated run must satisfy the
    // implicit tangent equations at the middle sample
    const int M = 3, N = 3;
    const std::int64_t S = 4;
    std::mt19937_64 rng2(2024);
    GCSEnsemble ens;
    ens.A.resize(N);
    std::normal_distribution<double> g2;
    for (int q = 0; q < N; ++q) {
        const std::vector<Complex> xi = fockref::random_unit(rng2, M);
        ens.basis.push_back(GCSParams{S, Eigen::Map<const VectorC>(xi.data(), M)});
        ens.A[q] = Complex(g2(rng2), g2(rng2));
    }
    ens.A /= std::sqrt((double)N);
    HamiltonianParams p;
    p.M = M;
    p.S = S;
    p.J0 = 0.9;
    p.J1 = 0.4;
    p.omega = 1.3;
    p.U = 0.35;
    p.K = 0.15;
    p.j0 = 2.0;

    const double t0 = 0.35, delta = 5e-4;
    EngineConfig tight;
    tight.rtol = 1e-12;
    tight.atol = 1e-14;
    const std::vector<double> t_grid = {0.0, t0 - delta, t0, t0 + delta, 0.5};
    const Trajectory traj = propagate_gcs(ens, p, t_grid, tight);

    auto pack = [&](const EnsembleSnapshot& snap) {
        VectorC u(N * (M + 1));
        u.head(N) = snap.A;
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < N; ++k) u[N + m * N + k] = snap.xi(m, k);
        return u;
    };
    const VectorC udot =
        (pack(traj.snapshots[3]) - pack(traj.snapshots[1])) / (2.0 * delta);
    const EnsembleSnapshot& mid = traj.snapshots[2];
    GCSEnsemble at_mid;
    at_mid.A = mid.A;
    for (int k = 0; k < N; ++k)
        at_mid.basis.push_back(GCSParams{S, mid.xi.col(k)});
    const TangentSystem sys = assemble_blocks(at_mid, p, t0);
    const double residual = (sys.lhs * udot - sys.rhs).norm() / sys.rhs.norm();
    out.detail.push_back("tangent-equation residual of the finite-difference velocity " +
                         fmt(residual) + " (need <= 1e-6)");

    out.pass = worst_herm <= 1e-10 && worst_psd >= -1e-10 && residual <= 1e-6;
    return out;
}

// ---------------------------------------------------------------------------

json stats_to_json(const std::vector<RunStats>& runs) {
    json arr = json::array();
    for (const RunStats& st : runs)
        arr.push_back({{"label", st.label},
                       {"norm", st.norm_drift},
                       {"energy", st.energy_drift},
                       {"xi", st.xi_drift}});
    return arr;
}

std::vector<RunStats> stats_from_json(const json& arr) {
    std::vector<RunStats> runs;
    for (const json& j : arr) {
        RunStats st;
        st.label = j.at("label").get<std::string>();
        st.norm_drift = j.at("norm").get<double>();
        st.energy_drift = j.at("energy").get<double>();
        st.xi_drift = j.at("xi").get<double>();
        runs.push_back(std::move(st));
    }
    return runs;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks for the coherent-state propagation library"};
    Options opt;
    std::string only_str;
    app.add_option("--only", only_str, "comma-separated criterion numbers to run");
    app.add_option("--budget", opt.budget_seconds,
                   "wall-clock probe budget in seconds for the six-mode check");
    app.add_flag("--full", opt.full, "run the six-mode scenarios to completion whatever the cost");
    app.add_option("--out", opt.out_dir, "directory for emitted run files");
    app.add_option("--cache", opt.cache_path,
                   "JSON file caching outcomes of expensive criteria across invocations");
    CLI11_PARSE(app, argc, argv);

    if (!only_str.empty()) {
        std::istringstream in(only_str);
        std::string tok;
        while (std::getline(in, tok, ','))
            if (!tok.empty()) opt.only.insert(std::stoi(tok));
    }
    std::filesystem::create_directories(opt.out_dir);

    json cache = json::object();
    if (!opt.cache_path.empty()) {
        std::ifstream in(opt.cache_path);
        if (in) {
            try {
                in >> cache;
            } catch (const std::exception&) {
                cache = json::object();
            }
        }
    }

    // fingerprints of everything a cached criterion depends on
    auto joined_fp = [](std::initializer_list<std::string> parts) {
        std::string s = "v1";
        for (const std::string& p : parts) s += "#" + p;
        return s;
    };
    const std::map<int, std::string> fps = {
        {3, joined_fp({fingerprint(preset_scenario("two-mode-driven")),
                       fingerprint(preset_scenario("two-mode-driven-n1"))})},
        {4, joined_fp({fingerprint(preset_scenario("three-mode-gcs")),
                       fingerprint(preset_scenario("three-mode-gcs-n100"))})},
        {5, joined_fp({fingerprint(preset_scenario("rabi")),
                       fingerprint(preset_scenario("three-mode-josephson"))})},
        {6, joined_fp({fingerprint(preset_sweep("two-mode-sweep").base),
                       fingerprint(preset_sweep("two-mode-sweep-s200").base)})},
        {7, joined_fp({fingerprint(preset_scenario("six-mode")),
                       fingerprint(preset_scenario("six-mode-vn")), opt.full ? "full" : "probe",
                       fmt(opt.budget_seconds)})},
    };

    struct Item {
        int id;
        const char* title;
        std::function<Outcome()> run;
    };
    std::vector<RunStats> autonomous_runs;
    const std::vector<Item> items = {
        {1, "Fock space dimensions match the closed form", [] { return criterion_dimensions(); }},
        {2, "coherent-state algebra agrees with brute-force ladder operators",
         [] { return criterion_algebra(); }},
        {3, "driven two-mode run tracks the oracle and the mean field does not",
         [&] { return criterion_two_mode(opt); }},
        {4, "three-mode runs converge in basis size onto the oracle",
         [&] { return criterion_three_mode(opt); }},
        {5, "weak and strong coupling regimes reproduce and separate",
         [&] { return criterion_regimes(opt); }},
        {6, "finer grid spacing converges where the coarse spacing fails",
         [&] { return criterion_spacing(opt); }},
        {7, "six-mode grids agree with each other at a >10x parameter compression",
         [&] { return criterion_six_mode(opt); }},
        {8, "autonomous runs conserve norm, energy and state normalization",
         [&] { return criterion_conservation(autonomous_runs); }},
        {9, "tangent systems are Hermitian, positive where required and self-consistent",
         [] { return criterion_tangent_structure(); }},
    };

    int failures = 0;
    std::set<int> evaluated;
    for (const Item& item : items) {
        if (!opt.only.empty() && !opt.only.count(item.id)) continue;

        // recover drift records of criterion 4 and 5 runs that were skipped
        // this invocation from the cache, so the conservation check still
        // covers them
        if (item.id == 8) {
            for (int dep : {4, 5}) {
                const std::string dkey = std::to_string(dep);
                if (!evaluated.count(dep) && cache.contains(dkey) &&
                    cache[dkey].value("fingerprint", "") == fps.at(dep)) {
                    const std::vector<RunStats> runs =
                        stats_from_json(cache[dkey].value("stats", json::array()));
                    autonomous_runs.insert(autonomous_runs.end(), runs.begin(), runs.end());
                }
            }
        }

        Outcome out;
        evaluated.insert(item.id);
        bool from_cache = false;
        const std::string key = std::to_string(item.id);
        if (fps.count(item.id) && cache.contains(key) &&
            cache[key].value("fingerprint", "") == fps.at(item.id)) {
            out.pass = cache[key].at("pass").get<bool>();
            for (const json& d : cache[key].at("detail")) out.detail.push_back(d);
            out.autonomous = stats_from_json(cache[key].value("stats", json::array()));
            from_cache = true;
        } else {
            try {
                out = item.run();
            } catch (const std::exception& e) {
                out.pass = false;
                out.detail.push_back(std::string("aborted: ") + e.what());
            }
        }

        autonomous_runs.insert(autonomous_runs.end(), out.autonomous.begin(),
                               out.autonomous.end());
        if (!out.pass) ++failures;
        std::printf("%s  criterion %d: %s%s\n", out.pass ? "PASS" : "FAIL", item.id, item.title,
                    from_cache ? " (cached)" : "");
        for (const std::string& line : out.detail) std::printf("        %s\n", line.c_str());
        std::fflush(stdout);

        if (fps.count(item.id) && !from_cache && !opt.cache_path.empty()) {
            cache[key] = {{"fingerprint", fps.at(item.id)},
                          {"pass", out.pass},
                          {"detail", out.detail},
                          {"stats", stats_to_json(out.autonomous)}};
            std::ofstream fh(opt.cache_path);
            fh << cache.dump(2) << "\n";
        }
    }

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
