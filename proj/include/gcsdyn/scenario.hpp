#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gcsdyn/fock.hpp"
#include "gcsdyn/gcs.hpp"
#include "gcsdyn/grid.hpp"
#include "gcsdyn/io.hpp"
#include "gcsdyn/trajectory.hpp"
#include "gcsdyn/types.hpp"
#include "gcsdyn/variational.hpp"

namespace gcsdyn {

// Reference propagations above this Fock dimension only run when forced.
inline constexpr std::int64_t kAutoOracleCap = 10000;

enum class OracleMode { Auto, On, Off };

// A complete run description: model, initial state, basis grid, solver
// settings and output window. The initial state is either a single coherent
// state (which doubles as the grid center and gets coefficients (1,0,...,0))
// or a number state that is least-squares projected onto the sampled basis.
struct ScenarioConfig {
    std::string name = "scenario";
    HamiltonianParams model;

    VectorC initial_xi;                  // coherent-state initial condition
    std::vector<int> initial_occupation; // number-state initial condition
    VectorC center;                      // optional grid center override

    GridMode grid_mode = GridMode::Random;
    std::int64_t N = 1;
    double beta = kSqrtPi;
    std::uint64_t seed = 12345;
    int extent = 0;

    EngineConfig engine;
    double t_final = 0.0;
    std::int64_t n_samples = 201;
    OracleMode oracle = OracleMode::Auto;
    std::string output_dir = "out";

    bool fock_initial() const { return !initial_occupation.empty(); }

    // U S / J0, the standard interaction measure; shown, never an input
    double lambda() const { return model.J0 != 0.0 ? model.U * model.S / model.J0 : 0.0; }

    // Mode directions are rays, so mild decimal rounding in config files is
    // forgiven and snapped back to unit length; gross deviations are errors.
    static VectorC unit_direction(const VectorC& v) { return v / v.norm(); }

    VectorC effective_center() const {
        if (center.size() > 0) return unit_direction(center);
        if (fock_initial()) {
            VectorC c(initial_occupation.size());
            for (std::size_t i = 0; i < initial_occupation.size(); ++i)
                c[i] = std::sqrt((double)initial_occupation[i] / (double)model.S);
            return unit_direction(c);
        }
        return unit_direction(initial_xi);
    }

    GridSpec grid_spec() const {
        GridSpec g;
        g.M = model.M;
        g.S = model.S;
        g.beta = beta;
        g.center = GCSParams{model.S, effective_center()};
        g.mode = grid_mode;
        g.N = N;
        g.seed = seed;
        g.extent = extent;
        return g;
    }

    void validate(std::vector<std::string>* warnings = nullptr) const {
        std::vector<std::string> issues;
        auto merge = [&issues](const std::function<void()>& check) {
            try {
                check();
            } catch (const ValidationError& e) {
                issues.insert(issues.end(), e.issues().begin(), e.issues().end());
            } catch (const std::exception& e) {
                issues.push_back(e.what());
            }
        };
        merge([&] { model.validate(); });
        merge([&] { engine.validate(); });

        const bool has_gcs = initial_xi.size() > 0;
        const bool has_fock = fock_initial();
        if (!has_gcs && !has_fock) issues.push_back("an initial state is required");
        if (has_gcs && has_fock)
            issues.push_back("give one initial state, not both mode amplitudes and occupations");
        if (has_gcs) {
            if ((int)initial_xi.size() != model.M)
                issues.push_back("initial state needs one amplitude per mode");
            else if (!initial_xi.allFinite())
                issues.push_back("initial state has non-finite amplitudes");
            else if (std::abs(initial_xi.squaredNorm() - 1.0) > 1e-3)
                issues.push_back("initial state amplitudes must have unit norm");
        }
        if (has_fock) {
            if ((int)initial_occupation.size() != model.M) {
                issues.push_back("initial occupations need one entry per mode");
            } else {
                std::int64_t sum = 0;
                bool negative = false;
                for (int n : initial_occupation) {
                    if (n < 0) negative = true;
                    sum += n;
                }
                if (negative)
                    issues.push_back("initial occupations must be >= 0");
                else if (sum != model.S)
                    issues.push_back("initial occupations sum to " + std::to_string(sum) +
                                     " but S = " + std::to_string(model.S));
            }
        }
        if (center.size() > 0) {
            if ((int)center.size() != model.M)
                issues.push_back("center needs one amplitude per mode");
            else if (!center.allFinite() || std::abs(center.squaredNorm() - 1.0) > 1e-3)
                issues.push_back("center amplitudes must have unit norm");
        }
        if (!(t_final > 0.0)) issues.push_back("t_final must be > 0");
        if (n_samples < 2) issues.push_back("n_samples must be >= 2");
        if (name.empty() || name.find('/') != std::string::npos)
            issues.push_back("name must be nonempty and contain no '/'");
        if (output_dir.empty()) issues.push_back("output_dir must not be empty");

        // grid construction only makes sense once the pieces above fit
        if (issues.empty()) merge([&] { grid_spec().validate(warnings); });
        if (!issues.empty()) throw ValidationError(issues);
    }
};

// Cross product of basis sizes and grid spacings around a shared base run.
struct SweepConfig {
    ScenarioConfig base;
    std::vector<std::int64_t> Ns;
    std::vector<double> betas;
    int workers = 1;

    void validate() const {
        std::vector<std::string> issues;
        try {
            base.validate();
        } catch (const ValidationError& e) {
            issues.insert(issues.end(), e.issues().begin(), e.issues().end());
        }
        if (Ns.empty()) issues.push_back("sweep_N must not be empty");
        if (betas.empty()) issues.push_back("sweep_beta must not be empty");
        for (std::int64_t n : Ns)
            if (n < 1) issues.push_back("sweep_N entries must be >= 1");
        for (double b : betas)
            if (!(b > 0.0)) issues.push_back("sweep_beta entries must be > 0");
        if (workers < 1) issues.push_back("workers must be >= 1");
        if (!issues.empty()) throw ValidationError(issues);
    }
};

inline std::vector<double> sample_times(double t_final, std::int64_t n_samples) {
    if (!(t_final > 0.0) || n_samples < 2)
        throw std::invalid_argument("sample_times: need t_final > 0 and n_samples >= 2");
    std::vector<double> t((std::size_t)n_samples);
    for (std::int64_t i = 0; i < n_samples; ++i)
        t[(std::size_t)i] = t_final * (double)i / (double)(n_samples - 1);
    return t;
}

struct ScenarioResult {
    ScenarioConfig config;
    std::vector<std::string> warnings;

    Trajectory gcs;
    Trajectory oracle;
    bool oracle_ran = false;
    std::string oracle_note;           // reason when the oracle was skipped
    double max_oracle_deviation = 0.0; // meaningful only when oracle_ran
    double projection_residual = 0.0;  // number-state initial conditions only
    double lambda = 0.0;
    double wall_seconds = 0.0;

    // emitted files, empty when not written
    std::string trajectory_csv;
    std::string oracle_csv;
    std::string comparison_csv;
    std::string ensemble_csv;
    std::string bloch_csv;
    std::string snapshot_file;
};

inline ScenarioResult run_scenario(const ScenarioConfig& cfg, bool write_files = true) {
    ScenarioResult res;
    res.config = cfg;
    cfg.validate(&res.warnings);
    const auto clock_start = std::chrono::steady_clock::now();
    res.lambda = cfg.lambda();

    GCSEnsemble ens;
    ens.basis = sample_ensemble(cfg.grid_spec(), &res.warnings);
    const std::int64_t N = (std::int64_t)ens.basis.size();

    if (cfg.fock_initial()) {
        const FockBasis fb = FockBasis::enumerate(cfg.model.M, cfg.model.S);
        VectorC target = VectorC::Zero(fb.size());
        target[fb.index_of(cfg.initial_occupation)] = 1.0;
        const ProjectionResult proj =
            project_state(target, ens.basis, fb, cfg.engine.reg_epsilon);
        ens.A = proj.A;
        res.projection_residual = proj.residual;
        if (proj.poor_fit)
            res.warnings.push_back("projection residual " + format_double(proj.residual) +
                                   "; the grid covers the initial state poorly");
    } else {
        // the grid starts with the center point, which is the initial state
        ens.A = VectorC::Zero(N);
        ens.A[0] = 1.0;
    }

    const std::vector<double> t_grid = sample_times(cfg.t_final, cfg.n_samples);
    res.gcs = propagate_gcs(ens, cfg.model, t_grid, cfg.engine);

    const std::int64_t dim = fock_dimension(cfg.model.M, cfg.model.S);
    bool want_oracle = false;
    switch (cfg.oracle) {
    case OracleMode::Off:
        res.oracle_note = "oracle disabled";
        break;
    case OracleMode::Auto:
        if (dim <= kAutoOracleCap)
            want_oracle = true;
        else
            res.oracle_note = "oracle skipped: Fock dimension " + std::to_string(dim) +
                              " exceeds the automatic cap of " + std::to_string(kAutoOracleCap) +
                              " (force with oracle = on)";
        break;
    case OracleMode::On:
        if (dim <= kMaxFockDimension)
            want_oracle = true;
        else
            res.oracle_note = "oracle skipped: Fock dimension " + std::to_string(dim) +
                              " exceeds the hard cap of " + std::to_string(kMaxFockDimension);
        break;
    }
    if (want_oracle) {
        const FockBasis fb = FockBasis::enumerate(cfg.model.M, cfg.model.S);
        VectorC psi0;
        if (cfg.fock_initial()) {
            psi0 = VectorC::Zero(fb.size());
            psi0[fb.index_of(cfg.initial_occupation)] = 1.0;
        } else {
            psi0 = gcs_to_fock(GCSParams{cfg.model.S,
                                         ScenarioConfig::unit_direction(cfg.initial_xi)},
                               fb);
            psi0 /= psi0.norm();
        }
        FockPropagationOptions fopt;
        fopt.keep_amplitudes = false;
        res.oracle = propagate_fock(psi0, cfg.model, t_grid, fopt);
        res.oracle_ran = true;
        res.max_oracle_deviation = max_population_deviation(res.gcs, res.oracle);
    }

    if (write_files) {
        std::filesystem::create_directories(cfg.output_dir);
        const std::string base = cfg.output_dir + "/" + cfg.name;
        res.trajectory_csv = base + "_trajectory.csv";
        write_trajectory_csv(res.trajectory_csv, res.gcs);
        res.ensemble_csv = base + "_ensemble.csv";
        write_ensemble_csv(res.ensemble_csv, ens.basis);
        if (cfg.model.M == 2) {
            res.bloch_csv = base + "_bloch.csv";
            write_bloch_csv(res.bloch_csv, ens.basis);
        }
        res.snapshot_file = base + "_final.snap";
        write_snapshot(res.snapshot_file, res.gcs.snapshots.back(), cfg.model.S);
        if (res.oracle_ran) {
            res.oracle_csv = base + "_oracle.csv";
            write_trajectory_csv(res.oracle_csv, res.oracle);
            res.comparison_csv = base + "_compare.csv";
            write_comparison_csv(res.comparison_csv, res.gcs, res.oracle);
        }
    }

    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return res;
}

struct SweepCell {
    std::int64_t N = 0;
    double beta = 0.0;
    std::string name;
    bool ok = false;
    std::string error;
    ScenarioResult result;
    double dev_vs_ref = std::numeric_limits<double>::quiet_NaN();
    bool nonmonotone = false;
};

struct SweepResult {
    std::vector<SweepCell> cells; // outer loop over N, inner over beta
    std::ptrdiff_t reference = -1;
    std::string summary_csv;
    double wall_seconds = 0.0;
};

// Runs every (N, beta) combination off the shared base configuration; cell
// failures are recorded and the sweep continues. Deviations are measured
// against the largest successful N, smallest beta on ties.
inline SweepResult run_sweep(const SweepConfig& sw, bool write_files = true) {
    sw.validate();
    const auto clock_start = std::chrono::steady_clock::now();

    SweepResult out;
    for (std::size_t a = 0; a < sw.Ns.size(); ++a) {
        for (std::size_t b = 0; b < sw.betas.size(); ++b) {
            SweepCell cell;
            cell.N = sw.Ns[a];
            cell.beta = sw.betas[b];
            cell.name =
                sw.base.name + "_N" + std::to_string(cell.N) + "_b" + std::to_string(b);
            out.cells.push_back(std::move(cell));
        }
    }

    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= out.cells.size()) return;
            SweepCell& cell = out.cells[i];
            ScenarioConfig cfg = sw.base;
            cfg.N = cell.N;
            cfg.beta = cell.beta;
            cfg.name = cell.name;
            try {
                cell.result = run_scenario(cfg, write_files);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    const int extra = std::min<int>(sw.workers, (int)out.cells.size()) - 1;
    std::vector<std::thread> pool;
    pool.reserve((std::size_t)std::max(extra, 0));
    for (int i = 0; i < extra; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (std::size_t i = 0; i < out.cells.size(); ++i) {
        const SweepCell& c = out.cells[i];
        if (!c.ok) continue;
        if (out.reference < 0) {
            out.reference = (std::ptrdiff_t)i;
            continue;
        }
        const SweepCell& r = out.cells[(std::size_t)out.reference];
        if (c.N > r.N || (c.N == r.N && c.beta < r.beta)) out.reference = (std::ptrdiff_t)i;
    }
    if (out.reference >= 0) {
        const Trajectory& ref = out.cells[(std::size_t)out.reference].result.gcs;
        for (SweepCell& c : out.cells)
            if (c.ok) c.dev_vs_ref = max_population_deviation(c.result.gcs, ref);
    }

    // soft convergence check per spacing: going to the largest basis should
    // not increase the deviation from the reference
    for (double beta : sw.betas) {
        const SweepCell* lo = nullptr;
        const SweepCell* hi = nullptr;
        for (const SweepCell& c : out.cells) {
            if (!c.ok || c.beta != beta) continue;
            if (!lo || c.N < lo->N) lo = &c;
            if (!hi || c.N > hi->N) hi = &c;
        }
        if (lo && hi && lo->N != hi->N && hi->dev_vs_ref > lo->dev_vs_ref + 1e-12)
            for (SweepCell& c : out.cells)
                if (c.ok && c.beta == beta) c.nonmonotone = true;
    }

    if (write_files) {
        std::filesystem::create_directories(sw.base.output_dir);
        out.summary_csv = sw.base.output_dir + "/" + sw.base.name + "_summary.csv";
        auto fh = detail::open_for_write(out.summary_csv);
        fh << "N,beta,status,max_dev_vs_largest_N,max_oracle_dev,wall_s,nonmonotone_flag\n";
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const SweepCell& c : out.cells) {
            const bool dev_known = c.ok && out.reference >= 0;
            const bool oracle_known = c.ok && c.result.oracle_ran;
            fh << c.N << ',' << format_double(c.beta) << ',' << (c.ok ? "ok" : "failed")
               << ',' << format_double(dev_known ? c.dev_vs_ref : nan) << ','
               << format_double(oracle_known ? c.result.max_oracle_deviation : nan) << ','
               << format_double(c.ok ? c.result.wall_seconds : nan) << ','
               << (c.nonmonotone ? 1 : 0) << "\n";
        }
        if (!fh) throw std::runtime_error("run_sweep: write to " + out.summary_csv + " failed");
    }

    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return out;
}

} // namespace gcsdyn
