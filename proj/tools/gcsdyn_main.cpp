#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcsdyn/config.hpp"
#include "gcsdyn/io.hpp"
#include "gcsdyn/scenario.hpp"
#include "gcsdyn/types.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitPropagation = 2;
constexpr int kExitTolerance = 3;

gcsdyn::OracleMode parse_oracle_flag(const std::string& s) {
    if (s == "auto") return gcsdyn::OracleMode::Auto;
    if (s == "on") return gcsdyn::OracleMode::On;
    return gcsdyn::OracleMode::Off;
}

double norm_drift(const gcsdyn::Trajectory& traj) {
    double d = 0.0;
    for (double n : traj.norms) d = std::max(d, std::abs(n - traj.norms.front()));
    return d;
}

double energy_drift(const gcsdyn::Trajectory& traj) {
    const double e0 = traj.energies.front();
    double d = 0.0;
    for (double e : traj.energies)
        d = std::max(d, std::abs(e - e0) / std::max(1.0, std::abs(e0)));
    return d;
}

void report_scenario(const gcsdyn::ScenarioResult& res) {
    const gcsdyn::ScenarioConfig& cfg = res.config;
    std::printf("%s: M=%d S=%lld N=%lld beta=%.6g grid=%s seed=%llu\n", cfg.name.c_str(),
                cfg.model.M, (long long)cfg.model.S, (long long)cfg.N, cfg.beta,
                cfg.grid_mode == gcsdyn::GridMode::Random ? "random" : "diagonal",
                (unsigned long long)cfg.seed);
    if (cfg.model.J0 != 0.0) std::printf("  U S / J0 = %.6g\n", res.lambda);
    for (const std::string& w : res.warnings) std::printf("  warning: %s\n", w.c_str());
    if (cfg.fock_initial())
        std::printf("  projection residual %.3g\n", res.projection_residual);
    const bool autonomous = cfg.model.J1 == 0.0 || cfg.model.omega == 0.0;
    std::printf("  norm drift %.3g, max xi drift %.3g\n", norm_drift(res.gcs),
                res.gcs.xi_drift.empty() ? 0.0 : res.gcs.xi_drift.back());
    if (autonomous)
        std::printf("  relative energy drift %.3g\n", energy_drift(res.gcs));
    if (res.oracle_ran)
        std::printf("  max population deviation from the oracle: %.6g\n",
                    res.max_oracle_deviation);
    else if (!res.oracle_note.empty())
        std::printf("  %s\n", res.oracle_note.c_str());
    for (const std::string* path :
         {&res.trajectory_csv, &res.oracle_csv, &res.comparison_csv, &res.ensemble_csv,
          &res.bloch_csv, &res.snapshot_file})
        if (!path->empty()) std::printf("  wrote %s\n", path->c_str());
    std::printf("  wall %.2f s\n", res.wall_seconds);
}

struct CommandOpts {
    std::string config_path;
    std::string preset;
    std::string oracle = "auto";
    std::string out_dir;
    std::int64_t seed = 0;
    int workers = 1;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* oracle_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

void add_common_options(CLI::App* cmd, CommandOpts& opt) {
    CLI::Option* config = cmd->add_option("--config", opt.config_path, "scenario config file");
    CLI::Option* preset = cmd->add_option("--preset", opt.preset, "bundled preset name");
    config->excludes(preset);
    preset->excludes(config);
    opt.seed_opt = cmd->add_option("--seed", opt.seed, "grid RNG seed override")
                       ->check(CLI::NonNegativeNumber);
    opt.oracle_opt = cmd->add_option("--oracle", opt.oracle, "reference propagation policy")
                         ->check(CLI::IsMember({"auto", "on", "off"}));
    opt.out_opt = cmd->add_option("--out", opt.out_dir, "output directory override");
}

void apply_overrides(gcsdyn::ScenarioConfig& cfg, const CommandOpts& opt) {
    if (opt.seed_opt->count()) cfg.seed = (std::uint64_t)opt.seed;
    if (opt.oracle_opt->count()) cfg.oracle = parse_oracle_flag(opt.oracle);
    if (opt.out_opt->count()) cfg.output_dir = opt.out_dir;
}

int require_source(const CommandOpts& opt) {
    if (opt.config_path.empty() && opt.preset.empty()) {
        std::fprintf(stderr, "one of --config or --preset is required\n");
        return kExitValidation;
    }
    return kExitOk;
}

int cmd_run(const CommandOpts& opt) {
    gcsdyn::ScenarioConfig cfg = opt.preset.empty()
                                     ? gcsdyn::load_config_file(opt.config_path).scenario
                                     : gcsdyn::preset_scenario(opt.preset);
    apply_overrides(cfg, opt);
    report_scenario(gcsdyn::run_scenario(cfg));
    return kExitOk;
}

int cmd_sweep(const CommandOpts& opt) {
    gcsdyn::SweepConfig sw;
    if (!opt.preset.empty()) {
        sw = gcsdyn::preset_sweep(opt.preset);
    } else {
        const gcsdyn::ParsedConfig parsed = gcsdyn::load_config_file(opt.config_path);
        sw.base = parsed.scenario;
        sw.Ns = parsed.sweep_N;
        sw.betas = parsed.sweep_beta;
        if (sw.Ns.empty() || sw.betas.empty())
            throw gcsdyn::ValidationError("sweep needs sweep_N and sweep_beta in the config");
    }
    apply_overrides(sw.base, opt);
    sw.workers = opt.workers;

    const gcsdyn::SweepResult res = gcsdyn::run_sweep(sw);
    std::printf("%s: %zu cells\n", sw.base.name.c_str(), res.cells.size());
    bool any_failed = false;
    for (const gcsdyn::SweepCell& cell : res.cells) {
        if (!cell.ok) {
            any_failed = true;
            std::printf("  N=%lld beta=%.6g: FAILED: %s\n", (long long)cell.N, cell.beta,
                        cell.error.c_str());
            continue;
        }
        std::printf("  N=%lld beta=%.6g: dev vs reference %.6g", (long long)cell.N, cell.beta,
                    cell.dev_vs_ref);
        if (cell.result.oracle_ran)
            std::printf(", oracle dev %.6g", cell.result.max_oracle_deviation);
        std::printf(", wall %.2f s%s\n", cell.result.wall_seconds,
                    cell.nonmonotone ? ", nonmonotone" : "");
    }
    if (res.reference >= 0) {
        const gcsdyn::SweepCell& ref = res.cells[(std::size_t)res.reference];
        std::printf("  reference cell: N=%lld beta=%.6g\n", (long long)ref.N, ref.beta);
    }
    if (!res.summary_csv.empty()) std::printf("  wrote %s\n", res.summary_csv.c_str());
    std::printf("  wall %.2f s\n", res.wall_seconds);
    return any_failed ? kExitPropagation : kExitOk;
}

int cmd_presets() {
    for (const gcsdyn::PresetInfo& info : gcsdyn::preset_catalog())
        std::printf("%-24s %-9s %s\n", info.name.c_str(), info.sweep ? "[sweep]" : "[run]",
                    info.summary.c_str());
    return kExitOk;
}

int cmd_compare(const std::string& path_a, const std::string& path_b, double tol) {
    const gcsdyn::Trajectory a = gcsdyn::read_trajectory_csv(path_a);
    const gcsdyn::Trajectory b = gcsdyn::read_trajectory_csv(path_b);
    const double dev = gcsdyn::max_population_deviation(a, b);
    std::printf("compared %zu samples, %lld modes: max population deviation %.6g (tolerance "
                "%.6g)\n",
                a.size(), (long long)a.populations.front().size(), dev, tol);
    return dev > tol ? kExitTolerance : kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-mode Bose-Hubbard dynamics on grids of SU(M) coherent states"};
    app.require_subcommand(1);

    CommandOpts run_opt;
    CLI::App* run_cmd = app.add_subcommand("run", "propagate one scenario");
    add_common_options(run_cmd, run_opt);

    CommandOpts sweep_opt;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "propagate a basis-size / grid-spacing cross product");
    add_common_options(sweep_cmd, sweep_opt);
    sweep_cmd->add_option("--workers", sweep_opt.workers, "parallel sweep cells")
        ->check(CLI::PositiveNumber);

    CLI::App* presets_cmd = app.add_subcommand("presets", "list bundled configurations");

    std::string cmp_a, cmp_b;
    double cmp_tol = 0.01;
    CLI::App* compare_cmd =
        app.add_subcommand("compare", "diff the populations of two trajectory files");
    compare_cmd->add_option("first", cmp_a, "trajectory CSV")->required();
    compare_cmd->add_option("second", cmp_b, "trajectory CSV")->required();
    compare_cmd->add_option("--tol", cmp_tol, "largest acceptable population gap")
        ->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*run_cmd) {
            if (int rc = require_source(run_opt)) return rc;
            return cmd_run(run_opt);
        }
        if (*sweep_cmd) {
            if (int rc = require_source(sweep_opt)) return rc;
            return cmd_sweep(sweep_opt);
        }
        if (*presets_cmd) return cmd_presets();
        if (*compare_cmd) return cmd_compare(cmp_a, cmp_b, cmp_tol);
    } catch (const gcsdyn::ValidationError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const gcsdyn::PropagationError& e) {
        std::fprintf(stderr, "propagation failed: %s\n", e.what());
        return kExitPropagation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitOk;
}
