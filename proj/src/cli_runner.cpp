#include "ionwave/cli_runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ionwave/crystal_modes.hpp"
#include "ionwave/errors.hpp"
#include "ionwave/measurement_sim.hpp"
#include "ionwave/motion_dynamics.hpp"
#include "ionwave/trap_model.hpp"
#include "ionwave/waveform_synth.hpp"

namespace ionwave::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

struct GlobalArgs {
    std::string trap_file;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool json_out = false;
    bool no_timestamp = false;
};

struct Context {
    GlobalArgs globals;
    TrapDefinition trap;
    json config; // per-command config file content (may be empty)
};

TrapDefinition default_trap() {
    TrapDefinition def;
    def.basis = ElectrodeBasis::gaussian_default();
    return def;
}

json load_config_checked(const std::string& path, const std::set<std::string>& known_keys) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("config file " + path + ": invalid JSON: " + e.what());
    }
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw ConfigError("config file " + path + ": schema_version must be 1");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "schema_version") continue;
        if (known_keys.find(it.key()) == known_keys.end())
            throw ConfigError("config file " + path + ": unknown key '" + it.key() + "'");
    }
    return j;
}

// Config supplies a value only when the flag was not given on the command line.
template <typename T>
void config_override(const json& cfg, const std::string& key, const CLI::Option* opt, T& value) {
    if (cfg.contains(key) && (opt == nullptr || opt->count() == 0))
        value = cfg[key].get<T>();
}

json report_header(const std::string& command, const GlobalArgs& g) {
    json r;
    r["command"] = command;
    r["version"] = kVersion;
    if (!g.no_timestamp) {
        const auto now = std::chrono::system_clock::now();
        r["generated_unix_s"] =
            std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    }
    r["seed"] = g.seed;
    return r;
}

void emit_report(const json& report, const Context& ctx, std::ostream& out) {
    fs::create_directories(ctx.globals.out_dir);
    std::ofstream f(fs::path(ctx.globals.out_dir) / "report.json");
    f << report.dump(2) << "\n";
    if (ctx.globals.json_out) {
        out << report.dump(2) << "\n";
    } else {
        out << report["command"].get<std::string>() << ": ok\n";
        if (report.contains("outputs"))
            for (auto it = report["outputs"].begin(); it != report["outputs"].end(); ++it)
                out << "  " << it.key() << " = " << it.value().dump() << "\n";
    }
}

std::string out_path(const Context& ctx, const std::string& name) {
    fs::create_directories(ctx.globals.out_dir);
    return (fs::path(ctx.globals.out_dir) / name).string();
}

// ---------------------------------------------------------------------------
// solve-well

int cmd_solve_well(Context& ctx, std::vector<double> voltages, double seed_z_um,
                   double target_omega_mhz, double target_z0_um, std::ostream& out) {
    const auto& basis = ctx.trap.basis;
    const auto& constants = ctx.trap.constants;

    Eigen::VectorXd v;
    if (!voltages.empty()) {
        if (static_cast<int>(voltages.size()) != basis.size())
            throw ConfigError("solve-well: expected " + std::to_string(basis.size()) +
                              " voltages");
        v = Eigen::Map<Eigen::VectorXd>(voltages.data(),
                                        static_cast<Eigen::Index>(voltages.size()));
    } else {
        if (target_omega_mhz <= 0.0)
            throw ConfigError("solve-well: provide --voltages or --target-omega-MHz");
        v = solve_voltages(basis, target_z0_um * 1e-6, kTwoPi * target_omega_mhz * 1e6,
                           Eigen::VectorXd::Zero(basis.size()), constants);
        seed_z_um = target_z0_um;
    }

    const AxialPotential pot(basis, v);
    const WellParams w = find_well(pot, seed_z_um * 1e-6, constants);

    json well;
    well["z0_m"] = w.z0;
    well["omega_rad_s"] = w.omega;
    well["freq_MHz"] = w.omega / kTwoPi / 1e6;
    well["a_V_m2"] = w.a;
    well["b_V_m4"] = w.b;
    well["voltages_V"] = std::vector<double>(v.data(), v.data() + v.size());
    {
        std::ofstream f(out_path(ctx, "well.json"));
        f << well.dump(2) << "\n";
    }

    json report = report_header("solve-well", ctx.globals);
    report["inputs"]["seed_z_um"] = seed_z_um;
    if (target_omega_mhz > 0.0) report["inputs"]["target_omega_MHz"] = target_omega_mhz;
    report["outputs"] = well;
    emit_report(report, ctx, out);
    return 0;
}

// ---------------------------------------------------------------------------
// transport

int cmd_transport(Context& ctx, const std::string& profile_name, double t_T_us,
                  double omega_mhz, double z_start_um, double z_end_um, int n_ions,
                  bool compensate, double max_e0, std::ostream& out) {
    const auto& basis = ctx.trap.basis;
    const auto& constants = ctx.trap.constants;
    if (n_ions != 1 && n_ions != 2)
        throw ConfigError("transport: n_ions must be 1 or 2");

    TransportProfile prof;
    prof.kind = profile_kind_from_string(profile_name);
    prof.z_start = z_start_um * 1e-6;
    prof.z_end = z_end_um * 1e-6;
    prof.duration = t_T_us * 1e-6;
    const double omega = kTwoPi * omega_mhz * 1e6;

    const Eigen::VectorXd v0 = solve_voltages(basis, prof.z_start, omega,
                                              Eigen::VectorXd::Zero(basis.size()), constants);
    const VoltageWaveform wf = synth_transport(basis, prof, omega, v0, constants);
    write_waveform_csv(out_path(ctx, "waveform.csv"), wf, basis.electrode_names);

    // Commanded-path spectral criterion and predicted displacement.
    const std::complex<double> spectral = spectral_criterion(prof, omega);
    std::vector<double> z0_cmd(wf.samples.size());
    for (std::size_t k = 0; k < wf.samples.size(); ++k)
        z0_cmd[k] = prof.position(wf.times[k]);
    const CoherentAmplitude alpha_pred =
        alpha_from_sampled_path(z0_cmd, wf.dac_period, omega, constants);

    json report = report_header("transport", ctx.globals);
    report["inputs"]["profile"] = profile_name;
    report["inputs"]["t_T_us"] = t_T_us;
    report["inputs"]["omega_MHz"] = omega_mhz;
    report["inputs"]["z_start_um"] = z_start_um;
    report["inputs"]["z_end_um"] = z_end_um;
    report["inputs"]["n_ions"] = n_ions;
    report["certificates"]["spectral_amplitude_abs"] = std::abs(spectral);
    report["certificates"]["predicted_alpha_abs"] = std::abs(alpha_pred.alpha);

    TrajectoryOptions topts;
    topts.rel_tol = 1e-11;
    const int sample_stride = 4;
    for (std::size_t k = 0; k < wf.times.size(); k += sample_stride)
        topts.sample_times.push_back(wf.times[k]);

    std::vector<CoherentAmplitude> alphas;
    std::vector<double> mode_omegas;
    if (n_ions == 1) {
        TrajectoryState init;
        init.t = 0.0;
        init.positions = Eigen::VectorXd::Constant(1, prof.z_start);
        init.velocities = Eigen::VectorXd::Zero(1);
        auto res = integrate_classical(wf, basis, init, wf.duration(), constants, topts);
        write_trajectory_csv(out_path(ctx, "trajectory.csv"), res.samples);

        const AxialPotential final_pot(basis, wf.samples.back());
        const WellParams fw = find_well(final_pot, prof.z_end, constants);
        CoherentAmplitude a = extract_alpha_single(res.final_state, fw.z0, fw.omega, constants);
        alphas.push_back(a);
        mode_omegas.push_back(fw.omega);
        report["outputs"]["final_nbar"] = a.nbar();

        if (compensate) {
            const DrivePulse pulse = compensation_pulse(a, fw.omega, max_e0, constants);
            TrajectoryOptions popts;
            popts.rel_tol = 1e-11;
            popts.drive = PulseWindow{pulse, wf.duration()};
            TrajectoryState init2;
            init2.t = 0.0;
            init2.positions = init.positions;
            init2.velocities = init.velocities;
            auto res2 = integrate_classical(wf, basis, init2, wf.duration() + pulse.t_E,
                                            constants, popts);
            const CoherentAmplitude residual =
                extract_alpha_single(res2.final_state, fw.z0, fw.omega, constants);
            report["outputs"]["compensation"]["E0_V_m"] = pulse.E0;
            report["outputs"]["compensation"]["t_E_us"] = pulse.t_E * 1e6;
            report["outputs"]["compensation"]["phi_E_rad"] = pulse.phi_E;
            report["outputs"]["compensation"]["residual_nbar"] = residual.nbar();
        }
    } else {
        const AxialPotential start_pot(basis, wf.samples.front());
        const IonCrystal crystal0 = equilibrium_positions(
            start_pot, 2, default_crystal_seed(start_pot, 2, prof.z_start, constants),
            constants);
        TrajectoryState init;
        init.t = 0.0;
        init.positions = crystal0.positions;
        init.velocities = Eigen::VectorXd::Zero(2);
        auto res = integrate_crystal(wf, basis, init, wf.duration(), constants, topts);
        write_trajectory_csv(out_path(ctx, "trajectory.csv"), res.samples);

        const AxialPotential final_pot(basis, wf.samples.back());
        const IonCrystal crystal1 = equilibrium_positions(
            final_pot, 2, default_crystal_seed(final_pot, 2, prof.z_end, constants), constants);
        const ModeSpectrum spec = mode_spectrum(final_pot, crystal1, constants);
        alphas = extract_mode_alphas(res.final_state, crystal1, spec, constants);
        for (int k = 0; k < spec.n_modes(); ++k) {
            mode_omegas.push_back(spec.frequencies[k]);
            report["outputs"]["nbar_" + spec.labels[static_cast<std::size_t>(k)]] =
                alphas[static_cast<std::size_t>(k)].nbar();
        }
    }
    write_excitation_json(out_path(ctx, "excitation.json"), alphas, mode_omegas);
    report["outputs"]["waveform_samples"] = wf.n_samples();
    emit_report(report, ctx, out);
    return 0;
}

// ---------------------------------------------------------------------------
// separate

int cmd_separate(Context& ctx, SeparationRamp ramp, int n_ions, double offset_v,
                 std::ostream& out) {
    const auto& basis = ctx.trap.basis;
    const auto& constants = ctx.trap.constants;
    if (n_ions < 2) throw ConfigError("separate: n_ions must be >= 2");

    const SeparationResult sep = synth_separation(basis, ramp, n_ions, constants);

    VoltageWaveform wf = sep.waveform;
    if (offset_v != 0.0) {
        const int iO2 = basis.electrode_index("O2");
        for (auto& s : wf.samples) s[iO2] += offset_v;
    }
    write_waveform_csv(out_path(ctx, "waveform.csv"), wf, basis.electrode_names);

    const AxialPotential start_pot(basis, wf.samples.front());
    const WellParams w0 = find_well(start_pot, 0.0, constants);
    const IonCrystal crystal0 = equilibrium_positions(
        start_pot, n_ions, default_crystal_seed(start_pot, n_ions, w0.z0, constants),
        constants);

    TrajectoryState init;
    init.t = 0.0;
    init.positions = crystal0.positions;
    init.velocities = Eigen::VectorXd::Zero(n_ions);
    TrajectoryOptions topts;
    topts.rel_tol = 1e-10;
    const std::size_t stride = std::max<std::size_t>(1, wf.samples.size() / 2000);
    for (std::size_t k = 0; k < wf.times.size(); k += stride)
        topts.sample_times.push_back(wf.times[k]);
    auto res = integrate_crystal(wf, basis, init, wf.duration(), constants, topts);
    write_trajectory_csv(out_path(ctx, "trajectory.csv"), res.samples);

    // Per-ion amplitude in its own final well.
    const AxialPotential final_pot(basis, wf.samples.back());
    std::vector<CoherentAmplitude> alphas;
    std::vector<double> mode_omegas;
    json per_ion = json::array();
    for (int i = 0; i < n_ions; ++i) {
        const WellParams w = find_well(final_pot, res.final_state.positions[i], constants);
        TrajectoryState one;
        one.t = res.final_state.t;
        one.positions = Eigen::VectorXd::Constant(1, res.final_state.positions[i]);
        one.velocities = Eigen::VectorXd::Constant(1, res.final_state.velocities[i]);
        CoherentAmplitude a = extract_alpha_single(one, w.z0, w.omega, constants);
        a.mode_index = i;
        alphas.push_back(a);
        mode_omegas.push_back(w.omega);
        json entry;
        entry["ion"] = i;
        entry["well_z0_um"] = w.z0 * 1e6;
        entry["well_freq_MHz"] = w.omega / kTwoPi / 1e6;
        entry["nbar"] = a.nbar();
        entry["zone"] = w.z0 < 0.0 ? "A" : "B";
        per_ion.push_back(entry);
    }
    write_excitation_json(out_path(ctx, "excitation.json"), alphas, mode_omegas);

    json report = report_header("separate", ctx.globals);
    report["inputs"]["n_ions"] = n_ions;
    report["inputs"]["eps1"] = ramp.eps1;
    report["inputs"]["eps2"] = ramp.eps2;
    report["inputs"]["omega_start_MHz"] = ramp.omega_start / kTwoPi / 1e6;
    report["inputs"]["omega_final_MHz"] = ramp.omega_final / kTwoPi / 1e6;
    report["inputs"]["offset_V"] = offset_v;
    report["certificates"]["adiabaticity_stage1"] = sep.cert_stage1;
    report["certificates"]["adiabaticity_stage2"] = sep.cert_stage2;
    report["certificates"]["eps1"] = ramp.eps1;
    report["certificates"]["eps2"] = ramp.eps2;
    report["outputs"]["stage1_duration_us"] = sep.stage1_duration * 1e6;
    report["outputs"]["stage2_duration_us"] = sep.stage2_duration * 1e6;
    report["outputs"]["total_duration_us"] = (sep.stage1_duration + sep.stage2_duration) * 1e6;
    report["outputs"]["lowest_mode_min_kHz"] = sep.omega_min / kTwoPi / 1e3;
    report["outputs"]["a_crossing_s"] = sep.a_crossing_s;
    report["outputs"]["per_ion"] = per_ion;
    emit_report(report, ctx, out);
    return 0;
}

// ---------------------------------------------------------------------------
// partition-scan

int cmd_partition_scan(Context& ctx, SeparationRamp ramp, int n_ions, double off_min,
                       double off_max, int steps, double counts_per_ion, double droop,
                       std::ostream& out) {
    const auto& basis = ctx.trap.basis;
    const auto& constants = ctx.trap.constants;
    if (steps < 2) throw ConfigError("partition-scan: offset_steps must be >= 2");
    if (!(off_max > off_min)) throw ConfigError("partition-scan: empty offset range");

    const PotentialPath path = separation_path(basis, ramp, constants);
    std::vector<double> offsets(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i)
        offsets[static_cast<std::size_t>(i)] = off_min + (off_max - off_min) * i / (steps - 1);

    FluorescenceModel fl;
    fl.counts_per_ion = counts_per_ion;
    fl.droop = droop;
    const auto scan = partition_scan(path, n_ions, offsets, fl, "O2", constants);
    write_partition_scan_csv(out_path(ctx, "scan.csv"), scan);

    bool monotone = true;
    std::set<int> visited;
    for (std::size_t i = 0; i < scan.size(); ++i) {
        visited.insert(scan[i].left_count);
        if (i > 0 && scan[i].left_count < scan[i - 1].left_count) monotone = false;
    }

    json report = report_header("partition-scan", ctx.globals);
    report["inputs"]["n_ions"] = n_ions;
    report["inputs"]["offset_min_V"] = off_min;
    report["inputs"]["offset_max_V"] = off_max;
    report["inputs"]["offset_steps"] = steps;
    report["outputs"]["monotone"] = monotone;
    report["outputs"]["counts_visited"] = std::vector<int>(visited.begin(), visited.end());
    emit_report(report, ctx, out);
    return 0;
}

// ---------------------------------------------------------------------------
// flop / fit

int cmd_flop(Context& ctx, const std::string& dist_name, double nbar, double alpha_mag,
             const std::string& sideband_name, double eta, double omega0_khz, double gamma,
             double t_max_us, int points, int shots, std::ostream& out) {
    if (points < 2) throw ConfigError("flop: points must be >= 2");
    FockDistribution dist;
    if (dist_name == "thermal")
        dist = thermal_dist(nbar);
    else if (dist_name == "coherent")
        dist = coherent_dist(alpha_mag);
    else
        throw ConfigError("flop: dist must be 'thermal' or 'coherent'");

    const Sideband sb = sideband_from_string(sideband_name);
    const double omega0 = kTwoPi * omega0_khz * 1e3;
    std::vector<double> times(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k)
        times[static_cast<std::size_t>(k)] = t_max_us * 1e-6 * k / (points - 1);

    FloppingTrace tr = flopping_trace(dist, sb, omega0, eta, gamma, times);
    if (shots > 0) apply_shot_noise(tr, shots, ctx.globals.seed);
    write_trace_csv(out_path(ctx, "trace.csv"), tr);

    json report = report_header("flop", ctx.globals);
    report["inputs"]["dist"] = dist_name;
    report["inputs"]["nbar"] = dist_name == "thermal" ? nbar : alpha_mag * alpha_mag;
    report["inputs"]["sideband"] = sideband_name;
    report["inputs"]["eta"] = eta;
    report["inputs"]["omega0_kHz"] = omega0_khz;
    report["inputs"]["gamma_per_s"] = gamma;
    report["outputs"]["points"] = points;
    report["outputs"]["distribution_mean"] = dist.mean();
    emit_report(report, ctx, out);
    return 0;
}

int cmd_fit(Context& ctx, const std::string& trace_path, const std::string& model,
            const std::string& sideband_name, double eta, double omega0_khz,
            std::ostream& out) {
    FloppingTrace tr = read_trace_csv(trace_path);
    tr.sideband = sideband_from_string(sideband_name);
    const double omega0 = kTwoPi * omega0_khz * 1e3;
    const FitResult fit = fit_distribution(tr, model, omega0, eta);

    json fr;
    fr["model"] = fit.model;
    fr["nbar"] = fit.nbar;
    fr["nbar_sigma"] = fit.sigma_available ? json(fit.nbar_sigma) : json(nullptr);
    fr["gamma_per_s"] = fit.gamma;
    fr["residual_norm"] = fit.residual_norm;
    if (fit.model == "coherent") fr["alpha_mag"] = fit.alpha_mag();
    {
        std::ofstream f(out_path(ctx, "fit.json"));
        f << fr.dump(2) << "\n";
    }

    json report = report_header("fit", ctx.globals);
    report["inputs"]["trace"] = trace_path;
    report["inputs"]["model"] = model;
    report["inputs"]["eta"] = eta;
    report["inputs"]["omega0_kHz"] = omega0_khz;
    report["outputs"] = fr;
    emit_report(report, ctx, out);
    return 0;
}

} // namespace

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"ionwave: trapped-ion transport and separation waveform toolkit"};
    app.require_subcommand(1);

    GlobalArgs globals;
    std::string config_path;
    app.add_option("--trap", globals.trap_file, "trap definition JSON");
    app.add_option("--out", globals.out_dir, "output directory");
    app.add_option("--seed", globals.seed, "RNG seed");
    app.add_flag("--json", globals.json_out, "print the full report JSON to stdout");
    app.add_flag("--no-timestamp", globals.no_timestamp, "omit the timestamp field");

    // solve-well
    auto* sw = app.add_subcommand("solve-well", "locate or synthesize a harmonic well");
    std::vector<double> sw_voltages;
    double sw_seed_um = 0.0, sw_omega_mhz = 0.0, sw_z0_um = 0.0;
    std::string sw_config;
    auto* sw_v = sw->add_option("--voltages", sw_voltages, "per-electrode voltages (V)");
    auto* sw_s = sw->add_option("--seed-z-um", sw_seed_um, "well search seed (um)");
    auto* sw_o = sw->add_option("--target-omega-MHz", sw_omega_mhz, "target frequency");
    auto* sw_z = sw->add_option("--target-z0-um", sw_z0_um, "target well center (um)");
    sw->add_option("--config", sw_config, "config JSON");

    // transport
    auto* tp = app.add_subcommand("transport", "synthesize and analyze a transport waveform");
    std::string tp_profile = "sine_squared";
    double tp_tt = 8.0, tp_omega = 1.972, tp_z0 = -185.0, tp_z1 = 185.0, tp_e0 = 5.0;
    int tp_ions = 1;
    bool tp_comp = false;
    std::string tp_config;
    auto* tp_p = tp->add_option("--profile", tp_profile,
                                "constant_velocity|sine_squared|min_jerk_poly5");
    auto* tp_t = tp->add_option("--t-T-us", tp_tt, "transport duration (us)");
    auto* tp_w = tp->add_option("--omega-MHz", tp_omega, "well frequency (MHz)");
    auto* tp_a = tp->add_option("--z-start-um", tp_z0, "start position (um)");
    auto* tp_b = tp->add_option("--z-end-um", tp_z1, "end position (um)");
    auto* tp_n = tp->add_option("--n-ions", tp_ions, "1 or 2");
    auto* tp_c = tp->add_flag("--compensate", tp_comp, "append a cancellation pulse");
    tp->add_option("--max-E0", tp_e0, "compensation field limit (V/m)");
    tp->add_option("--config", tp_config, "config JSON");

    // separate
    auto* sp = app.add_subcommand("separate", "synthesize and analyze a separation waveform");
    double sp_eps1 = 0.025, sp_eps2 = 0.015, sp_ws = 2.6, sp_wk = 0.3, sp_wf = 2.8;
    double sp_sep = 148.0, sp_o2 = 0.0, sp_xt = 0.0, sp_ab = 0.0, sp_off = 0.0;
    int sp_ions = 2;
    std::string sp_config;
    auto* sp_e1 = sp->add_option("--eps1", sp_eps1, "stage-1 adiabaticity bound");
    auto* sp_e2 = sp->add_option("--eps2", sp_eps2, "stage-2 adiabaticity bound");
    auto* sp_w0 = sp->add_option("--omega-start-MHz", sp_ws, "merged-well frequency");
    auto* sp_w1 = sp->add_option("--omega-knee-MHz", sp_wk, "stage-1 target frequency");
    auto* sp_w2 = sp->add_option("--omega-final-MHz", sp_wf, "final well frequency");
    auto* sp_d = sp->add_option("--separation-um", sp_sep, "final well half-separation (um)");
    auto* sp_oc = sp->add_option("--o2-comp-V", sp_o2, "O2 compensation ramp (V)");
    auto* sp_xo = sp->add_option("--x-tune-V", sp_xt, "X quartic tune (V)");
    auto* sp_abd = sp->add_option("--ab-diff-V", sp_ab, "A/B differential (V)");
    auto* sp_n = sp->add_option("--n-ions", sp_ions, "ion count (>= 2)");
    auto* sp_of = sp->add_option("--offset-V", sp_off, "static O2 offset perturbation (V)");
    sp->add_option("--config", sp_config, "config JSON");

    // partition-scan
    auto* ps = app.add_subcommand("partition-scan", "9-ion style partition staircase");
    int ps_ions = 9, ps_steps = 61;
    double ps_min = -0.45, ps_max = 0.45, ps_c0 = 10.0, ps_droop = 0.03;
    std::string ps_config;
    auto* ps_n = ps->add_option("--n-ions", ps_ions, "ion count");
    auto* ps_a = ps->add_option("--offset-min-V", ps_min, "scan start (V)");
    auto* ps_b = ps->add_option("--offset-max-V", ps_max, "scan end (V)");
    auto* ps_s = ps->add_option("--offset-steps", ps_steps, "scan points");
    auto* ps_c = ps->add_option("--counts-per-ion", ps_c0, "fluorescence counts per ion");
    auto* ps_d = ps->add_option("--droop", ps_droop, "fluorescence droop per ion");
    ps->add_option("--config", ps_config, "config JSON");

    // flop
    auto* fl = app.add_subcommand("flop", "simulate a sideband flopping trace");
    std::string fl_dist = "thermal", fl_sb = "MAS";
    double fl_nbar = 0.19, fl_alpha = 2.53, fl_eta = 0.479, fl_w0 = 50.0, fl_gamma = 1.2e4;
    double fl_tmax = 100.0;
    int fl_points = 120, fl_shots = 0;
    std::string fl_config;
    auto* fl_d = fl->add_option("--dist", fl_dist, "thermal|coherent");
    auto* fl_n = fl->add_option("--nbar", fl_nbar, "thermal mean occupation");
    auto* fl_a = fl->add_option("--alpha", fl_alpha, "coherent |alpha|");
    auto* fl_s = fl->add_option("--sideband", fl_sb, "MAS|MSS");
    auto* fl_e = fl->add_option("--eta", fl_eta, "Lamb-Dicke parameter");
    auto* fl_o = fl->add_option("--omega0-kHz", fl_w0, "carrier Rabi rate (kHz)");
    auto* fl_g = fl->add_option("--gamma", fl_gamma, "decay rate (1/s)");
    auto* fl_t = fl->add_option("--t-max-us", fl_tmax, "trace length (us)");
    auto* fl_p = fl->add_option("--points", fl_points, "trace points");
    auto* fl_sh = fl->add_option("--shots", fl_shots, "binomial shots per point (0 = none)");
    fl->add_option("--config", fl_config, "config JSON");

    // fit
    auto* ft = app.add_subcommand("fit", "fit a flopping trace");
    std::string ft_trace, ft_model = "thermal", ft_sb = "MAS";
    double ft_eta = 0.479, ft_w0 = 50.0;
    std::string ft_config;
    ft->add_option("--trace", ft_trace, "trace CSV path")->required();
    auto* ft_m = ft->add_option("--model", ft_model, "thermal|coherent");
    auto* ft_s = ft->add_option("--sideband", ft_sb, "MAS|MSS");
    auto* ft_e = ft->add_option("--eta", ft_eta, "Lamb-Dicke parameter");
    auto* ft_o = ft->add_option("--omega0-kHz", ft_w0, "carrier Rabi rate (kHz)");
    ft->add_option("--config", ft_config, "config JSON");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        Context ctx;
        ctx.globals = globals;
        ctx.trap = globals.trap_file.empty() ? default_trap() : load_trap(globals.trap_file);

        if (sw->parsed()) {
            if (!sw_config.empty()) {
                const json cfg = load_config_checked(
                    sw_config, {"voltages_V", "seed_z_um", "target_omega_MHz", "target_z0_um"});
                config_override(cfg, "voltages_V", sw_v, sw_voltages);
                config_override(cfg, "seed_z_um", sw_s, sw_seed_um);
                config_override(cfg, "target_omega_MHz", sw_o, sw_omega_mhz);
                config_override(cfg, "target_z0_um", sw_z, sw_z0_um);
            }
            return cmd_solve_well(ctx, sw_voltages, sw_seed_um, sw_omega_mhz, sw_z0_um, out);
        }
        if (tp->parsed()) {
            if (!tp_config.empty()) {
                const json cfg = load_config_checked(
                    tp_config, {"profile", "t_T_us", "omega_MHz", "z_start_um", "z_end_um",
                                "n_ions", "compensate", "max_E0_V_m"});
                config_override(cfg, "profile", tp_p, tp_profile);
                config_override(cfg, "t_T_us", tp_t, tp_tt);
                config_override(cfg, "omega_MHz", tp_w, tp_omega);
                config_override(cfg, "z_start_um", tp_a, tp_z0);
                config_override(cfg, "z_end_um", tp_b, tp_z1);
                config_override(cfg, "n_ions", tp_n, tp_ions);
                config_override(cfg, "compensate", tp_c, tp_comp);
                config_override(cfg, "max_E0_V_m", static_cast<CLI::Option*>(nullptr), tp_e0);
            }
            return cmd_transport(ctx, tp_profile, tp_tt, tp_omega, tp_z0, tp_z1, tp_ions,
                                 tp_comp, tp_e0, out);
        }
        if (sp->parsed()) {
            if (!sp_config.empty()) {
                const json cfg = load_config_checked(
                    sp_config,
                    {"eps1", "eps2", "omega_start_MHz", "omega_knee_MHz", "omega_final_MHz",
                     "separation_um", "o2_comp_V", "x_tune_V", "ab_diff_V", "n_ions",
                     "offset_V"});
                config_override(cfg, "eps1", sp_e1, sp_eps1);
                config_override(cfg, "eps2", sp_e2, sp_eps2);
                config_override(cfg, "omega_start_MHz", sp_w0, sp_ws);
                config_override(cfg, "omega_knee_MHz", sp_w1, sp_wk);
                config_override(cfg, "omega_final_MHz", sp_w2, sp_wf);
                config_override(cfg, "separation_um", sp_d, sp_sep);
                config_override(cfg, "o2_comp_V", sp_oc, sp_o2);
                config_override(cfg, "x_tune_V", sp_xo, sp_xt);
                config_override(cfg, "ab_diff_V", sp_abd, sp_ab);
                config_override(cfg, "n_ions", sp_n, sp_ions);
                config_override(cfg, "offset_V", sp_of, sp_off);
            }
            SeparationRamp ramp;
            ramp.eps1 = sp_eps1;
            ramp.eps2 = sp_eps2;
            ramp.omega_start = kTwoPi * sp_ws * 1e6;
            ramp.omega_knee = kTwoPi * sp_wk * 1e6;
            ramp.omega_final = kTwoPi * sp_wf * 1e6;
            ramp.well_separation = sp_sep * 1e-6;
            ramp.o2_compensation = sp_o2;
            ramp.x_quartic_tune = sp_xt;
            ramp.ab_differential = sp_ab;
            return cmd_separate(ctx, ramp, sp_ions, sp_off, out);
        }
        if (ps->parsed()) {
            if (!ps_config.empty()) {
                const json cfg = load_config_checked(
                    ps_config, {"n_ions", "offset_min_V", "offset_max_V", "offset_steps",
                                "counts_per_ion", "droop"});
                config_override(cfg, "n_ions", ps_n, ps_ions);
                config_override(cfg, "offset_min_V", ps_a, ps_min);
                config_override(cfg, "offset_max_V", ps_b, ps_max);
                config_override(cfg, "offset_steps", ps_s, ps_steps);
                config_override(cfg, "counts_per_ion", ps_c, ps_c0);
                config_override(cfg, "droop", ps_d, ps_droop);
            }
            SeparationRamp ramp; // defaults
            return cmd_partition_scan(ctx, ramp, ps_ions, ps_min, ps_max, ps_steps, ps_c0,
                                      ps_droop, out);
        }
        if (fl->parsed()) {
            if (!fl_config.empty()) {
                const json cfg = load_config_checked(
                    fl_config, {"dist", "nbar", "alpha", "sideband", "eta", "omega0_kHz",
                                "gamma_per_s", "t_max_us", "points", "shots"});
                config_override(cfg, "dist", fl_d, fl_dist);
                config_override(cfg, "nbar", fl_n, fl_nbar);
                config_override(cfg, "alpha", fl_a, fl_alpha);
                config_override(cfg, "sideband", fl_s, fl_sb);
                config_override(cfg, "eta", fl_e, fl_eta);
                config_override(cfg, "omega0_kHz", fl_o, fl_w0);
                config_override(cfg, "gamma_per_s", fl_g, fl_gamma);
                config_override(cfg, "t_max_us", fl_t, fl_tmax);
                config_override(cfg, "points", fl_p, fl_points);
                config_override(cfg, "shots", fl_sh, fl_shots);
            }
            return cmd_flop(ctx, fl_dist, fl_nbar, fl_alpha, fl_sb, fl_eta, fl_w0, fl_gamma,
                            fl_tmax, fl_points, fl_shots, out);
        }
        if (ft->parsed()) {
            if (!ft_config.empty()) {
                const json cfg = load_config_checked(
                    ft_config, {"model", "sideband", "eta", "omega0_kHz"});
                config_override(cfg, "model", ft_m, ft_model);
                config_override(cfg, "sideband", ft_s, ft_sb);
                config_override(cfg, "eta", ft_e, ft_eta);
                config_override(cfg, "omega0_kHz", ft_o, ft_w0);
            }
            return cmd_fit(ctx, ft_trace, ft_model, ft_sb, ft_eta, ft_w0, out);
        }
        err << "error: no subcommand\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace ionwave::cli
