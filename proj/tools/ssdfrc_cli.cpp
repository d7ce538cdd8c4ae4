// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: radar scenarios, precoder design, BER sweeps, Monte
// Carlo sweeps and plot data. Exit codes: 0 success, 2 configuration error,
// 3 numerical failure, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssdfrc/ssdfrc.hpp"

namespace fs = std::filesystem;
using namespace ssdfrc;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

struct Context {
    Scenario scenario;
    std::uint64_t seed = 0;
    fs::path out;
};

Context load(const Common& c) {
    Context ctx;
    ctx.scenario = c.config.empty() ? Scenario{} : load_scenario(c.config);
    if (c.config.empty()) ctx.scenario.cfg = SystemConfig::reference();
    ctx.seed = c.seed.value_or(ctx.scenario.cfg.rng_seed);
    ctx.scenario.cfg.rng_seed = ctx.seed;
    ctx.out = c.out.empty() ? fs::path(ctx.scenario.out_dir) : fs::path(c.out);
    fs::create_directories(ctx.out);
    return ctx;
}

void write_manifest(const Context& ctx, const std::string& command, const std::vector<fs::path>& files) {
    Json list = Json::array();
    for (const auto& f : files) list.push_back(fs::relative(f, ctx.out).generic_string());
    const Json doc = {{"command", command}, {"seed", ctx.seed}, {"config", scenario_to_json(ctx.scenario)}, {"files", list}};
    write_file(ctx.out / "manifest.json", doc.dump(2) + "\n");
}

CommChannel channel_for(const Context& ctx) {
    return draw_comm_channel(ctx.scenario.cfg, ctx.scenario.comm, ctx.scenario.num_scatterers, ctx.seed);
}

std::vector<std::pair<double, double>> pattern_rows(const CMat& P, const SystemConfig& cfg) {
    const auto grid = angle_grid_deg(-90.0, 90.0, 0.5);
    std::vector<double> rad;
    for (double d : grid) rad.push_back(deg2rad(d));
    const auto p = beampattern(P, cfg, rad);
    std::vector<std::pair<double, double>> rows;
    for (std::size_t g = 0; g < grid.size(); ++g) rows.emplace_back(grid[g], p[g]);
    return rows;
}

std::vector<fs::path> simulate_radar(const Context& ctx, bool dump_cube) {
    const CommChannel ch = channel_for(ctx);
    const PrecoderDesign design = resolve_precoder(ctx.scenario, ch, ctx.seed);
    const ScenarioResult r = run_scenario(ctx.scenario, ctx.seed, &design.P);
    for (const auto& n : r.notices) std::cerr << "notice: " << n << "\n";
    std::printf("%zu estimates, %zu SSR solves, %.2f s\n", r.estimation.estimates.size(), r.estimation.iterations, r.seconds);
    for (const auto& e : r.estimation.estimates)
        std::printf("  angle %7.2f deg  range %8.3f m  velocity %8.3f m/s  (%s)\n", e.angle_deg, e.range_m, e.velocity_mps,
                    to_string(e.provenance));
    auto files = write_scenario_outputs(r, ctx.out);
    if (dump_cube) {
        const auto frames = generate_frames(r.cfg, design.P, ctx.seed);
        const RadarSynthesis syn = synthesize_radar_at_snr(r.truth, frames, r.cfg, ctx.scenario.radar_snr_db);
        write_file(ctx.out / "radar_cube.bin", encode_cube(syn.cube, ctx.seed));
        files.push_back(ctx.out / "radar_cube.bin");
    }
    return files;
}

std::vector<fs::path> design_precoder(Context ctx) {
    ctx.scenario.precoder.source = PrecoderSource::Optimize;
    const CommChannel ch = channel_for(ctx);
    const PrecoderDesign design = resolve_precoder(ctx.scenario, ch, ctx.seed);
    const PrecoderState& st = *design.state;
    std::vector<fs::path> files;

    CsvTable trace({"step", "loss", "beampattern_error", "snr_db", "grad_norm"});
    for (std::size_t k = 0; k < st.loss_trace.size(); ++k)
        trace.row(k, st.loss_trace[k], st.error_trace[k], st.snr_db_trace[k], st.grad_norm_trace[k]);
    trace.write(ctx.out / "precoder_trace.csv");
    files.push_back(ctx.out / "precoder_trace.csv");

    write_file(ctx.out / "precoder.bin", encode_matrix(st.P));
    files.push_back(ctx.out / "precoder.bin");

    PlotData d;
    d.beampattern = pattern_rows(st.P, ctx.scenario.cfg);
    files.push_back(emit_plot_data(d, "beampattern", ctx.out));
    const CMat eye = CMat::Identity(st.P.rows(), st.P.cols());
    d.beampattern = pattern_rows(eye, ctx.scenario.cfg);
    plot_table(d, PlotKind::Beampattern).write(ctx.out / "beampattern_identity.csv");
    files.push_back(ctx.out / "beampattern_identity.csv");

    const auto& spec = ctx.scenario.precoder.spec;
    const double ratio = band_power_ratio(beampattern(st.P, ctx.scenario.cfg, spec.angles_rad), spec);
    const double ratio_eye = band_power_ratio(beampattern(eye, ctx.scenario.cfg, spec.angles_rad), spec);
    std::printf("loss %.6g -> %.6g (lr %.3g), in/out band power ratio %.4g (identity %.4g)\n", st.loss_trace.front(),
                st.loss_trace.back(), st.learning_rate, ratio, ratio_eye);
    return files;
}

std::vector<fs::path> simulate_comm(const Context& ctx) {
    const CommChannel ch = channel_for(ctx);
    const PrecoderDesign design = resolve_precoder(ctx.scenario, ch, ctx.seed);
    const auto pts = simulate_ber(ctx.scenario.cfg, ch, design.P, ctx.scenario.comm_snr_db, ctx.scenario.trials, ctx.seed);
    CsvTable t({"snr_db", "n_tx", "subcarrier_class", "ber", "trials"});
    for (const auto& p : pts) {
        t.row(p.snr_db, p.num_tx, "shared", p.counts.shared_ber(), p.trials);
        if (p.counts.private_bits) t.row(p.snr_db, p.num_tx, "private", p.counts.private_ber(), p.trials);
        std::printf("snr %6.2f dB  shared BER %.4g  private BER %.4g\n", p.snr_db, p.counts.shared_ber(), p.counts.private_ber());
    }
    t.write(ctx.out / "ber.csv");
    return {ctx.out / "ber.csv"};
}

CsvTable summary_table(const std::vector<McSummary>& rows) {
    CsvTable t({"variable", "value", "trials", "detection_probability", "wrong_ratio", "missed_ratio", "angle_mse_deg2",
                "coarse_angle_mse_deg2", "range_mse_m2", "doppler_mse_m2s2", "mean_iterations", "bit_rate_bps", "rate_loss_bps",
                "numerical_failures"});
    for (const auto& m : rows)
        t.row(to_string(m.variable), m.value, m.trials, m.detection_probability, m.wrong_ratio, m.missed_ratio, m.angle_mse_deg2,
              m.coarse_angle_mse_deg2, m.range_mse_m2, m.doppler_mse_m2s2, m.mean_iterations, m.bit_rate, m.rate_loss,
              m.numerical_failures);
    return t;
}

std::vector<fs::path> monte_carlo(const Context& ctx) {
    const auto rows = run_monte_carlo(ctx.scenario, ctx.scenario.trials, ctx.seed);
    for (const auto& m : rows)
        std::printf("%s = %g: Pd %.3f  wrong %.3f  missed %.3f  iterations %.2f\n", to_string(m.variable), m.value,
                    m.detection_probability, m.wrong_ratio, m.missed_ratio, m.mean_iterations);
    summary_table(rows).write(ctx.out / "monte_carlo.csv");
    return {ctx.out / "monte_carlo.csv"};
}

std::vector<fs::path> emit_plots(const Context& ctx, std::vector<std::string> kinds) {
    if (kinds.empty()) kinds = {"beampattern", "range_profile", "ber_curve", "mse_curve", "tradeoff"};
    for (const auto& k : kinds) parse_plot_kind(k);
    auto wants = [&](const char* k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };

    PlotData d;
    const CommChannel ch = channel_for(ctx);
    const PrecoderDesign design = resolve_precoder(ctx.scenario, ch, ctx.seed);
    if (wants("beampattern")) d.beampattern = pattern_rows(design.P, ctx.scenario.cfg);
    if (wants("range_profile")) d.range_profile = run_scenario(ctx.scenario, ctx.seed, &design.P).range_profiles;
    if (wants("ber_curve")) d.ber = simulate_ber(ctx.scenario.cfg, ch, design.P, ctx.scenario.comm_snr_db, ctx.scenario.trials, ctx.seed);
    if (wants("mse_curve")) {
        Scenario s = ctx.scenario;
        s.monte_carlo.sweep = SweepVariable::SnrDb;
        s.monte_carlo.values = {0, 5, 10, 15};
        s.monte_carlo.num_targets = 1;
        d.mse = run_monte_carlo(s, s.trials, ctx.seed);
    }
    if (wants("tradeoff")) {
        Scenario s = ctx.scenario;
        s.monte_carlo.sweep = SweepVariable::NumPrivate;
        d.tradeoff = run_monte_carlo(s, s.trials, ctx.seed);
    }
    std::vector<fs::path> files;
    for (const auto& k : kinds) files.push_back(emit_plot_data(d, k, ctx.out));
    return files;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OFDM dual-function radar-communication simulator"};
    app.require_subcommand(1);
    Common common;
    bool dump_cube = false;
    std::vector<std::string> kinds;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "Scenario JSON file")->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "Master seed (defaults to system.rng_seed)");
        sub->add_option("--out", common.out, "Output directory (defaults to the scenario's out)");
    };
    auto* radar = app.add_subcommand("simulate-radar", "Synthesize one radar realization and estimate the targets");
    add_common(radar);
    radar->add_flag("--dump-cube", dump_cube, "Also write the noisy radar cube as radar_cube.bin");
    auto* design = app.add_subcommand("design-precoder", "Optimize the precoder with Adam");
    add_common(design);
    auto* comm = app.add_subcommand("simulate-comm", "BER sweep over comm_snr_db");
    add_common(comm);
    auto* mc = app.add_subcommand("monte-carlo", "Monte Carlo sweep of the radar estimator");
    add_common(mc);
    auto* plots = app.add_subcommand("emit-plots", "Write plot data CSVs");
    add_common(plots);
    plots->add_option("--kind", kinds, "beampattern, range_profile, ber_curve, mse_curve or tradeoff (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const Context ctx = load(common);
        std::vector<fs::path> files;
        std::string name;
        if (radar->parsed()) files = simulate_radar(ctx, dump_cube), name = "simulate-radar";
        else if (design->parsed()) files = design_precoder(ctx), name = "design-precoder";
        else if (comm->parsed()) files = simulate_comm(ctx), name = "simulate-comm";
        else if (mc->parsed()) files = monte_carlo(ctx), name = "monte-carlo";
        else files = emit_plots(ctx, kinds), name = "emit-plots";
        write_manifest(ctx, name, files);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
