// SPDX-License-Identifier: Apache-2.0
//
// Scenario description, single-realization runs, Monte Carlo sweeps and
// plot-data emission.

#pragma once

#include <algorithm>
#include <chrono>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "channel.hpp"
#include "comm_rx.hpp"
#include "config.hpp"
#include "estimation.hpp"
#include "io.hpp"
#include "precoder.hpp"
#include "rng.hpp"
#include "waveform.hpp"

namespace ssdfrc {

enum class PrecoderSource { Identity, File, Optimize };
enum class BetaMode { Given, Unit, Random };
enum class SweepVariable { NumPrivate, SnrDb, NumTx };

inline const char* to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::NumPrivate: return "M";
        case SweepVariable::SnrDb: return "snr_db";
        case SweepVariable::NumTx: return "n_tx";
    }
    return "?";
}

struct PrecoderSettings {
    PrecoderSource source = PrecoderSource::Identity;
    std::string file;
    double alpha_b = 1e-4;
    double alpha_snr = 0.8;
    AdamParams adam;
    BeampatternSpec spec = BeampatternSpec::default_spec();
    bool instantaneous = false;  // use the symbols of the first frame instead of R_i = I
};

/// Bounds for randomly placed targets. range_max_m = 0 selects
/// min(0.9 range_max, 0.9 c T_cp / 2).
struct TargetBounds {
    double angle_min_deg = -60.0;
    double angle_max_deg = 60.0;
    double range_min_m = 10.0;
    double range_max_m = 0.0;
    double speed_fraction = 0.25;  // |v| < speed_fraction * vel_max
    double min_angle_sep_deg = 1.0;
};

struct MonteCarloSettings {
    SweepVariable sweep = SweepVariable::NumPrivate;
    std::vector<double> values{1, 2, 3, 4, 5, 6, 7, 8};
    std::size_t num_targets = 6;
    std::size_t num_private = 8;  // used when the sweep variable is not M
    BetaMode beta = BetaMode::Random;
    TargetBounds bounds;
    std::size_t workers = 1;
};

struct Scenario {
    SystemConfig cfg;
    std::vector<TargetRecord> targets;
    BetaMode beta = BetaMode::Given;
    CommGeometry comm;
    std::size_t num_scatterers = 32;
    PrecoderSettings precoder;
    double radar_snr_db = 15.0;
    bool time_domain = false;
    std::vector<double> comm_snr_db{-10, -5, 0, 5, 10};
    std::size_t trials = 1;
    std::string out_dir = "out";
    EstimatorParams estimator;
    MonteCarloSettings monte_carlo;

    void validate() const {
        cfg.validate();
        if (trials < 1) throw ConfigError("scenario: trials must be >= 1");
        if (precoder.source == PrecoderSource::File && !std::filesystem::exists(precoder.file))
            throw ConfigError("scenario: precoder file not found: " + precoder.file);
        precoder.spec.validate();
        for (const auto& t : targets) {
            try {
                validate_target(t, cfg);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("scenario: ") + e.what());
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Scenario JSON

namespace detail {

inline PrecoderSource parse_precoder_source(const std::string& s) {
    if (s == "identity") return PrecoderSource::Identity;
    if (s == "file") return PrecoderSource::File;
    if (s == "optimize") return PrecoderSource::Optimize;
    throw ConfigError("precoder.source: expected identity, file or optimize");
}

inline BetaMode parse_beta(const std::string& s) {
    if (s == "given") return BetaMode::Given;
    if (s == "unit") return BetaMode::Unit;
    if (s == "random") return BetaMode::Random;
    throw ConfigError("beta: expected given, unit or random");
}

inline SweepVariable parse_sweep(const std::string& s) {
    if (s == "M") return SweepVariable::NumPrivate;
    if (s == "snr_db") return SweepVariable::SnrDb;
    if (s == "n_tx") return SweepVariable::NumTx;
    throw ConfigError("monte_carlo.sweep: expected M, snr_db or n_tx");
}

}  // namespace detail

/// Builds a scenario from JSON. Relative file paths resolve against `base_dir`.
inline Scenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
    detail::check_keys(j, {"system", "targets", "beta", "comm", "precoder", "radar", "comm_snr_db", "trials", "out", "monte_carlo"},
                       "scenario");
    Scenario s;
    s.cfg = j.contains("system") ? system_config_from_json(j.at("system")) : SystemConfig::reference();
    if (j.contains("targets")) s.targets = targets_from_json(j.at("targets"));
    if (j.contains("beta")) s.beta = detail::parse_beta(j.at("beta").get<std::string>());
    detail::read_opt(j, "comm_snr_db", s.comm_snr_db, "scenario");
    detail::read_opt(j, "trials", s.trials, "scenario");
    detail::read_opt(j, "out", s.out_dir, "scenario");

    if (j.contains("comm")) {
        const Json& c = j.at("comm");
        detail::check_keys(c, {"range_m", "departure_deg", "incidence_deg", "num_scatterers"}, "comm");
        double dep = rad2deg(s.comm.departure_rad), inc = rad2deg(s.comm.incidence_rad);
        detail::read_opt(c, "range_m", s.comm.range_m, "comm");
        detail::read_opt(c, "departure_deg", dep, "comm");
        detail::read_opt(c, "incidence_deg", inc, "comm");
        detail::read_opt(c, "num_scatterers", s.num_scatterers, "comm");
        s.comm.departure_rad = deg2rad(dep);
        s.comm.incidence_rad = deg2rad(inc);
    }

    if (j.contains("precoder")) {
        const Json& p = j.at("precoder");
        detail::check_keys(p, {"source", "file", "alpha_b", "alpha_snr", "learning_rates", "steps", "renormalize",
                               "pass_bands_deg", "instantaneous"},
                           "precoder");
        if (p.contains("source")) s.precoder.source = detail::parse_precoder_source(p.at("source").get<std::string>());
        detail::read_opt(p, "file", s.precoder.file, "precoder");
        if (!s.precoder.file.empty() && std::filesystem::path(s.precoder.file).is_relative())
            s.precoder.file = (base_dir / s.precoder.file).string();
        detail::read_opt(p, "alpha_b", s.precoder.alpha_b, "precoder");
        detail::read_opt(p, "alpha_snr", s.precoder.alpha_snr, "precoder");
        detail::read_opt(p, "learning_rates", s.precoder.adam.learning_rates, "precoder");
        detail::read_opt(p, "steps", s.precoder.adam.steps, "precoder");
        detail::read_opt(p, "renormalize", s.precoder.adam.renormalize, "precoder");
        detail::read_opt(p, "instantaneous", s.precoder.instantaneous, "precoder");
        if (p.contains("pass_bands_deg")) {
            std::vector<std::pair<double, double>> bands;
            detail::read_opt(p, "pass_bands_deg", bands, "precoder");
            s.precoder.spec = BeampatternSpec::bands(bands);
        }
    }

    if (j.contains("radar")) {
        const Json& r = j.at("radar");
        detail::check_keys(r, {"snr_db", "time_domain", "zero_pad_factor", "angle_mads", "range_mads", "wavelength_approx",
                               "solver", "lambda", "amplitude_threshold", "max_sparsity", "max_iterations", "snapshot_mode",
                               "range_merge_cells", "angle_grid_step_deg", "fista_tol"},
                           "radar");
        auto& e = s.estimator;
        detail::read_opt(r, "snr_db", s.radar_snr_db, "radar");
        detail::read_opt(r, "time_domain", s.time_domain, "radar");
        detail::read_opt(r, "zero_pad_factor", e.zero_pad_factor, "radar");
        detail::read_opt(r, "angle_mads", e.angle_mads, "radar");
        detail::read_opt(r, "range_mads", e.range_mads, "radar");
        detail::read_opt(r, "wavelength_approx", e.wavelength_approx, "radar");
        detail::read_opt(r, "lambda", e.sparse.fista_lambda, "radar");
        detail::read_opt(r, "fista_tol", e.sparse.fista_tol, "radar");
        detail::read_opt(r, "amplitude_threshold", e.sparse.amplitude_threshold, "radar");
        detail::read_opt(r, "max_sparsity", e.sparse.max_sparsity, "radar");
        detail::read_opt(r, "max_iterations", e.max_iterations, "radar");
        detail::read_opt(r, "range_merge_cells", e.range_merge_cells, "radar");
        if (r.contains("solver")) {
            const auto v = r.at("solver").get<std::string>();
            if (v == "omp") e.sparse.solver = SparseSolver::Omp;
            else if (v == "fista") e.sparse.solver = SparseSolver::Fista;
            else throw ConfigError("radar.solver: expected omp or fista");
        }
        if (r.contains("snapshot_mode")) {
            const auto v = r.at("snapshot_mode").get<std::string>();
            if (v == "single") e.snapshot_mode = SnapshotMode::SingleSymbol;
            else if (v == "subspace") e.snapshot_mode = SnapshotMode::Subspace;
            else throw ConfigError("radar.snapshot_mode: expected single or subspace");
        }
        if (r.contains("angle_grid_step_deg")) {
            double step = 1.0;
            detail::read_opt(r, "angle_grid_step_deg", step, "radar");
            if (!(step > 0.0)) throw ConfigError("radar.angle_grid_step_deg must be > 0");
            e.angle_grid = angle_grid_deg(-90.0, 90.0, step);
        }
    }

    if (j.contains("monte_carlo")) {
        const Json& m = j.at("monte_carlo");
        detail::check_keys(m, {"sweep", "values", "num_targets", "num_private", "beta", "workers", "angle_deg", "range_m",
                               "speed_fraction", "min_angle_sep_deg"},
                           "monte_carlo");
        auto& mc = s.monte_carlo;
        if (m.contains("sweep")) mc.sweep = detail::parse_sweep(m.at("sweep").get<std::string>());
        detail::read_opt(m, "values", mc.values, "monte_carlo");
        detail::read_opt(m, "num_targets", mc.num_targets, "monte_carlo");
        detail::read_opt(m, "num_private", mc.num_private, "monte_carlo");
        if (m.contains("beta")) mc.beta = detail::parse_beta(m.at("beta").get<std::string>());
        detail::read_opt(m, "workers", mc.workers, "monte_carlo");
        if (m.contains("angle_deg")) {
            std::array<double, 2> a{};
            detail::read_opt(m, "angle_deg", a, "monte_carlo");
            mc.bounds.angle_min_deg = a[0];
            mc.bounds.angle_max_deg = a[1];
        }
        if (m.contains("range_m")) {
            std::array<double, 2> a{};
            detail::read_opt(m, "range_m", a, "monte_carlo");
            mc.bounds.range_min_m = a[0];
            mc.bounds.range_max_m = a[1];
        }
        detail::read_opt(m, "speed_fraction", mc.bounds.speed_fraction, "monte_carlo");
        detail::read_opt(m, "min_angle_sep_deg", mc.bounds.min_angle_sep_deg, "monte_carlo");
        if (mc.workers < 1) throw ConfigError("monte_carlo.workers must be >= 1");
    }
    s.validate();
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
    try {
        return scenario_from_json(j, path.parent_path());
    } catch (const Json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Echo of the effective scenario for manifests.
inline Json scenario_to_json(const Scenario& s) {
    Json targets = Json::array();
    for (const auto& t : s.targets) targets.push_back(target_to_json(t));
    return {{"system", system_config_to_json(s.cfg)},
            {"targets", targets},
            {"radar_snr_db", s.radar_snr_db},
            {"comm_snr_db", s.comm_snr_db},
            {"trials", s.trials},
            {"num_scatterers", s.num_scatterers}};
}

// ---------------------------------------------------------------------------
// Building blocks

/// One frame per OFDM symbol with bits drawn from (seed, Bits, mu).
inline std::vector<SymbolFrame> generate_frames(const SystemConfig& cfg, const CMat& precoder, std::uint64_t seed) {
    std::vector<SymbolFrame> frames;
    frames.reserve(cfg.num_ofdm_symbols);
    const std::size_t nbits = bits_per_ofdm_symbol(cfg);
    for (std::size_t mu = 0; mu < cfg.num_ofdm_symbols; ++mu) {
        Rng rng(derive_seed(seed, Stream::Bits, {mu}));
        frames.push_back(build_symbol_frame(random_bits(rng, nbits), precoder, cfg, mu));
    }
    return frames;
}

/// Replaces target coefficients according to `mode`.
inline void assign_betas(std::vector<TargetRecord>& targets, BetaMode mode, std::uint64_t seed) {
    if (mode == BetaMode::Given) return;
    Rng rng(derive_seed(seed, Stream::TargetCoeffs));
    for (auto& t : targets) t.beta = mode == BetaMode::Unit ? cplx{1.0, 0.0} : complex_coefficient(rng, kCoeffMean, kCoeffVariance);
}

inline double target_range_limit(const SystemConfig& cfg, const TargetBounds& b) {
    if (b.range_max_m > 0.0) return b.range_max_m;
    return std::min(0.9 * resolutions(cfg).range_max_m, 0.9 * kSpeedOfLight * cfg.cp_duration_s / 2.0);
}

/// Uniform targets inside `b`; every pair is separated by more than one
/// resolution cell in at least one of angle, range and velocity.
inline std::vector<TargetRecord> random_targets(const SystemConfig& cfg, std::size_t count, const TargetBounds& b,
                                                std::uint64_t seed) {
    const Resolutions res = resolutions(cfg);
    const double r_hi = target_range_limit(cfg, b);
    if (!(r_hi > b.range_min_m)) throw std::invalid_argument("random_targets: empty range interval");
    Rng rng(derive_seed(seed, Stream::Targets));
    std::uniform_real_distribution<double> ang(b.angle_min_deg, b.angle_max_deg), rng_r(b.range_min_m, r_hi),
        vel(-b.speed_fraction * res.vel_max_mps, b.speed_fraction * res.vel_max_mps);
    std::vector<TargetRecord> out;
    for (std::size_t attempts = 0; out.size() < count; ++attempts) {
        if (attempts > 10000 * (count + 1)) throw std::runtime_error("random_targets: cannot place targets with the required separation");
        TargetRecord t;
        t.angle_rad = deg2rad(ang(rng));
        t.range_m = rng_r(rng);
        t.velocity_mps = vel(rng);
        const bool separated = std::all_of(out.begin(), out.end(), [&](const TargetRecord& o) {
            return std::abs(rad2deg(t.angle_rad - o.angle_rad)) > b.min_angle_sep_deg ||
                   std::abs(t.range_m - o.range_m) > res.range_res_m || std::abs(t.velocity_mps - o.velocity_mps) > res.vel_res_mps;
        });
        if (separated) out.push_back(t);
    }
    return out;
}

inline CMat load_precoder_file(const std::string& path, const SystemConfig& cfg) {
    const CMat p = decode_matrix(read_file(path));
    if (p.rows() != static_cast<Eigen::Index>(cfg.num_tx) || p.cols() != p.rows())
        throw ConfigError("precoder file " + path + " is not N_t x N_t");
    return p;
}

struct PrecoderDesign {
    CMat P;
    std::optional<PrecoderState> state;  // set when optimized
};

/// Identity, file or Adam-optimized precoder for the scenario's channel.
inline PrecoderDesign resolve_precoder(const Scenario& s, const CommChannel& ch, std::uint64_t seed) {
    const CMat eye = CMat::Identity(static_cast<Eigen::Index>(s.cfg.num_tx), static_cast<Eigen::Index>(s.cfg.num_tx));
    switch (s.precoder.source) {
        case PrecoderSource::Identity: return {eye, std::nullopt};
        case PrecoderSource::File: return {load_precoder_file(s.precoder.file, s.cfg), std::nullopt};
        case PrecoderSource::Optimize: {
            std::optional<CMat> source;
            if (s.precoder.instantaneous) source = generate_frames(s.cfg, eye, seed).front().source;
            const PrecoderObjective obj(s.precoder.spec, ch, s.cfg, s.precoder.alpha_b, s.precoder.alpha_snr, source);
            PrecoderState st = adam_optimize(eye, obj, s.precoder.adam);
            CMat p = st.P;
            return {p, std::move(st)};
        }
    }
    return {eye, std::nullopt};
}

// ---------------------------------------------------------------------------
// Matching

struct MatchTolerance {
    double angle_deg = 1.0;
    double range_m = 0.0;
    double velocity_mps = 0.0;
};

inline MatchTolerance default_tolerance(const SystemConfig& cfg) {
    const Resolutions r = resolutions(cfg);
    return {1.0, r.range_res_m, r.vel_res_mps};
}

struct MatchedPair {
    std::size_t truth = 0;
    std::size_t estimate = 0;
    double angle_err_deg = 0.0;
    double range_err_m = 0.0;
    double velocity_err_mps = 0.0;
    bool correct = false;
};

struct MatchResult {
    std::vector<MatchedPair> pairs;
    std::size_t correct = 0;
    std::size_t wrong = 0;   // estimates that are not a correct match
    std::size_t missed = 0;  // truths without a correct match
    bool all_correct() const { return missed == 0 && wrong == 0; }
};

/// Greedy nearest-neighbour assignment on tolerance-normalized distance,
/// then the per-parameter test on each assigned pair.
inline MatchResult match_targets(std::span<const TargetRecord> truth, std::span<const TargetEstimate> est,
                                 const MatchTolerance& tol, bool use_velocity = true) {
    struct Cand {
        double d;
        std::size_t t, e;
    };
    std::vector<Cand> cands;
    for (std::size_t t = 0; t < truth.size(); ++t)
        for (std::size_t e = 0; e < est.size(); ++e) {
            const double da = (est[e].angle_deg - rad2deg(truth[t].angle_rad)) / tol.angle_deg;
            const double dr = (est[e].range_m - truth[t].range_m) / tol.range_m;
            const double dv = use_velocity ? (est[e].velocity_mps - truth[t].velocity_mps) / tol.velocity_mps : 0.0;
            cands.push_back({da * da + dr * dr + dv * dv, t, e});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
    std::vector<char> t_used(truth.size(), 0), e_used(est.size(), 0);
    MatchResult out;
    for (const auto& c : cands) {
        if (t_used[c.t] || e_used[c.e]) continue;
        t_used[c.t] = e_used[c.e] = 1;
        MatchedPair p{c.t, c.e, est[c.e].angle_deg - rad2deg(truth[c.t].angle_rad), est[c.e].range_m - truth[c.t].range_m,
                      est[c.e].velocity_mps - truth[c.t].velocity_mps, false};
        p.correct = std::abs(p.angle_err_deg) <= tol.angle_deg && std::abs(p.range_err_m) <= tol.range_m &&
                    (!use_velocity || std::abs(p.velocity_err_mps) <= tol.velocity_mps);
        out.correct += p.correct;
        out.pairs.push_back(p);
    }
    out.wrong = est.size() - out.correct;
    out.missed = truth.size() - out.correct;
    return out;
}

// ---------------------------------------------------------------------------
// Single realization

struct RangeProfileRow {
    double look_angle_deg = 0.0;
    std::size_t index = 0;
    double range_m = 0.0;
    double magnitude = 0.0;
};

struct ScenarioResult {
    SystemConfig cfg;
    std::vector<TargetRecord> truth;
    EstimationResult estimation;
    MatchResult match;
    std::vector<RangeProfileRow> range_profiles;
    std::vector<std::string> notices;
    double noise_var = 0.0;
    double seconds = 0.0;
};

/// Range-profile magnitude for every coarse angle bin.
inline std::vector<RangeProfileRow> coarse_range_profiles(const RadarCube& cube, std::span<const SymbolFrame> frames,
                                                          const EstimationResult& est, const SystemConfig& cfg, std::size_t mu) {
    std::vector<RangeProfileRow> rows;
    for (const auto& bin : est.coarse_bins) {
        const Look look = Look::from_bin(bin);
        const CVec prof = range_profile(look_amplitudes(cube, look, mu, cfg), reference_amplitudes(frames[mu], look.angle_rad, cfg));
        for (Eigen::Index l = 0; l < prof.size(); ++l)
            rows.push_back({rad2deg(bin.angle_rad), static_cast<std::size_t>(l), range_of_index(static_cast<std::size_t>(l), cfg),
                            std::abs(prof[l])});
    }
    return rows;
}

/// Synthesize, estimate and match one realization with `seed`.
inline ScenarioResult run_scenario(const Scenario& s, std::uint64_t seed, const CMat* precoder = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    ScenarioResult out;
    out.cfg = s.cfg;
    out.cfg.rng_seed = seed;
    const SystemConfig& cfg = out.cfg;
    out.truth = s.targets;
    assign_betas(out.truth, s.beta, seed);
    for (const auto& t : out.truth) validate_target(t, cfg);

    const CMat eye = CMat::Identity(static_cast<Eigen::Index>(cfg.num_tx), static_cast<Eigen::Index>(cfg.num_tx));
    const CMat& P = precoder ? *precoder : eye;
    const auto frames = generate_frames(cfg, P, seed);

    RadarSynthesis syn;
    if (s.time_domain) {
        std::vector<TimeFrame> tx;
        tx.reserve(frames.size());
        for (const auto& f : frames) tx.push_back(ofdm_modulate(f, cfg));
        SystemConfig quiet = cfg;
        quiet.radar_noise_var = 0.0;
        syn.cube = radar_cube_from_time(synthesize_radar_time(out.truth, tx, quiet), cfg);
        syn.noise_var = noise_var_for_snr(syn.cube, s.radar_snr_db);
        add_radar_noise(syn.cube, syn.noise_var, seed);
    } else {
        syn = synthesize_radar_at_snr(out.truth, frames, cfg, s.radar_snr_db);
    }
    out.noise_var = syn.noise_var;

    EstimatorParams ep = s.estimator;
    ep.noise_var = syn.noise_var;
    out.estimation = iterative_angle_range(syn.cube, frames, cfg, ep);
    if (cfg.private_set.empty()) out.notices.push_back("no private subcarriers: refinement skipped, coarse estimates reported");
    out.range_profiles = coarse_range_profiles(syn.cube, frames, out.estimation, cfg, ep.symbol);
    out.match = match_targets(out.truth, out.estimation.estimates, default_tolerance(cfg));
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Writes estimates.json, range_profile.csv and iterations.jsonl; returns the paths.
inline std::vector<std::filesystem::path> write_scenario_outputs(const ScenarioResult& r, const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    Json est = Json::array();
    for (const auto& e : r.estimation.estimates) est.push_back(estimate_to_json(e));
    Json doc = {{"estimates", est},
                {"iterations", r.estimation.iterations},
                {"converged", r.estimation.converged},
                {"notices", r.notices}};
    write_file(dir / "estimates.json", doc.dump(2) + "\n");
    files.push_back(dir / "estimates.json");

    CsvTable prof({"look_angle_deg", "range_index", "range_m", "magnitude"});
    for (const auto& row : r.range_profiles) prof.row(row.look_angle_deg, row.index, row.range_m, row.magnitude);
    prof.write(dir / "range_profile.csv");
    files.push_back(dir / "range_profile.csv");

    std::string lines;
    for (const auto& rec : r.estimation.log) lines += iteration_to_json(rec).dump() + "\n";
    write_file(dir / "iterations.jsonl", lines);
    files.push_back(dir / "iterations.jsonl");
    return files;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct McSummary {
    SweepVariable variable = SweepVariable::NumPrivate;
    double value = 0.0;
    std::size_t trials = 0;
    double detection_probability = 0.0;
    double wrong_ratio = 0.0;   // wrong estimates per true target
    double missed_ratio = 0.0;  // missed targets per true target
    double angle_mse_deg2 = 0.0;
    double coarse_angle_mse_deg2 = 0.0;
    double range_mse_m2 = 0.0;
    double doppler_mse_m2s2 = 0.0;
    double mean_iterations = 0.0;
    double bit_rate = 0.0;
    double rate_loss = 0.0;
    std::size_t numerical_failures = 0;
};

struct TrialOutcome {
    bool all_correct = false;
    std::size_t wrong = 0, missed = 0, truths = 0;
    double angle_se = 0.0, range_se = 0.0, doppler_se = 0.0;
    std::size_t matched = 0;
    double coarse_angle_se = 0.0;
    std::size_t coarse_matched = 0;
    std::size_t iterations = 0;
    bool failed = false;
};

/// Scenario configuration for one sweep value.
inline Scenario sweep_point(const Scenario& base, double value) {
    Scenario s = base;
    const auto& mc = base.monte_carlo;
    switch (mc.sweep) {
        case SweepVariable::NumPrivate:
            s.cfg.private_set = default_private_set(static_cast<std::size_t>(std::llround(value)));
            break;
        case SweepVariable::SnrDb:
            s.radar_snr_db = value;
            s.cfg.private_set = default_private_set(std::min(mc.num_private, s.cfg.num_tx));
            break;
        case SweepVariable::NumTx:
            s.cfg.num_tx = static_cast<std::size_t>(std::llround(value));
            s.cfg.private_set = default_private_set(std::min(mc.num_private, s.cfg.num_tx));
            break;
    }
    s.cfg.validate();
    return s;
}

inline TrialOutcome run_trial(const Scenario& point, std::uint64_t trial_seed) {
    const auto& mc = point.monte_carlo;
    Scenario s = point;
    s.targets = random_targets(s.cfg, mc.num_targets, mc.bounds, trial_seed);
    s.beta = mc.beta;
    TrialOutcome o;
    o.truths = s.targets.size();
    ScenarioResult r;
    try {
        r = run_scenario(s, trial_seed);
    } catch (const NumericalError&) {
        o.failed = true;
        o.missed = o.truths;
        return o;
    }
    o.all_correct = r.match.all_correct();
    o.wrong = r.match.wrong;
    o.missed = r.match.missed;
    o.iterations = r.estimation.iterations;
    for (const auto& p : r.match.pairs) {
        o.angle_se += p.angle_err_deg * p.angle_err_deg;
        o.range_se += p.range_err_m * p.range_err_m;
        o.doppler_se += p.velocity_err_mps * p.velocity_err_mps;
        ++o.matched;
    }
    const MatchResult coarse = match_targets(r.truth, r.estimation.coarse_estimates, default_tolerance(r.cfg));
    for (const auto& p : coarse.pairs) {
        o.coarse_angle_se += p.angle_err_deg * p.angle_err_deg;
        ++o.coarse_matched;
    }
    return o;
}

/// Runs `trials` realizations per sweep value. Trial t uses the child seed
/// derive_seed(seed, Trial, {t}) at every sweep value, so the target draws
/// are shared across the sweep. Results do not depend on the worker count.
inline std::vector<McSummary> run_monte_carlo(const Scenario& base, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("run_monte_carlo: trials must be >= 1");
    std::vector<McSummary> out;
    for (double value : base.monte_carlo.values) {
        const Scenario point = sweep_point(base, value);
        std::vector<TrialOutcome> outcomes(trials);
        const std::size_t workers = std::max<std::size_t>(1, std::min(base.monte_carlo.workers, trials));
        std::vector<std::exception_ptr> errors(workers);
        auto work = [&](std::size_t w) {
            try {
                for (std::size_t t = w; t < trials; t += workers)
                    outcomes[t] = run_trial(point, derive_seed(seed, Stream::Trial, {t}));
            } catch (...) {
                errors[w] = std::current_exception();
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
            for (auto& th : pool) th.join();
        }
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);

        McSummary m;
        m.variable = base.monte_carlo.sweep;
        m.value = value;
        m.trials = trials;
        std::size_t ok = 0, wrong = 0, missed = 0, truths = 0, matched = 0, cmatched = 0, iters = 0;
        double a = 0, ca = 0, r = 0, d = 0;
        for (const auto& o : outcomes) {
            ok += o.all_correct;
            wrong += o.wrong;
            missed += o.missed;
            truths += o.truths;
            matched += o.matched;
            cmatched += o.coarse_matched;
            iters += o.iterations;
            a += o.angle_se;
            ca += o.coarse_angle_se;
            r += o.range_se;
            d += o.doppler_se;
            m.numerical_failures += o.failed;
        }
        const double nt = static_cast<double>(trials);
        m.detection_probability = static_cast<double>(ok) / nt;
        m.wrong_ratio = truths ? static_cast<double>(wrong) / static_cast<double>(truths) : 0.0;
        m.missed_ratio = truths ? static_cast<double>(missed) / static_cast<double>(truths) : 0.0;
        m.angle_mse_deg2 = matched ? a / static_cast<double>(matched) : 0.0;
        m.range_mse_m2 = matched ? r / static_cast<double>(matched) : 0.0;
        m.doppler_mse_m2s2 = matched ? d / static_cast<double>(matched) : 0.0;
        m.coarse_angle_mse_deg2 = cmatched ? ca / static_cast<double>(cmatched) : 0.0;
        m.mean_iterations = static_cast<double>(iters) / nt;
        SystemConfig shared_only = point.cfg;
        shared_only.private_set.clear();
        m.bit_rate = bit_rate(point.cfg);
        m.rate_loss = bit_rate(shared_only) - m.bit_rate;
        out.push_back(m);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plot data

enum class PlotKind { Beampattern, RangeProfile, BerCurve, MseCurve, Tradeoff };

inline PlotKind parse_plot_kind(const std::string& s) {
    if (s == "beampattern") return PlotKind::Beampattern;
    if (s == "range_profile") return PlotKind::RangeProfile;
    if (s == "ber_curve") return PlotKind::BerCurve;
    if (s == "mse_curve") return PlotKind::MseCurve;
    if (s == "tradeoff") return PlotKind::Tradeoff;
    throw std::invalid_argument("emit_plot_data: unknown kind '" + s + "'");
}

inline const char* to_string(PlotKind k) {
    switch (k) {
        case PlotKind::Beampattern: return "beampattern";
        case PlotKind::RangeProfile: return "range_profile";
        case PlotKind::BerCurve: return "ber_curve";
        case PlotKind::MseCurve: return "mse_curve";
        case PlotKind::Tradeoff: return "tradeoff";
    }
    return "?";
}

struct PlotData {
    std::vector<std::pair<double, double>> beampattern;  // (angle_deg, linear power)
    std::vector<RangeProfileRow> range_profile;
    std::vector<BerPoint> ber;
    std::vector<McSummary> mse;       // SNR sweep
    std::vector<McSummary> tradeoff;  // M sweep
};

inline CsvTable plot_table(const PlotData& d, PlotKind kind) {
    switch (kind) {
        case PlotKind::Beampattern: {
            CsvTable t({"angle_deg", "power_linear", "power_db"});
            for (const auto& [a, p] : d.beampattern) t.row(a, p, 10.0 * std::log10(std::max(p, 1e-300)));
            return t;
        }
        case PlotKind::RangeProfile: {
            CsvTable t({"look_angle_deg", "range_index", "range_m", "magnitude"});
            for (const auto& r : d.range_profile) t.row(r.look_angle_deg, r.index, r.range_m, r.magnitude);
            return t;
        }
        case PlotKind::BerCurve: {
            CsvTable t({"snr_db", "n_tx", "class", "ber"});
            for (const auto& p : d.ber) {
                t.row(p.snr_db, p.num_tx, "shared", p.counts.shared_ber());
                if (p.counts.private_bits) t.row(p.snr_db, p.num_tx, "private", p.counts.private_ber());
            }
            return t;
        }
        case PlotKind::MseCurve: {
            CsvTable t({"snr_db", "angle_mse_ssr_deg2", "angle_mse_coarse_deg2", "range_mse_m2", "doppler_mse_m2s2"});
            for (const auto& m : d.mse) t.row(m.value, m.angle_mse_deg2, m.coarse_angle_mse_deg2, m.range_mse_m2, m.doppler_mse_m2s2);
            return t;
        }
        case PlotKind::Tradeoff: {
            CsvTable t({"num_private", "detection_probability", "wrong_ratio", "missed_ratio", "mean_iterations", "bit_rate_bps",
                        "rate_loss_bps"});
            for (const auto& m : d.tradeoff)
                t.row(m.value, m.detection_probability, m.wrong_ratio, m.missed_ratio, m.mean_iterations, m.bit_rate, m.rate_loss);
            return t;
        }
    }
    throw std::invalid_argument("emit_plot_data: unknown kind");
}

/// Writes <dir>/<kind>.csv and returns its path.
inline std::filesystem::path emit_plot_data(const PlotData& d, const std::string& kind, const std::filesystem::path& dir) {
    const PlotKind k = parse_plot_kind(kind);
    const auto path = dir / (std::string(to_string(k)) + ".csv");
    plot_table(d, k).write(path);
    return path;
}

}  // namespace ssdfrc
