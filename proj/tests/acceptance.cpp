// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. Each criterion prints its checks followed by one
// "PASS <name>" or "FAIL <name>" line. Exit status is non-zero when any
// selected criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "ssdfrc/ssdfrc.hpp"

using namespace ssdfrc;

namespace {

struct Checker {
    bool ok = true;
    void check(bool cond, const std::string& what) {
        std::printf("  [%s] %s\n", cond ? "ok" : "FAILED", what.c_str());
        ok = ok && cond;
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CMat gaussian_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    CMat m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = complex_gaussian(rng, 1.0);
    return m;
}

// ---------------------------------------------------------------------------

bool four_target_fixture() {
    Checker c;
    Scenario s;
    s.cfg = SystemConfig::reference(8, 8);
    s.radar_snr_db = 15.0;
    s.beta = BetaMode::Unit;
    s.targets = {{deg2rad(-43.0), 50.0, 13.0, {1.0, 0.0}},
                 {deg2rad(-43.0), 80.0, 20.0, {1.0, 0.0}},
                 {deg2rad(-46.0), 45.0, -10.0, {1.0, 0.0}},
                 {deg2rad(-48.0), 100.0, 10.0, {1.0, 0.0}}};
    const auto t0 = std::chrono::steady_clock::now();
    const ScenarioResult r = run_scenario(s, 1);
    const double secs = elapsed_since(t0);
    const auto& est = r.estimation;

    c.check(est.coarse_bins.size() == 2, fmt("coarse bins found: %zu (expected 2)", est.coarse_bins.size()));
    std::vector<double> coarse;
    for (const auto& b : est.coarse_bins) coarse.push_back(rad2deg(b.angle_rad));
    std::sort(coarse.begin(), coarse.end());
    const std::vector<double> coarse_ref{-48.59, -43.43};
    for (std::size_t k = 0; k < coarse_ref.size(); ++k) {
        const double got = k < coarse.size() ? coarse[k] : NAN;
        c.check(std::abs(got - coarse_ref[k]) <= 0.01, fmt("coarse angle %.4f deg vs %.2f deg (tol 0.01)", got, coarse_ref[k]));
    }

    // Expected (angle, range bin, reference range, reference velocity).
    struct Ref {
        double angle;
        std::size_t bin;
        double range;
        double velocity;
    };
    const std::vector<Ref> refs{{-43, 43, 50.39, 12.21}, {-43, 68, 79.69, 21.36}, {-46, 38, 44.53, -9.16}, {-48, 85, 99.61, 9.16}};
    const double cell = 0.6104;
    c.check(est.estimates.size() == refs.size(), fmt("refined estimates: %zu (expected 4)", est.estimates.size()));
    std::set<double> angles;
    for (const auto& e : est.estimates) angles.insert(e.angle_deg);
    c.check(angles == std::set<double>{-48.0, -46.0, -43.0}, "refined angle set is {-48, -46, -43} deg");
    for (const auto& ref : refs) {
        const TargetEstimate* hit = nullptr;
        for (const auto& e : est.estimates)
            if (std::abs(e.angle_deg - ref.angle) < 1e-9 && e.range_index == ref.bin) hit = &e;
        c.check(hit != nullptr, fmt("pair (%.0f deg, bin %zu) present", ref.angle, ref.bin));
        if (!hit) continue;
        c.check(std::abs(hit->range_m - ref.range) <= 1e-3 * ref.range,
                fmt("  range %.4f m vs %.2f m (grid value, 0.1%% for the speed-of-light constant)", hit->range_m, ref.range));
        c.check(std::abs(hit->velocity_mps - ref.velocity) <= cell,
                fmt("  velocity %.3f m/s vs %.2f m/s (tol %.4f)", hit->velocity_mps, ref.velocity, cell));
        c.check(hit->provenance == Provenance::SsrRefined, "  provenance ssr-refined");
    }
    c.check(est.converged && est.iterations <= 3, fmt("converged in %zu SSR solves (<= 3)", est.iterations));
    c.check(secs < 60.0, fmt("wall clock %.2f s (< 60 s)", secs));
    return c.ok;
}

bool resolution_formulas() {
    Checker c;
    const auto r = resolutions(SystemConfig::reference());
    auto rel = [&](double got, double want, const char* name) {
        c.check(std::abs(got - want) <= 1e-3 * want, fmt("%s = %.6g vs %.6g (0.1%%)", name, got, want));
    };
    rel(r.range_res_m, 1.171875, "range_res_m");
    rel(r.range_max_m, 599.58, "range_max_m");
    rel(r.vel_res_mps, 4.8828, "vel_res_mps");
    rel(r.vel_max_mps, 1249.9, "vel_max_mps");
    return c.ok;
}

bool rate_accounting() {
    Checker c;
    const double full = bit_rate(SystemConfig::reference(16, 0));
    const auto exact = [](double x, double want) { return std::abs(x - want) <= 1e-12 * want; };
    c.check(exact(full, 3.2768e9), fmt("bit rate N_t = 16, M = 0: %.10g b/s (exact up to rounding)", full));
    for (std::size_t nt : {16u, 8u}) {
        const double want = nt == 16 ? 6.0e6 : 2.8e6;
        bool all = true;
        for (std::size_t m = 1; m <= nt; ++m) {
            const double loss = bit_rate(SystemConfig::reference(nt, m - 1)) - bit_rate(SystemConfig::reference(nt, m));
            all = all && std::abs(loss - want) <= 1e-9 * want;
        }
        c.check(all, fmt("per-private loss N_t = %zu: %.6g b/s for every M", nt, rate_loss_per_private(SystemConfig::reference(nt))));
        c.check(exact(rate_loss_per_private(SystemConfig::reference(nt)), want), "  closed form exact up to rounding");
    }
    return c.ok;
}

bool synthesis_oracle() {
    Checker c;
    auto cfg = SystemConfig::reference(16, 0);
    cfg.num_ofdm_symbols = 4;
    const CMat eye = CMat::Identity(16, 16);
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 20; ++k) {
        Rng rng(derive_seed(2024, {k}));
        std::uniform_real_distribution<double> ang(-60.0, 60.0), rr(5.0, 140.0);
        std::uniform_int_distribution<int> count(1, 3);
        std::vector<TargetRecord> ts(static_cast<std::size_t>(count(rng)));
        for (auto& t : ts) {
            t.angle_rad = deg2rad(ang(rng));
            t.range_m = rr(rng);
            t.beta = complex_gaussian(rng, 1.0);
        }
        const auto frames = generate_frames(cfg, eye, k);
        std::vector<TimeFrame> tx;
        for (const auto& f : frames) tx.push_back(ofdm_modulate(f, cfg));
        const RadarCube a = radar_cube_from_time(synthesize_radar_time(ts, tx, cfg), cfg);
        const RadarCube b = synthesize_radar_noiseless(ts, frames, cfg);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < a.data().size(); ++i) {
            num += std::norm(a.data()[i] - b.data()[i]);
            den += std::norm(b.data()[i]);
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    c.check(worst < 1e-6, fmt("worst relative difference over 20 scenarios: %.3e (< 1e-6)", worst));
    return c.ok;
}

bool gradient_oracle() {
    Checker c;
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 20; ++k) {
        Rng rng(derive_seed(77, {k}));
        auto cfg = SystemConfig::reference(8, k % 4);
        cfg.num_subcarriers = 64;
        cfg.num_comm_rx = 16;
        const auto ch = draw_comm_channel(cfg, {}, 32, k);
        BeampatternSpec spec = BeampatternSpec::bands({{-30.0, -10.0}, {20.0, 25.0}}, -90.0, 90.0, 2.0);
        std::uniform_real_distribution<double> w(0.5, 2.0);
        for (auto& x : spec.weights) x = w(rng);
        std::optional<CMat> source;
        if (k % 2) source = gaussian_matrix(rng, 8, 64);
        const PrecoderObjective obj(spec, ch, cfg, 0.01 * w(rng), w(rng), source);
        const CMat P = gaussian_matrix(rng, 8, 8);
        const CMat g = obj.evaluate(P).gradient;
        CMat fd(8, 8);
        const double h = 1e-6;
        for (Eigen::Index e = 0; e < P.size(); ++e) {
            double parts[2];
            for (int part = 0; part < 2; ++part) {
                CMat plus = P, minus = P;
                const cplx d = part == 0 ? cplx(h, 0.0) : cplx(0.0, h);
                plus.data()[e] += d;
                minus.data()[e] -= d;
                parts[part] = (obj.evaluate(plus, false).loss - obj.evaluate(minus, false).loss) / (2.0 * h);
            }
            fd.data()[e] = {parts[0], parts[1]};
        }
        worst = std::max(worst, (fd - g).norm() / g.norm());
    }
    c.check(worst < 1e-5, fmt("worst relative gradient error over 20 instances: %.3e (< 1e-5)", worst));

    const auto cfg = SystemConfig::reference(16, 8);
    const auto ch = draw_comm_channel(cfg, {}, 32, 5);
    const auto spec = BeampatternSpec::default_spec();
    const PrecoderObjective obj(spec, ch, cfg, 1e-4, 0.8);
    AdamParams ap;
    ap.learning_rates = {0.02};
    ap.steps = 150;
    const CMat eye = CMat::Identity(16, 16);
    const auto st = adam_optimize(eye, obj, ap);
    const double l0 = obj.evaluate(eye, false).loss, l1 = obj.evaluate(st.P, false).loss;
    c.check(l1 < l0, fmt("loss %.6g -> %.6g after 150 Adam steps", l0, l1));
    const double r0 = band_power_ratio(beampattern(eye, cfg, spec.angles_rad), spec);
    const double r1 = band_power_ratio(beampattern(st.P, cfg, spec.angles_rad), spec);
    c.check(r1 > r0, fmt("in-band / out-of-band power ratio %.4g -> %.4g", r0, r1));
    return c.ok;
}

bool comm_ber() {
    Checker c;
    for (std::size_t nt : {8u, 16u}) {
        bool clean = true;
        for (std::size_t m = 0; m <= nt; ++m) {
            const auto cfg = SystemConfig::reference(nt, m);
            const auto ch = draw_comm_channel(cfg, {}, 32, 100 + m);
            Rng rng(derive_seed(3, {nt, m}));
            const CMat P = gaussian_matrix(rng, static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nt));
            const FrameDecoder dec(ch, P, cfg, cfg.private_set, P.norm());
            for (int t = 0; t < 3; ++t) {
                const Bits bits = random_bits(rng, bits_per_ofdm_symbol(cfg));
                const auto frame = build_symbol_frame(bits, P, cfg, 0);
                clean = clean && ber(bits, dec.decode(apply_comm_channel(ch, frame, 0.0, 0)).bits) == 0.0;
            }
        }
        c.check(clean, fmt("noiseless BER = 0 for N_t = %zu and every M in 0..%zu", nt, nt));
    }

    const std::vector<double> snr{-10, -5, 0, 5, 10};
    for (std::size_t nt : {8u, 16u}) {
        auto cfg = SystemConfig::reference(nt, 8);
        cfg.num_subcarriers = 128;  // trial count is what matters here
        cfg.subcarrier_spacing_hz = 0.25e6;
        const auto ch = draw_comm_channel(cfg, {}, 32, 11);
        const CMat eye = CMat::Identity(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(nt));
        const auto pts = simulate_ber(cfg, ch, eye, snr, 500, 21);
        std::string line;
        int inversions = 0;
        bool small = true, private_ok = true;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            const double sh = pts[k].counts.shared_ber(), pr = pts[k].counts.private_ber();
            line += fmt(" %g dB: shared %.3e private %.3e;", snr[k], sh, pr);
            private_ok = private_ok && pr <= sh;
            if (k > 0) {
                const double prev = pts[k - 1].counts.total_ber(), cur = pts[k].counts.total_ber();
                if (cur > prev) {
                    ++inversions;
                    small = small && (cur - prev) <= 0.1 * prev;
                }
            }
        }
        std::printf("  N_t = %zu:%s\n", nt, line.c_str());
        c.check(inversions == 0 || (inversions == 1 && small),
                fmt("N_t = %zu BER non-increasing in SNR (%d inversions)", nt, inversions));
        c.check(private_ok, fmt("N_t = %zu private BER <= shared BER at every SNR", nt));
    }
    return c.ok;
}

bool monte_carlo_trends() {
    Checker c;
    // Reduced frame size keeps the 500-trial sweeps tractable; the
    // estimator and its parameters are unchanged.
    Scenario base;
    base.cfg = SystemConfig::reference(16, 8);
    base.cfg.num_subcarriers = 128;
    base.cfg.num_ofdm_symbols = 32;
    base.radar_snr_db = 15.0;
    base.monte_carlo.workers = std::max(1u, std::thread::hardware_concurrency());

    Scenario sweep_m = base;
    sweep_m.monte_carlo.sweep = SweepVariable::NumPrivate;
    sweep_m.monte_carlo.values = {1, 2, 3, 4, 5, 6, 7, 8};
    sweep_m.monte_carlo.num_targets = 6;
    const auto t0 = std::chrono::steady_clock::now();
    const auto by_m = run_monte_carlo(sweep_m, 100, 31);
    std::string line;
    bool monotone = true, iters = true;
    for (std::size_t k = 0; k < by_m.size(); ++k) {
        line += fmt(" M=%g: Pd %.2f it %.2f;", by_m[k].value, by_m[k].detection_probability, by_m[k].mean_iterations);
        if (k > 0) monotone = monotone && by_m[k].detection_probability >= by_m[k - 1].detection_probability;
        iters = iters && by_m[k].mean_iterations <= 1.5;
    }
    std::printf(" %s (%.0f s)\n", line.c_str(), elapsed_since(t0));
    c.check(monotone, "detection probability non-decreasing in M over 1..8 (100 trials per M)");
    c.check(iters, "mean iterations <= 1.5 at every M");

    Scenario sweep_snr = base;
    sweep_snr.monte_carlo.sweep = SweepVariable::SnrDb;
    sweep_snr.monte_carlo.values = {0, 5, 10, 15};
    sweep_snr.monte_carlo.num_targets = 1;
    sweep_snr.monte_carlo.num_private = 8;
    const auto t1 = std::chrono::steady_clock::now();
    const auto by_snr = run_monte_carlo(sweep_snr, 500, 32);
    double r_lo = INFINITY, r_hi = 0.0, d_lo = INFINITY, d_hi = 0.0;
    for (const auto& m : by_snr) {
        std::printf("  SNR %g dB: angle MSE ssr %.4g coarse %.4g deg^2, range MSE %.4g m^2, Doppler MSE %.4g (m/s)^2\n", m.value,
                    m.angle_mse_deg2, m.coarse_angle_mse_deg2, m.range_mse_m2, m.doppler_mse_m2s2);
        c.check(m.angle_mse_deg2 < m.coarse_angle_mse_deg2, fmt("  SSR angle MSE below coarse at %g dB", m.value));
        r_lo = std::min(r_lo, m.range_mse_m2);
        r_hi = std::max(r_hi, m.range_mse_m2);
        d_lo = std::min(d_lo, m.doppler_mse_m2s2);
        d_hi = std::max(d_hi, m.doppler_mse_m2s2);
    }
    std::printf("  (%.0f s)\n", elapsed_since(t1));
    const double r_span = 10.0 * std::log10(r_hi / r_lo), d_span = 10.0 * std::log10(d_hi / d_lo);
    c.check(r_span < 3.0, fmt("range MSE spread %.2f dB (< 3 dB)", r_span));
    c.check(d_span < 3.0, fmt("Doppler MSE spread %.2f dB (< 3 dB)", d_span));
    return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<bool()>>> criteria{
        {"four_target_fixture", four_target_fixture},   {"resolution_formulas", resolution_formulas},
        {"rate_accounting", rate_accounting}, {"synthesis_oracle", synthesis_oracle},
        {"gradient_oracle", gradient_oracle}, {"comm_ber", comm_ber},
        {"monte_carlo_trends", monte_carlo_trends},
    };
    std::set<std::string> only;
    for (int k = 1; k < argc; ++k) {
        const std::string a = argv[k];
        if (a == "--only" && k + 1 < argc) {
            only.insert(argv[++k]);
        } else if (a == "--list") {
            for (const auto& [name, fn] : criteria) std::printf("%s\n", name.c_str());
            return 0;
        } else {
            std::fprintf(stderr, "usage: acceptance [--list] [--only <criterion>]...\n");
            return 2;
        }
    }
    for (const auto& name : only)
        if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& p) { return p.first == name; })) {
            std::fprintf(stderr, "unknown criterion '%s'\n", name.c_str());
            return 2;
        }
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && !only.count(name)) continue;
        std::printf("%s\n", name.c_str());
        bool ok = false;
        try {
            ok = fn();
        } catch (const std::exception& e) {
            std::printf("  [FAILED] exception: %s\n", e.what());
        }
        std::printf("%s %s\n", ok ? "PASS" : "FAIL", name.c_str());
        std::fflush(stdout);
        failed += !ok;
    }
    return failed ? 1 : 0;
}
