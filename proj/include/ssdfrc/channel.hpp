// SPDX-License-Identifier: Apache-2.0
//
// Radar echo synthesis (closed-form post-DFT model and a time-domain
// reference path) and the multipath communication channel.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "fft.hpp"
#include "rng.hpp"
#include "waveform.hpp"

namespace ssdfrc {

struct TargetRecord {
    double angle_rad = 0.0;
    double range_m = 0.0;
    double velocity_mps = 0.0;
    cplx beta{1.0, 0.0};

    double doppler_hz(const SystemConfig& cfg) const {
        return 2.0 * velocity_mps * cfg.carrier_freq_hz / kSpeedOfLight;
    }
};

/// Checks a target against the unambiguous region of `cfg`.
inline void validate_target(const TargetRecord& t, const SystemConfig& cfg) {
    const auto res = resolutions(cfg);
    if (!(std::abs(t.angle_rad) < kPi / 2)) throw std::invalid_argument("target angle outside (-90, 90) degrees");
    if (!(t.range_m >= 0.0 && t.range_m < res.range_max_m)) throw std::invalid_argument("target range outside [0, R_max)");
    if (!(std::abs(t.velocity_mps) < res.vel_max_mps / 2)) throw std::invalid_argument("target velocity beyond v_max / 2");
}

/// Frequency-domain radar data d_r(m, i, mu), N_r x N_s x N_p, stored with
/// the receive-antenna index fastest.
class RadarCube {
public:
    RadarCube() = default;
    RadarCube(std::size_t num_rx, std::size_t num_subcarriers, std::size_t num_symbols)
        : nr_(num_rx), ns_(num_subcarriers), np_(num_symbols), data_(num_rx * num_subcarriers * num_symbols) {}

    std::size_t num_rx() const { return nr_; }
    std::size_t num_subcarriers() const { return ns_; }
    std::size_t num_symbols() const { return np_; }

    cplx& operator()(std::size_t m, std::size_t i, std::size_t mu) { return data_[(mu * ns_ + i) * nr_ + m]; }
    const cplx& operator()(std::size_t m, std::size_t i, std::size_t mu) const { return data_[(mu * ns_ + i) * nr_ + m]; }

    /// Receive-array snapshot for subcarrier i of symbol mu.
    Eigen::Map<const CVec> snapshot(std::size_t i, std::size_t mu) const {
        return {&data_[(mu * ns_ + i) * nr_], static_cast<Eigen::Index>(nr_)};
    }
    Eigen::Map<CVec> snapshot(std::size_t i, std::size_t mu) {
        return {&data_[(mu * ns_ + i) * nr_], static_cast<Eigen::Index>(nr_)};
    }

    std::span<const cplx> data() const { return data_; }
    std::span<cplx> data() { return data_; }

    double mean_power() const {
        double acc = 0.0;
        for (const auto& v : data_) acc += std::norm(v);
        return data_.empty() ? 0.0 : acc / static_cast<double>(data_.size());
    }

    RadarCube& operator+=(const RadarCube& other) {
        if (other.nr_ != nr_ || other.ns_ != ns_ || other.np_ != np_)
            throw std::invalid_argument("RadarCube: dimension mismatch");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
        return *this;
    }

private:
    std::size_t nr_ = 0, ns_ = 0, np_ = 0;
    std::vector<cplx> data_;
};

/// Adds white complex Gaussian noise of variance `noise_var`; the stream for
/// (mu, m) is derived from `seed` so the result does not depend on order.
inline void add_radar_noise(RadarCube& cube, double noise_var, std::uint64_t seed) {
    if (noise_var <= 0.0) return;
    std::normal_distribution<double> n(0.0, std::sqrt(noise_var / 2.0));
    for (std::size_t mu = 0; mu < cube.num_symbols(); ++mu) {
        for (std::size_t m = 0; m < cube.num_rx(); ++m) {
            Rng rng(derive_seed(seed, Stream::RadarNoise, {mu, m}));
            n.reset();
            for (std::size_t i = 0; i < cube.num_subcarriers(); ++i) {
                const double re = n(rng);
                const double im = n(rng);
                cube(m, i, mu) += cplx{re, im};
            }
        }
    }
}

namespace detail {
inline void check_frames(std::span<const SymbolFrame> frames, const SystemConfig& cfg) {
    if (frames.size() != cfg.num_ofdm_symbols)
        throw std::invalid_argument("radar synthesis: expected one SymbolFrame per OFDM symbol");
    for (const auto& f : frames)
        if (f.transmit.rows() != static_cast<Eigen::Index>(cfg.num_tx) ||
            f.transmit.cols() != static_cast<Eigen::Index>(cfg.num_subcarriers))
            throw std::invalid_argument("radar synthesis: frame dimensions do not match configuration");
}
}  // namespace detail

/// Noiseless evaluation of the post-DFT echo model.
inline RadarCube synthesize_radar_noiseless(std::span<const TargetRecord> targets, std::span<const SymbolFrame> frames,
                                            const SystemConfig& cfg) {
    detail::check_frames(frames, cfg);
    const std::size_t nr = cfg.num_radar_rx, ns = cfg.num_subcarriers, np = cfg.num_ofdm_symbols;
    RadarCube cube(nr, ns, np);
    for (const auto& t : targets) {
        validate_target(t, cfg);
        const double fd = t.doppler_hz(cfg);
        // Per-subcarrier steering and range phase are shared by all symbols.
        CMat at(static_cast<Eigen::Index>(cfg.num_tx), static_cast<Eigen::Index>(ns));
        CMat ar(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(ns));
        std::vector<cplx> range_phase(ns);
        for (std::size_t i = 0; i < ns; ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            at.col(col) = steering_vector(ArrayKind::Tx, t.angle_rad, i, cfg);
            ar.col(col) = steering_vector(ArrayKind::RadarRx, t.angle_rad, i, cfg);
            range_phase[i] = std::polar(1.0, -2.0 * kPi * static_cast<double>(i) * cfg.subcarrier_spacing_hz *
                                                 2.0 * t.range_m / kSpeedOfLight);
        }
        for (std::size_t mu = 0; mu < np; ++mu) {
            const cplx dopp = t.beta * std::polar(1.0, 2.0 * kPi * static_cast<double>(mu) * cfg.ofdm_symbol_duration_s * fd);
            const CMat& d = frames[mu].transmit;
            for (std::size_t i = 0; i < ns; ++i) {
                const auto col = static_cast<Eigen::Index>(i);
                const cplx amp = dopp * range_phase[i] * (at.col(col).array() * d.col(col).array()).sum();
                cube.snapshot(i, mu) += amp * ar.col(col);
            }
        }
    }
    return cube;
}

/// d_r(m, i, mu) with white noise of variance cfg.radar_noise_var drawn from
/// the master seed cfg.rng_seed.
inline RadarCube synthesize_radar_freq(std::span<const TargetRecord> targets, std::span<const SymbolFrame> frames,
                                       const SystemConfig& cfg) {
    RadarCube cube = synthesize_radar_noiseless(targets, frames, cfg);
    add_radar_noise(cube, cfg.radar_noise_var, cfg.rng_seed);
    return cube;
}

/// Noise variance that puts the per-element signal power of `noiseless` at
/// `snr_db` above the noise floor.
inline double noise_var_for_snr(const RadarCube& noiseless, double snr_db) {
    return noiseless.mean_power() / std::pow(10.0, snr_db / 10.0);
}

struct RadarSynthesis {
    RadarCube cube;
    double noise_var = 0.0;
};

inline RadarSynthesis synthesize_radar_at_snr(std::span<const TargetRecord> targets, std::span<const SymbolFrame> frames,
                                              const SystemConfig& cfg, double snr_db) {
    RadarSynthesis out{synthesize_radar_noiseless(targets, frames, cfg), 0.0};
    out.noise_var = noise_var_for_snr(out.cube, snr_db);
    add_radar_noise(out.cube, out.noise_var, cfg.rng_seed);
    return out;
}

/// Raised when a round-trip delay does not fit inside the cyclic prefix.
class CpViolationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Time-domain reference path. Each transmit stream is delayed by the exact
/// continuous delay 2R/c + (n g_t + m g_r) sin(theta) / c, realized as a
/// per-subcarrier phase on the stream's spectrum; samples whose delayed time
/// falls before the current symbol are taken from the previous symbol. The
/// carrier part of the array phase and the per-symbol Doppler phase are
/// applied as complex factors. Returns one N_r x (N_cp + N_s) frame per symbol.
inline std::vector<TimeFrame> synthesize_radar_time(std::span<const TargetRecord> targets,
                                                    std::span<const TimeFrame> tx_frames, const SystemConfig& cfg) {
    if (tx_frames.size() != cfg.num_ofdm_symbols)
        throw std::invalid_argument("synthesize_radar_time: expected one TimeFrame per OFDM symbol");
    const auto ns = static_cast<Eigen::Index>(cfg.num_subcarriers);
    const auto ncp = static_cast<Eigen::Index>(cfg.cp_samples());
    const std::size_t nr = cfg.num_radar_rx, nt = cfg.num_tx;
    const double ts = 1.0 / cfg.sample_rate();
    const double scale = 1.0 / std::sqrt(static_cast<double>(ns));
    // Offset between the nominal and the sample-aligned symbol start.
    const double symbol_slip = cfg.ofdm_symbol_duration_s - static_cast<double>(ns + ncp) * ts;

    for (const auto& f : tx_frames)
        if (f.samples.rows() != static_cast<Eigen::Index>(nt) || f.samples.cols() != ns + ncp)
            throw std::invalid_argument("synthesize_radar_time: transmit frame dimensions do not match configuration");

    for (const auto& t : targets) {
        validate_target(t, cfg);
        const double s = std::sin(t.angle_rad);
        const double base = 2.0 * t.range_m / kSpeedOfLight;
        const double spread = ((nt - 1.0) * cfg.tx_spacing_m + (nr - 1.0) * cfg.radar_rx_spacing_m) * s / kSpeedOfLight;
        const double lo = base + std::min(0.0, spread);
        const double hi = base + std::max(0.0, spread);
        if (lo < 0.0 || hi > cfg.cp_duration_s)
            throw CpViolationError("synthesize_radar_time: round-trip delay does not fit inside the cyclic prefix");
    }

    // Transmit spectra per (symbol, antenna).
    std::vector<CMat> spectra(tx_frames.size());
    for (std::size_t mu = 0; mu < tx_frames.size(); ++mu) {
        spectra[mu].resize(static_cast<Eigen::Index>(nt), ns);
        for (std::size_t n = 0; n < nt; ++n)
            spectra[mu].row(static_cast<Eigen::Index>(n)) =
                (fft(tx_frames[mu].samples.row(static_cast<Eigen::Index>(n)).segment(ncp, ns).transpose()) * scale)
                    .transpose();
    }

    auto delayed = [&](const CMat& spectrum, std::size_t n, double tau) {
        CVec x = spectrum.row(static_cast<Eigen::Index>(n)).transpose();
        for (Eigen::Index i = 0; i < ns; ++i)
            x[i] *= std::polar(1.0, -2.0 * kPi * static_cast<double>(i) * cfg.subcarrier_spacing_hz * tau);
        return CVec(ifft(x) * scale);
    };

    std::vector<TimeFrame> out(tx_frames.size());
    for (auto& f : out) {
        f.samples = CMat::Zero(static_cast<Eigen::Index>(nr), ns + ncp);
        f.sample_rate = cfg.sample_rate();
        f.cp_samples = static_cast<std::size_t>(ncp);
    }

    for (const auto& t : targets) {
        const double s = std::sin(t.angle_rad);
        const double fd = t.doppler_hz(cfg);
        for (std::size_t mu = 0; mu < tx_frames.size(); ++mu) {
            const cplx dopp = t.beta * std::polar(1.0, 2.0 * kPi * static_cast<double>(mu) * cfg.ofdm_symbol_duration_s * fd);
            const cplx dopp_prev =
                mu > 0 ? t.beta * std::polar(1.0, 2.0 * kPi * static_cast<double>(mu - 1) * cfg.ofdm_symbol_duration_s * fd)
                       : cplx{};
            for (std::size_t m = 0; m < nr; ++m) {
                for (std::size_t n = 0; n < nt; ++n) {
                    const double path = static_cast<double>(n) * cfg.tx_spacing_m + static_cast<double>(m) * cfg.radar_rx_spacing_m;
                    const double tau = 2.0 * t.range_m / kSpeedOfLight + path * s / kSpeedOfLight;
                    const cplx carrier = std::polar(1.0, -2.0 * kPi * cfg.carrier_freq_hz * path * s / kSpeedOfLight);
                    const CVec cur = delayed(spectra[mu], n, tau);
                    CVec prev;
                    if (mu > 0) prev = delayed(spectra[mu - 1], n, tau - symbol_slip);
                    auto row = out[mu].samples.row(static_cast<Eigen::Index>(m));
                    for (Eigen::Index k = 0; k < ns + ncp; ++k) {
                        const Eigen::Index sidx = k - ncp;  // sample index relative to the body start
                        const double rel = static_cast<double>(sidx) * ts - tau + cfg.cp_duration_s;
                        const Eigen::Index wrap = ((sidx % ns) + ns) % ns;
                        if (rel >= 0.0) {
                            row[k] += dopp * carrier * cur[wrap];
                        } else if (mu > 0) {
                            const Eigen::Index pidx = ((sidx + ns + ncp) % ns + ns) % ns;
                            row[k] += dopp_prev * carrier * prev[pidx];
                        }
                    }
                }
            }
        }
    }

    if (cfg.radar_noise_var > 0.0) {
        std::normal_distribution<double> g(0.0, std::sqrt(cfg.radar_noise_var / 2.0));
        for (std::size_t mu = 0; mu < out.size(); ++mu)
            for (std::size_t m = 0; m < nr; ++m) {
                Rng rng(derive_seed(cfg.rng_seed, Stream::RadarNoise, {mu, m, 1}));
                g.reset();
                for (Eigen::Index k = 0; k < ns + ncp; ++k) {
                    const double re = g(rng);
                    const double im = g(rng);
                    out[mu].samples(static_cast<Eigen::Index>(m), k) += cplx{re, im};
                }
            }
    }
    return out;
}

/// OFDM-demodulates received time frames into a radar cube.
inline RadarCube radar_cube_from_time(std::span<const TimeFrame> rx_frames, const SystemConfig& cfg) {
    RadarCube cube(cfg.num_radar_rx, cfg.num_subcarriers, rx_frames.size());
    for (std::size_t mu = 0; mu < rx_frames.size(); ++mu) {
        const CMat sym = ofdm_demodulate(rx_frames[mu], cfg);
        if (sym.rows() != static_cast<Eigen::Index>(cfg.num_radar_rx))
            throw std::invalid_argument("radar_cube_from_time: row count must equal N_r");
        for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) cube.snapshot(i, mu) = sym.col(static_cast<Eigen::Index>(i));
    }
    return cube;
}

// ---------------------------------------------------------------------------
// Communication channel

struct CommGeometry {
    double range_m = 50.0;
    double departure_rad = deg2rad(30.0);   // angle of the receiver seen from the radar
    double incidence_rad = deg2rad(-45.0);  // angle of the radar seen from the receiver
    cplx beta{0.1, 0.0};
};

struct Scatterer {
    double departure_rad = 0.0;
    double incidence_rad = 0.0;
    cplx coeff{0.1, 0.0};
};

struct CommChannel {
    std::vector<CMat> H;  // one N_c x N_t matrix per subcarrier
    CommGeometry geometry;
    std::vector<Scatterer> scatterers;
};

inline constexpr cplx kCoeffMean{0.1, 0.0};
inline constexpr double kCoeffVariance = 0.01;

/// H_i = beta e^{-j 2 pi i df R_c / c} a_c(phi, i) a_t(theta, i)^T
///       + sum_k c_k a_c(phi_k, i) a_t(theta_k, i)^T
inline CommChannel build_comm_channel(const SystemConfig& cfg, const CommGeometry& geometry,
                                      std::vector<Scatterer> scatterers) {
    CommChannel ch;
    ch.geometry = geometry;
    ch.scatterers = std::move(scatterers);
    ch.H.reserve(cfg.num_subcarriers);
    for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) {
        const cplx direct = geometry.beta * std::polar(1.0, -2.0 * kPi * static_cast<double>(i) *
                                                               cfg.subcarrier_spacing_hz * geometry.range_m / kSpeedOfLight);
        CMat h = direct * steering_vector(ArrayKind::CommRx, geometry.incidence_rad, i, cfg) *
                 steering_vector(ArrayKind::Tx, geometry.departure_rad, i, cfg).transpose();
        for (const auto& sc : ch.scatterers)
            h.noalias() += sc.coeff * steering_vector(ArrayKind::CommRx, sc.incidence_rad, i, cfg) *
                           steering_vector(ArrayKind::Tx, sc.departure_rad, i, cfg).transpose();
        ch.H.push_back(std::move(h));
    }
    return ch;
}

/// Draws the direct-path coefficient and `num_scatterers` scatterers
/// (angles uniform in (-90, 90) degrees, coefficients with mean 0.1 and
/// variance 0.01) from `seed`, then builds the channel.
inline CommChannel draw_comm_channel(const SystemConfig& cfg, CommGeometry geometry, std::size_t num_scatterers,
                                     std::uint64_t seed) {
    Rng rng(derive_seed(seed, Stream::CommChannel));
    geometry.beta = complex_coefficient(rng, kCoeffMean, kCoeffVariance);
    std::uniform_real_distribution<double> angle(-kPi / 2, kPi / 2);
    std::vector<Scatterer> sc(num_scatterers);
    for (auto& s : sc) {
        s.departure_rad = angle(rng);
        s.incidence_rad = angle(rng);
        s.coeff = complex_coefficient(rng, kCoeffMean, kCoeffVariance);
    }
    return build_comm_channel(cfg, geometry, std::move(sc));
}

/// r_i = H_i d_i + u_i for every subcarrier; column i of the result is r_i.
inline CMat apply_comm_channel(const CommChannel& ch, const CMat& transmit, double noise_var, std::uint64_t seed) {
    if (ch.H.size() != static_cast<std::size_t>(transmit.cols()))
        throw std::invalid_argument("apply_comm_channel: channel and frame subcarrier counts differ");
    if (ch.H.empty()) return {};
    const Eigen::Index nc = ch.H.front().rows();
    CMat r(nc, transmit.cols());
    for (Eigen::Index i = 0; i < transmit.cols(); ++i) {
        const CMat& h = ch.H[static_cast<std::size_t>(i)];
        if (h.cols() != transmit.rows()) throw std::invalid_argument("apply_comm_channel: dimension mismatch");
        r.col(i).noalias() = h * transmit.col(i);
    }
    if (noise_var > 0.0) {
        Rng rng(derive_seed(seed, Stream::CommNoise));
        std::normal_distribution<double> g(0.0, std::sqrt(noise_var / 2.0));
        for (Eigen::Index i = 0; i < r.cols(); ++i)
            for (Eigen::Index l = 0; l < nc; ++l) {
                const double re = g(rng);
                const double im = g(rng);
                r(l, i) += cplx{re, im};
            }
    }
    return r;
}

inline CMat apply_comm_channel(const CommChannel& ch, const SymbolFrame& frame, double noise_var, std::uint64_t seed) {
    return apply_comm_channel(ch, frame.transmit, noise_var, seed);
}

}  // namespace ssdfrc
