// SPDX-License-Identifier: Apache-2.0
//
// System parameters, array steering vectors and range/velocity resolution
// formulas shared by every stage of the simulator.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ssdfrc {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s
inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Raised when a numerical routine cannot produce a trustworthy result
/// (rank deficiency, divergence, non-convergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One private subcarrier and the transmit antenna that owns it.
struct PrivateAssignment {
    std::size_t subcarrier = 0;
    std::size_t antenna = 0;

    friend bool operator==(const PrivateAssignment&, const PrivateAssignment&) = default;
};

using PrivateSet = std::vector<PrivateAssignment>;

/// The default private set {(i, i) : i = 0..count-1}.
inline PrivateSet default_private_set(std::size_t count) {
    PrivateSet set;
    set.reserve(count);
    for (std::size_t i = 0; i < count; ++i) set.push_back({i, i});
    return set;
}

struct SystemConfig {
    double carrier_freq_hz = 24e9;          // f_c
    double subcarrier_spacing_hz = 0.25e6;  // delta f
    std::size_t num_subcarriers = 512;      // N_s
    std::size_t num_ofdm_symbols = 256;     // N_p
    std::size_t num_tx = 16;                // N_t
    std::size_t num_radar_rx = 32;          // N_r
    std::size_t num_comm_rx = 64;           // N_c
    double tx_spacing_m = 0.0;              // g_t
    double radar_rx_spacing_m = 0.0;        // g_r
    double comm_rx_spacing_m = 0.0;         // d_r
    double ofdm_symbol_duration_s = 5e-6;   // T_p
    double cp_duration_s = 1e-6;            // T_cp
    double radar_noise_var = 0.0;           // sigma_r^2
    double comm_noise_var = 1.0;            // sigma_c^2
    PrivateSet private_set;                 // ordered (subcarrier, antenna) pairs
    std::uint64_t rng_seed = 1;

    double wavelength() const { return kSpeedOfLight / carrier_freq_hz; }
    double subcarrier_freq(std::size_t i) const {
        return carrier_freq_hz + static_cast<double>(i) * subcarrier_spacing_hz;
    }
    double sample_rate() const {
        return static_cast<double>(num_subcarriers) * subcarrier_spacing_hz;
    }
    /// CP length in samples, round(T_cp * N_s * delta f).
    std::size_t cp_samples() const {
        return static_cast<std::size_t>(std::llround(cp_duration_s * sample_rate()));
    }
    std::size_t num_private() const { return private_set.size(); }

    bool is_private(std::size_t subcarrier) const {
        for (const auto& p : private_set)
            if (p.subcarrier == subcarrier) return true;
        return false;
    }

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const {
        auto fail = [](const std::string& what) { throw std::invalid_argument("SystemConfig: " + what); };
        if (!(carrier_freq_hz > 0.0) || !std::isfinite(carrier_freq_hz)) fail("carrier_freq_hz must be > 0");
        if (!(subcarrier_spacing_hz > 0.0)) fail("subcarrier_spacing_hz must be > 0");
        if (num_subcarriers < 1 || num_ofdm_symbols < 1 || num_tx < 1 || num_radar_rx < 1 || num_comm_rx < 1)
            fail("array and frame sizes must be >= 1");
        if (!(tx_spacing_m > 0.0) || !(radar_rx_spacing_m > 0.0) || !(comm_rx_spacing_m > 0.0))
            fail("antenna spacings must be > 0");
        if (!(radar_noise_var >= 0.0) || !(comm_noise_var >= 0.0)) fail("noise variances must be >= 0");
        if (!(cp_duration_s >= 0.0)) fail("cp_duration_s must be >= 0");
        const double expected_tp = 1.0 / subcarrier_spacing_hz + cp_duration_s;
        if (std::abs(ofdm_symbol_duration_s - expected_tp) > 1e-9 * expected_tp)
            fail("ofdm_symbol_duration_s must equal 1/subcarrier_spacing_hz + cp_duration_s");
        if (private_set.size() > num_tx) fail("at most num_tx private subcarriers");
        for (std::size_t a = 0; a < private_set.size(); ++a) {
            if (private_set[a].subcarrier >= num_subcarriers) fail("private subcarrier index out of range");
            if (private_set[a].antenna >= num_tx) fail("private antenna index out of range");
            for (std::size_t b = a + 1; b < private_set.size(); ++b)
                if (private_set[a].subcarrier == private_set[b].subcarrier)
                    fail("private subcarrier indices must be distinct");
        }
    }

    /// Reference parameters: 24 GHz, 0.25 MHz spacing, 512 subcarriers, 256
    /// symbols, half-wavelength spacing at the carrier.
    static SystemConfig reference(std::size_t num_tx = 16, std::size_t num_private = 0) {
        SystemConfig cfg;
        cfg.num_tx = num_tx;
        const double half = 0.5 * cfg.wavelength();
        cfg.tx_spacing_m = half;
        cfg.radar_rx_spacing_m = half;
        cfg.comm_rx_spacing_m = half;
        cfg.private_set = default_private_set(num_private);
        return cfg;
    }
};

enum class ArrayKind { Tx, RadarRx, CommRx };

inline std::size_t array_size(ArrayKind kind, const SystemConfig& cfg) {
    switch (kind) {
        case ArrayKind::Tx: return cfg.num_tx;
        case ArrayKind::RadarRx: return cfg.num_radar_rx;
        case ArrayKind::CommRx: return cfg.num_comm_rx;
    }
    throw std::invalid_argument("steering_vector: unknown array kind");
}

inline double array_spacing(ArrayKind kind, const SystemConfig& cfg) {
    switch (kind) {
        case ArrayKind::Tx: return cfg.tx_spacing_m;
        case ArrayKind::RadarRx: return cfg.radar_rx_spacing_m;
        case ArrayKind::CommRx: return cfg.comm_rx_spacing_m;
    }
    throw std::invalid_argument("steering_vector: unknown array kind");
}

/// ULA response exp(-j 2 pi n d sin(theta) f / c) for an explicit frequency.
inline CVec ula_response(std::size_t size, double spacing_m, double angle_rad, double freq_hz) {
    CVec v(static_cast<Eigen::Index>(size));
    const double phase = -2.0 * kPi * spacing_m * std::sin(angle_rad) * freq_hz / kSpeedOfLight;
    for (std::size_t n = 0; n < size; ++n)
        v[static_cast<Eigen::Index>(n)] = std::polar(1.0, phase * static_cast<double>(n));
    return v;
}

/// Steering vector of the given array on subcarrier `subcarrier`.
/// Angles are accepted on the closed interval [-pi/2, pi/2] so that
/// one-degree grids including the endfire points can be evaluated.
inline CVec steering_vector(ArrayKind kind, double angle_rad, std::size_t subcarrier, const SystemConfig& cfg) {
    if (subcarrier >= cfg.num_subcarriers)
        throw std::invalid_argument("steering_vector: subcarrier index out of range");
    if (!std::isfinite(angle_rad) || std::abs(angle_rad) > kPi / 2 + 1e-12)
        throw std::invalid_argument("steering_vector: angle outside [-pi/2, pi/2]");
    return ula_response(array_size(kind, cfg), array_spacing(kind, cfg), angle_rad, cfg.subcarrier_freq(subcarrier));
}

struct Resolutions {
    double range_res_m = 0.0;
    double range_max_m = 0.0;
    double vel_res_mps = 0.0;
    double vel_max_mps = 0.0;
};

inline Resolutions resolutions(const SystemConfig& cfg) {
    const double c = kSpeedOfLight;
    Resolutions r;
    r.range_max_m = c / (2.0 * cfg.subcarrier_spacing_hz);
    r.range_res_m = r.range_max_m / static_cast<double>(cfg.num_subcarriers);
    r.vel_max_mps = c / (2.0 * cfg.carrier_freq_hz * cfg.ofdm_symbol_duration_s);
    r.vel_res_mps = r.vel_max_mps / static_cast<double>(cfg.num_ofdm_symbols);
    return r;
}

}  // namespace ssdfrc
