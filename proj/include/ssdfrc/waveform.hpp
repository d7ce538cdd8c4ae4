// SPDX-License-Identifier: Apache-2.0
//
// QPSK mapping, symbol-matrix construction with precoding and private
// subcarriers, and CP-OFDM modulation.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "config.hpp"
#include "fft.hpp"

namespace ssdfrc {

using Bits = std::vector<std::uint8_t>;

namespace qpsk {

inline constexpr double kScale = 0.70710678118654752440;

/// Constellation in Gray order: 00, 01, 11, 10.
inline const std::array<cplx, 4>& points() {
    static const std::array<cplx, 4> p = {cplx{kScale, kScale}, cplx{-kScale, kScale},
                                          cplx{-kScale, -kScale}, cplx{kScale, -kScale}};
    return p;
}

inline constexpr std::array<std::array<std::uint8_t, 2>, 4> kGrayBits = {{{0, 0}, {0, 1}, {1, 1}, {1, 0}}};

inline cplx map(std::uint8_t b0, std::uint8_t b1) {
    // 00 -> 0, 01 -> 1, 11 -> 2, 10 -> 3
    static constexpr int index[2][2] = {{0, 1}, {3, 2}};
    return points()[static_cast<std::size_t>(index[b0 & 1][b1 & 1])];
}

/// Nearest constellation point; exact ties go to the smaller Gray index.
inline std::size_t nearest_index(cplx s) {
    std::size_t best = 0;
    double best_d = std::norm(s - points()[0]);
    for (std::size_t k = 1; k < 4; ++k) {
        const double d = std::norm(s - points()[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

inline cplx slice(cplx s) { return points()[nearest_index(s)]; }

}  // namespace qpsk

inline std::vector<cplx> qpsk_modulate(std::span<const std::uint8_t> bits) {
    if (bits.size() % 2 != 0) throw std::invalid_argument("qpsk_modulate: odd bit count");
    std::vector<cplx> out(bits.size() / 2);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = qpsk::map(bits[2 * k], bits[2 * k + 1]);
    return out;
}

inline Bits qpsk_demodulate(std::span<const cplx> symbols) {
    Bits out;
    out.reserve(2 * symbols.size());
    for (const auto& s : symbols) {
        const auto& b = qpsk::kGrayBits[qpsk::nearest_index(s)];
        out.push_back(b[0]);
        out.push_back(b[1]);
    }
    return out;
}

/// Information bits carried by one OFDM symbol: 2 (N_t (N_s - M) + M).
inline std::size_t bits_per_ofdm_symbol(const SystemConfig& cfg) {
    const std::size_t m = cfg.num_private();
    return 2 * (cfg.num_tx * (cfg.num_subcarriers - m) + m);
}

/// Bit rate in b/s.
inline double bit_rate(const SystemConfig& cfg) {
    return static_cast<double>(bits_per_ofdm_symbol(cfg)) / cfg.ofdm_symbol_duration_s;
}

/// Rate lost by converting one shared subcarrier to private: 2 (N_t - 1) / T_p.
inline double rate_loss_per_private(const SystemConfig& cfg) {
    return 2.0 * static_cast<double>(cfg.num_tx - 1) / cfg.ofdm_symbol_duration_s;
}

/// Returns the owner antenna of a private subcarrier, or -1 when shared.
inline long private_owner(const SystemConfig& cfg, std::size_t subcarrier) {
    for (const auto& p : cfg.private_set)
        if (p.subcarrier == subcarrier) return static_cast<long>(p.antenna);
    return -1;
}

struct SymbolFrame {
    CMat source;       // Q, N_t x N_s; private columns hold only Q(n_i, i)
    CMat transmit;     // D, N_t x N_s
    std::size_t symbol_index = 0;
    PrivateSet private_set;
    double private_scale = 1.0;  // amplitude applied to private symbols
};

/// Builds Q and D for one OFDM symbol. Bits are consumed subcarrier by
/// subcarrier: 2 bits per antenna on shared subcarriers, 2 bits on a
/// private subcarrier. Private symbols are scaled by ||P||_F so their
/// power matches the expected power of a precoded shared column.
inline SymbolFrame build_symbol_frame(std::span<const std::uint8_t> bits, const CMat& precoder,
                                      const SystemConfig& cfg, std::size_t symbol_index) {
    const auto nt = static_cast<Eigen::Index>(cfg.num_tx);
    const auto ns = static_cast<Eigen::Index>(cfg.num_subcarriers);
    if (precoder.rows() != nt || precoder.cols() != nt)
        throw std::invalid_argument("build_symbol_frame: precoder must be N_t x N_t");
    if (bits.size() != bits_per_ofdm_symbol(cfg))
        throw std::invalid_argument("build_symbol_frame: wrong bit count");

    SymbolFrame frame;
    frame.source = CMat::Zero(nt, ns);
    frame.transmit = CMat::Zero(nt, ns);
    frame.symbol_index = symbol_index;
    frame.private_set = cfg.private_set;
    frame.private_scale = precoder.norm();

    std::vector<long> owner(cfg.num_subcarriers, -1);
    for (const auto& p : cfg.private_set) owner[p.subcarrier] = static_cast<long>(p.antenna);

    std::size_t b = 0;
    for (Eigen::Index i = 0; i < ns; ++i) {
        const long n_i = owner[static_cast<std::size_t>(i)];
        if (n_i >= 0) {
            const cplx s = qpsk::map(bits[b], bits[b + 1]);
            b += 2;
            frame.source(n_i, i) = s;
            frame.transmit(n_i, i) = frame.private_scale * s;
        } else {
            for (Eigen::Index n = 0; n < nt; ++n, b += 2) frame.source(n, i) = qpsk::map(bits[b], bits[b + 1]);
            frame.transmit.col(i).noalias() = precoder * frame.source.col(i);
        }
    }
    return frame;
}

/// Inverse of the bit layout used by build_symbol_frame.
inline Bits frame_bits(const CMat& source, const SystemConfig& cfg) {
    Bits bits;
    bits.reserve(bits_per_ofdm_symbol(cfg));
    for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) {
        const long n_i = private_owner(cfg, i);
        const auto col = static_cast<Eigen::Index>(i);
        auto push = [&](cplx s) {
            const auto& g = qpsk::kGrayBits[qpsk::nearest_index(s)];
            bits.push_back(g[0]);
            bits.push_back(g[1]);
        };
        if (n_i >= 0) {
            push(source(n_i, col));
        } else {
            for (Eigen::Index n = 0; n < source.rows(); ++n) push(source(n, col));
        }
    }
    return bits;
}

/// Baseband samples, one row per stream, N_cp + N_s columns (CP first).
struct TimeFrame {
    CMat samples;
    double sample_rate = 0.0;
    std::size_t cp_samples = 0;
};

/// Unitary N_s-point IDFT per row followed by cyclic-prefix insertion.
inline TimeFrame ofdm_modulate(const CMat& symbols, const SystemConfig& cfg) {
    const auto ns = static_cast<Eigen::Index>(cfg.num_subcarriers);
    if (symbols.cols() != ns) throw std::invalid_argument("ofdm_modulate: column count must equal N_s");
    const auto ncp = static_cast<Eigen::Index>(cfg.cp_samples());
    if (ncp > ns) throw std::invalid_argument("ofdm_modulate: CP longer than the symbol");
    const double scale = 1.0 / std::sqrt(static_cast<double>(ns));

    TimeFrame out;
    out.sample_rate = cfg.sample_rate();
    out.cp_samples = static_cast<std::size_t>(ncp);
    out.samples.resize(symbols.rows(), ns + ncp);
    for (Eigen::Index r = 0; r < symbols.rows(); ++r) {
        const CVec body = ifft(symbols.row(r).transpose()) * scale;
        out.samples.row(r).segment(ncp, ns) = body.transpose();
        out.samples.row(r).head(ncp) = body.tail(ncp).transpose();
    }
    return out;
}

inline TimeFrame ofdm_modulate(const SymbolFrame& frame, const SystemConfig& cfg) {
    return ofdm_modulate(frame.transmit, cfg);
}

/// Strips the CP and applies a unitary N_s-point DFT per row.
inline CMat ofdm_demodulate(const TimeFrame& time, const SystemConfig& cfg) {
    const auto ns = static_cast<Eigen::Index>(cfg.num_subcarriers);
    const auto ncp = static_cast<Eigen::Index>(cfg.cp_samples());
    if (time.samples.cols() != ns + ncp)
        throw std::invalid_argument("ofdm_demodulate: sample count does not match configuration");
    const double scale = 1.0 / std::sqrt(static_cast<double>(ns));
    CMat out(time.samples.rows(), ns);
    for (Eigen::Index r = 0; r < time.samples.rows(); ++r)
        out.row(r) = (fft(time.samples.row(r).segment(ncp, ns).transpose()) * scale).transpose();
    return out;
}

}  // namespace ssdfrc
