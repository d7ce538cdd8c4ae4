// SPDX-License-Identifier: Apache-2.0
//
// Communication receiver: least-squares detection on shared subcarriers,
// matched decisions on private subcarriers, blind private-subcarrier
// detection and bit error accounting.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "rng.hpp"
#include "waveform.hpp"

namespace ssdfrc {

struct DecodeResult {
    CMat symbols;                        // Q-hat, N_t x N_s
    Bits bits;
    std::vector<double> residual_norms;  // ||r_i - H_i x_i|| per subcarrier, before slicing
    PrivateSet detected;                 // private set used for decoding
};

/// Unsliced least-squares estimate argmin_q ||r - H P q||. Throws
/// NumericalError naming the subcarrier when H P is rank deficient.
inline CVec ls_estimate_shared(const CVec& r, const CMat& h, const CMat& precoder, std::size_t subcarrier = 0) {
    if (h.cols() != precoder.rows()) throw std::invalid_argument("ls_decode_shared: channel and precoder sizes differ");
    if (h.rows() < precoder.cols())
        throw std::invalid_argument("ls_decode_shared: fewer receive antennas than streams");
    const CMat hp = h * precoder;
    const Eigen::ColPivHouseholderQR<CMat> qr(hp);
    if (qr.rank() < hp.cols())
        throw NumericalError("ls_decode_shared: H P is rank deficient on subcarrier " + std::to_string(subcarrier));
    return qr.solve(r);
}

inline CVec ls_decode_shared(const CVec& r, const CMat& h, const CMat& precoder, std::size_t subcarrier = 0) {
    CVec q = ls_estimate_shared(r, h, precoder, subcarrier);
    for (Eigen::Index n = 0; n < q.size(); ++n) q[n] = qpsk::slice(q[n]);
    return q;
}

/// QPSK point s minimizing ||r - h_owner * scale * s||.
inline cplx decode_private(const CVec& r, const CMat& h, std::size_t owner, double scale) {
    if (owner >= static_cast<std::size_t>(h.cols())) throw std::invalid_argument("decode_private: owner out of range");
    const CVec col = h.col(static_cast<Eigen::Index>(owner)) * scale;
    cplx best = qpsk::points()[0];
    double best_d = std::numeric_limits<double>::infinity();
    for (const cplx& s : qpsk::points()) {
        const double d = (r - col * s).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = s;
        }
    }
    return best;
}

/// Classifies a subcarrier as private when the unprecoded LS solution is
/// dominated by one entry: |d_max| > dominance * |d_second|. Ambiguous
/// subcarriers (including N_t = 1) are treated as shared.
inline PrivateSet detect_private(const CMat& received, const CommChannel& ch, double dominance = 10.0) {
    PrivateSet out;
    if (static_cast<std::size_t>(received.cols()) != ch.H.size())
        throw std::invalid_argument("detect_private: channel and frame subcarrier counts differ");
    for (std::size_t i = 0; i < ch.H.size(); ++i) {
        const CMat& h = ch.H[i];
        if (h.cols() < 2) continue;
        const CVec d = h.colPivHouseholderQr().solve(received.col(static_cast<Eigen::Index>(i)));
        Eigen::Index first = 0;
        const double largest = d.cwiseAbs().maxCoeff(&first);
        double second = 0.0;
        for (Eigen::Index n = 0; n < d.size(); ++n)
            if (n != first) second = std::max(second, std::abs(d[n]));
        if (largest > 0.0 && largest > dominance * second) out.push_back({i, static_cast<std::size_t>(first)});
    }
    return out;
}

/// Decoder for a fixed channel, precoder and private set. The LS
/// factorizations of H_i P are computed once and reused across frames.
class FrameDecoder {
public:
    FrameDecoder(const CommChannel& ch, const CMat& precoder, const SystemConfig& cfg, PrivateSet private_set,
                 double private_scale)
        : ch_(ch), precoder_(precoder), cfg_(cfg), private_set_(std::move(private_set)), scale_(private_scale),
          owner_(cfg.num_subcarriers, -1), qr_(cfg.num_subcarriers) {
        if (ch.H.size() != cfg.num_subcarriers) throw std::invalid_argument("decode_frame: subcarrier count mismatch");
        if (precoder.rows() != static_cast<Eigen::Index>(cfg.num_tx) || precoder.cols() != precoder.rows())
            throw std::invalid_argument("decode_frame: precoder must be N_t x N_t");
        for (const auto& p : private_set_) owner_.at(p.subcarrier) = static_cast<long>(p.antenna);
        for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) {
            if (owner_[i] >= 0) continue;
            const CMat& h = ch.H[i];
            if (h.cols() != precoder.rows()) throw std::invalid_argument("ls_decode_shared: channel and precoder sizes differ");
            if (h.rows() < precoder.cols()) throw std::invalid_argument("ls_decode_shared: fewer receive antennas than streams");
            qr_[i].compute(h * precoder);
            if (qr_[i].rank() < precoder.cols())
                throw NumericalError("ls_decode_shared: H P is rank deficient on subcarrier " + std::to_string(i));
        }
        layout_ = cfg;
        layout_.private_set = private_set_;
    }

    DecodeResult decode(const CMat& received) const {
        const auto nt = static_cast<Eigen::Index>(cfg_.num_tx);
        if (static_cast<std::size_t>(received.cols()) != cfg_.num_subcarriers)
            throw std::invalid_argument("decode_frame: subcarrier count mismatch");
        DecodeResult out;
        out.detected = private_set_;
        out.symbols = CMat::Zero(nt, received.cols());
        out.residual_norms.resize(cfg_.num_subcarriers);
        for (std::size_t i = 0; i < cfg_.num_subcarriers; ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            const CVec r = received.col(col);
            const CMat& h = ch_.H[i];
            if (owner_[i] >= 0) {
                const auto n = static_cast<std::size_t>(owner_[i]);
                const cplx s = decode_private(r, h, n, scale_);
                out.symbols(static_cast<Eigen::Index>(n), col) = s;
                out.residual_norms[i] = (r - h.col(static_cast<Eigen::Index>(n)) * (scale_ * s)).norm();
            } else {
                const CVec q = qr_[i].solve(r);
                out.residual_norms[i] = (r - h * (precoder_ * q)).norm();
                for (Eigen::Index n = 0; n < nt; ++n) out.symbols(n, col) = qpsk::slice(q[n]);
            }
        }
        out.bits = frame_bits(out.symbols, layout_);
        return out;
    }

private:
    const CommChannel& ch_;
    CMat precoder_;
    SystemConfig cfg_;
    PrivateSet private_set_;
    double scale_;
    std::vector<long> owner_;
    std::vector<Eigen::ColPivHouseholderQR<CMat>> qr_;
    SystemConfig layout_;
};

/// Decodes one received OFDM symbol (N_c x N_s, frequency domain) given the
/// private set and the scale used for private symbols.
inline DecodeResult decode_frame(const CMat& received, const CommChannel& ch, const CMat& precoder,
                                 const SystemConfig& cfg, const PrivateSet& private_set, double private_scale) {
    return FrameDecoder(ch, precoder, cfg, private_set, private_scale).decode(received);
}

/// Fraction of differing bits.
inline double ber(std::span<const std::uint8_t> sent, std::span<const std::uint8_t> received) {
    if (sent.size() != received.size()) throw std::invalid_argument("ber: length mismatch");
    if (sent.empty()) return 0.0;
    std::size_t errors = 0;
    for (std::size_t k = 0; k < sent.size(); ++k) errors += (sent[k] != 0) != (received[k] != 0);
    return static_cast<double>(errors) / static_cast<double>(sent.size());
}

// ---------------------------------------------------------------------------
// BER sweeps

/// Mean received signal power per antenna and subcarrier for white unit
/// symbols: shared columns give ||H_i P||_F^2, private ones ||h_{n_i}||^2 s^2.
inline double mean_received_power(const CommChannel& ch, const CMat& precoder, const SystemConfig& cfg) {
    const double scale2 = precoder.squaredNorm();
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) {
        const long n = private_owner(cfg, i);
        acc += n >= 0 ? ch.H[i].col(n).squaredNorm() * scale2 : (ch.H[i] * precoder).squaredNorm();
    }
    return acc / static_cast<double>(cfg.num_subcarriers * cfg.num_comm_rx);
}

/// Communication SNR in dB is received signal power per antenna over sigma_c^2.
inline double comm_noise_var_for_snr(const CommChannel& ch, const CMat& precoder, const SystemConfig& cfg, double snr_db) {
    return mean_received_power(ch, precoder, cfg) / std::pow(10.0, snr_db / 10.0);
}

struct BerCounts {
    std::size_t shared_errors = 0, shared_bits = 0;
    std::size_t private_errors = 0, private_bits = 0;

    double shared_ber() const { return shared_bits ? static_cast<double>(shared_errors) / static_cast<double>(shared_bits) : 0.0; }
    double private_ber() const { return private_bits ? static_cast<double>(private_errors) / static_cast<double>(private_bits) : 0.0; }
    double total_ber() const {
        const std::size_t n = shared_bits + private_bits;
        return n ? static_cast<double>(shared_errors + private_errors) / static_cast<double>(n) : 0.0;
    }
};

/// Error counts split by subcarrier class for one transmitted/decoded pair.
inline BerCounts count_errors(const CMat& sent_source, const CMat& decoded, const SystemConfig& cfg) {
    BerCounts c;
    for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) {
        const long owner = private_owner(cfg, i);
        const auto col = static_cast<Eigen::Index>(i);
        auto tally = [&](Eigen::Index n, std::size_t& errors, std::size_t& bits) {
            const auto& a = qpsk::kGrayBits[qpsk::nearest_index(sent_source(n, col))];
            const auto& b = qpsk::kGrayBits[qpsk::nearest_index(decoded(n, col))];
            errors += (a[0] != b[0]) + (a[1] != b[1]);
            bits += 2;
        };
        if (owner >= 0) tally(owner, c.private_errors, c.private_bits);
        else
            for (Eigen::Index n = 0; n < sent_source.rows(); ++n) tally(n, c.shared_errors, c.shared_bits);
    }
    return c;
}

struct BerPoint {
    double snr_db = 0.0;
    std::size_t num_tx = 0;
    BerCounts counts;
    std::size_t trials = 0;
};

/// Monte Carlo BER at each SNR over `trials` OFDM symbols with the channel
/// fixed. Trial t at SNR index s uses seeds derived from (seed, s, t), so
/// results do not depend on evaluation order.
inline std::vector<BerPoint> simulate_ber(const SystemConfig& cfg, const CommChannel& ch, const CMat& precoder,
                                          std::span<const double> snr_db, std::size_t trials, std::uint64_t seed) {
    cfg.validate();
    if (trials < 1) throw std::invalid_argument("simulate_ber: trials must be >= 1");
    std::vector<BerPoint> out;
    for (std::size_t s = 0; s < snr_db.size(); ++s) {
        BerPoint pt;
        pt.snr_db = snr_db[s];
        pt.num_tx = cfg.num_tx;
        pt.trials = trials;
        const double noise_var = comm_noise_var_for_snr(ch, precoder, cfg, snr_db[s]);
        const FrameDecoder decoder(ch, precoder, cfg, cfg.private_set, precoder.norm());
        for (std::size_t t = 0; t < trials; ++t) {
            Rng br(derive_seed(seed, Stream::Bits, {s, t}));
            const Bits bits = random_bits(br, bits_per_ofdm_symbol(cfg));
            const SymbolFrame frame = build_symbol_frame(bits, precoder, cfg, t);
            const CMat r = apply_comm_channel(ch, frame, noise_var, derive_seed(seed, Stream::CommNoise, {s, t}));
            const DecodeResult dec = decoder.decode(r);
            const BerCounts c = count_errors(frame.source, dec.symbols, cfg);
            pt.counts.shared_errors += c.shared_errors;
            pt.counts.shared_bits += c.shared_bits;
            pt.counts.private_errors += c.private_errors;
            pt.counts.private_bits += c.private_bits;
        }
        out.push_back(pt);
    }
    return out;
}

}  // namespace ssdfrc
