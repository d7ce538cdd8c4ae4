// SPDX-License-Identifier: Apache-2.0
//
// Transmit beampattern, communication SNR and the joint precoder loss with
// its closed-form gradient, optimized by Adam.

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "channel.hpp"
#include "config.hpp"

namespace ssdfrc {

struct BeampatternSpec {
    std::vector<double> angles_rad;
    std::vector<double> desired;
    std::vector<double> weights;

    void validate() const {
        if (angles_rad.size() < 2) throw std::invalid_argument("BeampatternSpec: at least two grid angles required");
        if (desired.size() != angles_rad.size() || weights.size() != angles_rad.size())
            throw std::invalid_argument("BeampatternSpec: desired/weights length must match the grid");
        for (std::size_t g = 0; g < angles_rad.size(); ++g) {
            if (!(desired[g] >= 0.0)) throw std::invalid_argument("BeampatternSpec: desired power must be >= 0");
            if (!(weights[g] >= 0.0)) throw std::invalid_argument("BeampatternSpec: weights must be >= 0");
        }
    }

    /// Grid with unit desired power inside any of `bands` (degrees, inclusive).
    static BeampatternSpec bands(const std::vector<std::pair<double, double>>& bands_deg, double lo = -90.0,
                                 double hi = 90.0, double step = 1.0) {
        BeampatternSpec s;
        const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
        for (long k = 0; k <= n; ++k) {
            const double deg = lo + static_cast<double>(k) * step;
            bool in = false;
            for (const auto& [a, b] : bands_deg) in = in || (deg >= a - 1e-9 && deg <= b + 1e-9);
            s.angles_rad.push_back(deg2rad(deg));
            s.desired.push_back(in ? 1.0 : 0.0);
            s.weights.push_back(1.0);
        }
        return s;
    }

    /// One-degree grid over [-90, 90] with pass bands [-52, -37] and [29, 31].
    static BeampatternSpec default_spec() { return bands({{-52.0, -37.0}, {29.0, 31.0}}); }
};

/// B(theta) = (1/N_s) sum_i conj(a_t(theta, i)) a_t(theta, i)^T, so that the
/// transmitted power is tr(P^H B P).
inline CMat beam_matrix(double angle_rad, const SystemConfig& cfg) {
    const auto nt = static_cast<Eigen::Index>(cfg.num_tx);
    CMat b = CMat::Zero(nt, nt);
    for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) {
        const CVec a = steering_vector(ArrayKind::Tx, angle_rad, i, cfg);
        b.noalias() += a.conjugate() * a.transpose();
    }
    return b / static_cast<double>(cfg.num_subcarriers);
}

/// p(theta) = (1/N_s) sum_i a_t^T P P^H a_t^* for white unit-power symbols.
inline std::vector<double> beampattern(const CMat& P, const SystemConfig& cfg, const std::vector<double>& grid) {
    std::vector<double> out;
    out.reserve(grid.size());
    for (double th : grid) {
        double acc = 0.0;
        for (std::size_t i = 0; i < cfg.num_subcarriers; ++i)
            acc += (P.adjoint() * steering_vector(ArrayKind::Tx, th, i, cfg).conjugate()).squaredNorm();
        out.push_back(acc / static_cast<double>(cfg.num_subcarriers));
    }
    return out;
}

inline double beampattern_error(const CMat& P, const BeampatternSpec& spec, const SystemConfig& cfg) {
    spec.validate();
    const auto p = beampattern(P, cfg, spec.angles_rad);
    double e = 0.0;
    for (std::size_t g = 0; g < p.size(); ++g) e += spec.weights[g] * (spec.desired[g] - p[g]) * (spec.desired[g] - p[g]);
    return e;
}

/// Mean in-band power over mean out-of-band power (desired > 0 marks in-band).
inline double band_power_ratio(const std::vector<double>& pattern, const BeampatternSpec& spec) {
    double in = 0.0, out = 0.0;
    std::size_t nin = 0, nout = 0;
    for (std::size_t g = 0; g < pattern.size(); ++g) {
        if (spec.desired[g] > 0.0) {
            in += pattern[g];
            ++nin;
        } else {
            out += pattern[g];
            ++nout;
        }
    }
    if (nin == 0 || nout == 0 || out <= 0.0) return std::numeric_limits<double>::infinity();
    return (in / static_cast<double>(nin)) / (out / static_cast<double>(nout));
}

/// SNR at the communication receiver. Shared subcarriers contribute
/// tr(H_i P P^H H_i^H); a private subcarrier carries ||P||_F-scaled symbols on
/// its owner antenna and contributes ||h_{i, n_i}||^2 ||P||_F^2.
inline double comm_snr(const CMat& P, const CommChannel& ch, const SystemConfig& cfg) {
    if (!(cfg.comm_noise_var > 0.0)) throw std::invalid_argument("comm_snr: comm_noise_var must be > 0");
    if (ch.H.size() != cfg.num_subcarriers) throw std::invalid_argument("comm_snr: channel must cover every subcarrier");
    const double pf = P.squaredNorm();
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.num_subcarriers; ++i) {
        const long owner = private_owner(cfg, i);
        if (owner >= 0) acc += ch.H[i].col(owner).squaredNorm() * pf;
        else acc += (ch.H[i] * P).squaredNorm();
    }
    return acc / (static_cast<double>(cfg.num_subcarriers) * cfg.comm_noise_var);
}

inline double to_db(double linear) { return 10.0 * std::log10(linear); }

struct LossTerms {
    double loss = 0.0;
    double beampattern_error = 0.0;
    double snr_linear = 0.0;
    CMat gradient;  // 2 dL/dP^*: real part is dL/dRe(P), imaginary part dL/dIm(P)
};

/// Precomputed quadratic forms of the joint loss
///   L(P) = alpha_b sum_g w_g (p_g - p_hat_g(P))^2 + alpha_snr 10 log10(1 / SNR(P)).
/// With `source` set, the beampattern and shared-subcarrier SNR use the
/// instantaneous covariance q_i q_i^H of the given symbols instead of I.
class PrecoderObjective {
public:
    PrecoderObjective(BeampatternSpec spec, const CommChannel& ch, const SystemConfig& cfg, double alpha_b,
                      double alpha_snr, std::optional<CMat> source = std::nullopt)
        : spec_(std::move(spec)), alpha_b_(alpha_b), alpha_snr_(alpha_snr), ns_(cfg.num_subcarriers),
          source_(std::move(source)) {
        spec_.validate();
        if (alpha_b < 0.0 || alpha_snr < 0.0) throw std::invalid_argument("PrecoderObjective: weights must be >= 0");
        if (!(cfg.comm_noise_var > 0.0)) throw std::invalid_argument("PrecoderObjective: comm_noise_var must be > 0");
        if (ch.H.size() != cfg.num_subcarriers) throw std::invalid_argument("PrecoderObjective: channel must cover every subcarrier");
        const auto nt = static_cast<Eigen::Index>(cfg.num_tx);
        if (source_ && (source_->rows() != nt || source_->cols() != static_cast<Eigen::Index>(ns_)))
            throw std::invalid_argument("PrecoderObjective: source symbols must be N_t x N_s");
        nt_ = nt;
        snr_den_ = static_cast<double>(ns_) * cfg.comm_noise_var;
        gram_ = CMat::Zero(nt, nt);
        for (std::size_t i = 0; i < ns_; ++i) {
            const long owner = private_owner(cfg, i);
            if (owner >= 0) {
                private_gain_ += ch.H[i].col(owner).squaredNorm();
            } else {
                shared_.push_back(i);
                hh_.push_back(ch.H[i].adjoint() * ch.H[i]);
                gram_ += hh_.back();
            }
        }
        if (source_) {
            for (double th : spec_.angles_rad) {
                CMat a(nt, static_cast<Eigen::Index>(ns_));
                for (std::size_t i = 0; i < ns_; ++i) a.col(static_cast<Eigen::Index>(i)) = steering_vector(ArrayKind::Tx, th, i, cfg);
                steer_.push_back(std::move(a));
            }
        } else {
            for (double th : spec_.angles_rad) beams_.push_back(beam_matrix(th, cfg));
        }
    }

    const BeampatternSpec& spec() const { return spec_; }
    double alpha_b() const { return alpha_b_; }
    double alpha_snr() const { return alpha_snr_; }

    std::vector<double> pattern(const CMat& P) const {
        std::vector<double> out(spec_.angles_rad.size());
        for (std::size_t g = 0; g < out.size(); ++g) {
            if (source_) {
                const CMat pq = P * (*source_);
                double acc = 0.0;
                for (std::size_t i = 0; i < ns_; ++i) acc += std::norm(steer_[g].col(static_cast<Eigen::Index>(i)).cwiseProduct(pq.col(static_cast<Eigen::Index>(i))).sum());
                out[g] = acc / static_cast<double>(ns_);
            } else {
                out[g] = (P.adjoint() * beams_[g] * P).trace().real();
            }
        }
        return out;
    }

    double snr(const CMat& P) const {
        double acc = private_gain_ * P.squaredNorm();
        if (source_) {
            for (std::size_t k = 0; k < shared_.size(); ++k) {
                const CVec x = P * source_->col(static_cast<Eigen::Index>(shared_[k]));
                acc += x.dot(hh_[k] * x).real();
            }
        } else {
            acc += (P.adjoint() * gram_ * P).trace().real();
        }
        return acc / snr_den_;
    }

    LossTerms evaluate(const CMat& P, bool with_gradient = true) const {
        if (P.rows() != nt_ || P.cols() != nt_) throw std::invalid_argument("PrecoderObjective: P must be N_t x N_t");
        LossTerms t;
        const auto p_hat = pattern(P);
        t.gradient = CMat::Zero(nt_, nt_);
        for (std::size_t g = 0; g < p_hat.size(); ++g) {
            const double diff = p_hat[g] - spec_.desired[g];
            t.beampattern_error += spec_.weights[g] * diff * diff;
            if (!with_gradient || spec_.weights[g] == 0.0 || alpha_b_ == 0.0) continue;
            const double c = 2.0 * alpha_b_ * spec_.weights[g] * 2.0 * diff;  // 2 x dE/dp_hat
            if (source_) {
                const CMat pq = P * (*source_);
                CMat d = CMat::Zero(nt_, nt_);
                for (std::size_t i = 0; i < ns_; ++i) {
                    const auto col = static_cast<Eigen::Index>(i);
                    const cplx x = steer_[g].col(col).transpose() * pq.col(col);
                    d.noalias() += x * steer_[g].col(col).conjugate() * source_->col(col).adjoint();
                }
                t.gradient += (c / static_cast<double>(ns_)) * d;
            } else {
                t.gradient += c * (beams_[g] * P);
            }
        }
        t.snr_linear = snr(P);
        if (!(t.snr_linear > 0.0) || !std::isfinite(t.snr_linear))
            throw NumericalError("precoder loss: communication SNR is zero, log term diverges");
        t.loss = alpha_b_ * t.beampattern_error - alpha_snr_ * to_db(t.snr_linear);
        if (with_gradient && alpha_snr_ != 0.0) {
            CMat ds = private_gain_ * P;
            if (source_) {
                for (std::size_t k = 0; k < shared_.size(); ++k) {
                    const auto col = static_cast<Eigen::Index>(shared_[k]);
                    ds.noalias() += hh_[k] * P * source_->col(col) * source_->col(col).adjoint();
                }
            } else {
                ds.noalias() += gram_ * P;
            }
            ds /= snr_den_;
            t.gradient -= 2.0 * alpha_snr_ * (10.0 / std::log(10.0)) / t.snr_linear * ds;
        }
        return t;
    }

private:
    BeampatternSpec spec_;
    double alpha_b_, alpha_snr_;
    std::size_t ns_;
    std::optional<CMat> source_;
    Eigen::Index nt_ = 0;
    double snr_den_ = 1.0;
    double private_gain_ = 0.0;
    CMat gram_;
    std::vector<std::size_t> shared_;
    std::vector<CMat> hh_;
    std::vector<CMat> beams_;
    std::vector<CMat> steer_;
};

inline double loss(const CMat& P, const BeampatternSpec& spec, const CommChannel& ch, double alpha_b, double alpha_snr,
                   const SystemConfig& cfg) {
    return PrecoderObjective(spec, ch, cfg, alpha_b, alpha_snr).evaluate(P, false).loss;
}

inline CMat loss_gradient(const CMat& P, const BeampatternSpec& spec, const CommChannel& ch, double alpha_b,
                          double alpha_snr, const SystemConfig& cfg) {
    return PrecoderObjective(spec, ch, cfg, alpha_b, alpha_snr).evaluate(P, true).gradient;
}

struct AdamParams {
    std::vector<double> learning_rates{0.02, 0.01, 0.005};
    std::size_t steps = 150;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool renormalize = false;  // rescale to ||P||_F^2 = N_t after every step
};

struct PrecoderState {
    CMat P;
    std::vector<double> loss_trace;  // index 0 is the initial point
    std::vector<double> error_trace;
    std::vector<double> snr_db_trace;
    std::vector<double> grad_norm_trace;
    double learning_rate = 0.0;
    double alpha_b = 0.0;
    double alpha_snr = 0.0;
    std::size_t steps = 0;
    std::vector<double> restart_final_loss;  // one entry per learning rate
};

/// One Adam run at a fixed learning rate on the real and imaginary parts of P.
inline PrecoderState adam_run(const CMat& p0, const PrecoderObjective& obj, const AdamParams& params, double lr) {
    if (params.steps < 1) throw std::invalid_argument("adam_optimize: step count must be >= 1");
    PrecoderState st;
    st.P = p0;
    st.learning_rate = lr;
    st.alpha_b = obj.alpha_b();
    st.alpha_snr = obj.alpha_snr();
    st.steps = params.steps;
    const double target_norm = std::sqrt(static_cast<double>(p0.rows()));
    Eigen::MatrixXd m_re = Eigen::MatrixXd::Zero(p0.rows(), p0.cols()), m_im = m_re, v_re = m_re, v_im = m_re;

    auto record = [&](const LossTerms& t) {
        if (!std::isfinite(t.loss) || !t.gradient.allFinite())
            throw NumericalError("adam_optimize: non-finite loss after " + std::to_string(st.loss_trace.size()) + " steps");
        st.loss_trace.push_back(t.loss);
        st.error_trace.push_back(t.beampattern_error);
        st.snr_db_trace.push_back(to_db(t.snr_linear));
        st.grad_norm_trace.push_back(t.gradient.norm());
    };

    LossTerms t = obj.evaluate(st.P);
    record(t);
    for (std::size_t k = 1; k <= params.steps; ++k) {
        const Eigen::MatrixXd g_re = t.gradient.real(), g_im = t.gradient.imag();
        m_re = params.beta1 * m_re + (1.0 - params.beta1) * g_re;
        m_im = params.beta1 * m_im + (1.0 - params.beta1) * g_im;
        v_re = params.beta2 * v_re + (1.0 - params.beta2) * g_re.cwiseAbs2();
        v_im = params.beta2 * v_im + (1.0 - params.beta2) * g_im.cwiseAbs2();
        const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(k));
        const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(k));
        const Eigen::MatrixXd step_re = (m_re / c1).array() / ((v_re / c2).array().sqrt() + params.epsilon);
        const Eigen::MatrixXd step_im = (m_im / c1).array() / ((v_im / c2).array().sqrt() + params.epsilon);
        st.P.real() -= lr * step_re;
        st.P.imag() -= lr * step_im;
        if (params.renormalize && st.P.norm() > 0.0) st.P *= target_norm / st.P.norm();
        t = obj.evaluate(st.P);
        record(t);
    }
    return st;
}

/// Runs Adam once per learning rate and keeps the run with the lowest final loss.
inline PrecoderState adam_optimize(const CMat& p0, const PrecoderObjective& obj, const AdamParams& params = {}) {
    if (params.learning_rates.empty()) throw std::invalid_argument("adam_optimize: no learning rates");
    std::optional<PrecoderState> best;
    std::vector<double> finals;
    for (double lr : params.learning_rates) {
        PrecoderState st = adam_run(p0, obj, params, lr);
        finals.push_back(st.loss_trace.back());
        if (!best || st.loss_trace.back() < best->loss_trace.back()) best = std::move(st);
    }
    best->restart_final_loss = std::move(finals);
    return *best;
}

}  // namespace ssdfrc
