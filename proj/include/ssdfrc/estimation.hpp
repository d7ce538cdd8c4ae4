// SPDX-License-Identifier: Apache-2.0
//
// Sensing pipeline: coarse angle DFT, range cross-correlation, Doppler DFT,
// virtual-array snapshot, angle-range dictionary and the iterative
// angle-range refinement loop.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "fft.hpp"
#include "sparse.hpp"
#include "waveform.hpp"

namespace ssdfrc {

// ---------------------------------------------------------------------------
// Peak detection

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

/// median + k * MAD, floored at `relative_floor` times the maximum.
inline double robust_threshold(std::span<const double> mag, double num_mads, double relative_floor = 1e-9) {
    std::vector<double> v(mag.begin(), mag.end());
    const double med = median_of(v);
    for (auto& x : v) x = std::abs(x - med);
    const double mad = median_of(v);
    const double peak = mag.empty() ? 0.0 : *std::max_element(mag.begin(), mag.end());
    return std::max(med + num_mads * mad, relative_floor * peak);
}

/// Indices of local maxima (circular neighbourhood) strictly above the
/// robust threshold. On plateaus only the first sample is reported.
inline std::vector<std::size_t> detect_peaks(std::span<const double> mag, double num_mads) {
    std::vector<std::size_t> out;
    const std::size_t n = mag.size();
    if (n == 0) return out;
    const double thr = robust_threshold(mag, num_mads);
    for (std::size_t k = 0; k < n; ++k) {
        const double v = mag[k];
        if (!(v > thr)) continue;
        if (n > 1) {
            const double left = mag[(k + n - 1) % n];
            const double right = mag[(k + 1) % n];
            if (!(v > left && v >= right)) continue;
        }
        out.push_back(k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Coarse angle estimation

struct AngleBin {
    int dft_bin = 0;
    double angle_rad = 0.0;
    std::vector<std::size_t> subcarrier_support;
};

/// Normalized spatial frequency of DFT bin k, wrapped to (-1/2, 1/2].
inline double wrapped_frequency(int k, std::size_t n) {
    double nu = static_cast<double>(k) / static_cast<double>(n);
    if (nu > 0.5) nu -= 1.0;
    return nu;
}

/// arcsin(-nu c / (g_r f_i)); returns nullopt when |sin| > 1.
inline std::optional<double> bin_angle(int k, std::size_t subcarrier, const SystemConfig& cfg) {
    const double nu = wrapped_frequency(k, cfg.num_radar_rx);
    const double s = -nu * kSpeedOfLight / (cfg.radar_rx_spacing_m * cfg.subcarrier_freq(subcarrier));
    if (std::abs(s) > 1.0) return std::nullopt;
    return std::asin(s);
}

/// N_r-point DFT over the receive antennas on every subcarrier of symbol mu;
/// bins that are thresholded local maxima on any subcarrier are unioned. Each
/// bin's angle is evaluated at its lowest supporting subcarrier.
inline std::vector<AngleBin> coarse_angle_estimate(const RadarCube& cube, std::size_t mu, const SystemConfig& cfg,
                                                   double num_mads = 10.0) {
    if (mu >= cube.num_symbols()) throw std::invalid_argument("coarse_angle_estimate: symbol index out of range");
    const std::size_t nr = cube.num_rx();
    std::map<int, std::vector<std::size_t>> support;
    std::vector<double> mag(nr);
    for (std::size_t i = 0; i < cube.num_subcarriers(); ++i) {
        const CVec spec = fft(CVec(cube.snapshot(i, mu)));
        for (std::size_t k = 0; k < nr; ++k) mag[k] = std::abs(spec[static_cast<Eigen::Index>(k)]);
        for (auto k : detect_peaks(mag, num_mads)) support[static_cast<int>(k)].push_back(i);
    }
    std::vector<AngleBin> out;
    for (auto& [k, subs] : support) {
        std::optional<double> angle;
        for (auto i : subs)
            if ((angle = bin_angle(k, i, cfg))) break;
        if (!angle) continue;
        out.push_back({k, *angle, std::move(subs)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Range and Doppler

/// Receive look used to extract A(i, mu): either a DFT bin of the physical
/// array or a beamformer steered to an arbitrary angle.
struct Look {
    double angle_rad = 0.0;
    int dft_bin = -1;  // -1 selects conventional beamforming

    static Look from_bin(const AngleBin& b) { return {b.angle_rad, b.dft_bin}; }
    static Look steered(double angle) { return {angle, -1}; }
};

/// A(i, mu) for every subcarrier of one symbol.
inline CVec look_amplitudes(const RadarCube& cube, const Look& look, std::size_t mu, const SystemConfig& cfg) {
    const std::size_t nr = cube.num_rx(), ns = cube.num_subcarriers();
    CVec a(static_cast<Eigen::Index>(ns));
    if (look.dft_bin >= 0) {
        CVec w(static_cast<Eigen::Index>(nr));
        for (std::size_t m = 0; m < nr; ++m)
            w[static_cast<Eigen::Index>(m)] = std::polar(1.0, 2.0 * kPi * static_cast<double>(m * static_cast<std::size_t>(look.dft_bin)) / static_cast<double>(nr));
        for (std::size_t i = 0; i < ns; ++i) a[static_cast<Eigen::Index>(i)] = w.dot(cube.snapshot(i, mu));
    } else {
        for (std::size_t i = 0; i < ns; ++i)
            a[static_cast<Eigen::Index>(i)] = steering_vector(ArrayKind::RadarRx, look.angle_rad, i, cfg).dot(cube.snapshot(i, mu));
    }
    return a;
}

/// A'(i, mu) = a_t(theta, i)^T d_i for every subcarrier.
inline CVec reference_amplitudes(const SymbolFrame& frame, double angle_rad, const SystemConfig& cfg) {
    const auto ns = frame.transmit.cols();
    CVec a(ns);
    for (Eigen::Index i = 0; i < ns; ++i)
        a[i] = (steering_vector(ArrayKind::Tx, angle_rad, static_cast<std::size_t>(i), cfg).array() * frame.transmit.col(i).array()).sum();
    return a;
}

/// Circular cross-correlation of the N_s-point DFTs of A and A', scaled by
/// 1/N_s: c(l) = sum_i A(i) conj(A'(i)) exp(j 2 pi i l / N_s).
inline CVec range_profile(const CVec& a, const CVec& a_ref) {
    if (a.size() != a_ref.size()) throw std::invalid_argument("range_profile: length mismatch");
    return ifft(CVec(a.array() * a_ref.array().conjugate())) / static_cast<double>(a.size());
}

struct RangePeak {
    Look look;
    std::size_t index = 0;
    double range_m = 0.0;
    CVec values;  // normalized peak value per OFDM symbol (filled on demand)
    double magnitude = 0.0;  // |profile| at the peak
};

inline double range_of_index(std::size_t l, const SystemConfig& cfg) {
    return static_cast<double>(l) * resolutions(cfg).range_res_m;
}

/// Range peaks inside one look on symbol mu. Peak values are normalized by
/// N_r sum |A'|^2 so that a lone target contributes beta e^{j 2 pi mu T_p f_d}.
inline std::vector<RangePeak> range_estimate(const RadarCube& cube, const Look& look,
                                             std::span<const SymbolFrame> frames, const SystemConfig& cfg,
                                             std::size_t mu, double num_mads = 10.0) {
    if (mu >= frames.size() || mu >= cube.num_symbols()) throw std::invalid_argument("range_estimate: symbol index out of range");
    const CVec a = look_amplitudes(cube, look, mu, cfg);
    const CVec a_ref = reference_amplitudes(frames[mu], look.angle_rad, cfg);
    const CVec prof = range_profile(a, a_ref);
    std::vector<double> mag(static_cast<std::size_t>(prof.size()));
    for (Eigen::Index l = 0; l < prof.size(); ++l) mag[static_cast<std::size_t>(l)] = std::abs(prof[l]);
    std::vector<RangePeak> out;
    for (auto l : detect_peaks(mag, num_mads)) out.push_back({look, l, range_of_index(l, cfg), CVec(), mag[l]});
    return out;
}

inline std::vector<RangePeak> range_estimate(const RadarCube& cube, const AngleBin& bin,
                                             std::span<const SymbolFrame> frames, const SystemConfig& cfg,
                                             std::size_t mu, double num_mads = 10.0) {
    return range_estimate(cube, Look::from_bin(bin), frames, cfg, mu, num_mads);
}

/// Normalized cross-correlation value at lag `index` for every symbol.
inline CVec peak_values(const RadarCube& cube, const Look& look, std::size_t index,
                        std::span<const SymbolFrame> frames, const SystemConfig& cfg) {
    const std::size_t np = std::min(cube.num_symbols(), frames.size());
    const std::size_t ns = cube.num_subcarriers();
    CVec twiddle(static_cast<Eigen::Index>(ns));
    for (std::size_t i = 0; i < ns; ++i)
        twiddle[static_cast<Eigen::Index>(i)] = std::polar(1.0, 2.0 * kPi * static_cast<double>((i * index) % ns) / static_cast<double>(ns));
    CVec out(static_cast<Eigen::Index>(np));
    for (std::size_t mu = 0; mu < np; ++mu) {
        const CVec a = look_amplitudes(cube, look, mu, cfg);
        const CVec a_ref = reference_amplitudes(frames[mu], look.angle_rad, cfg);
        const double norm = static_cast<double>(cube.num_rx()) * a_ref.squaredNorm() / static_cast<double>(ns);
        const cplx v = (a.array() * a_ref.array().conjugate() * twiddle.array()).sum() / static_cast<double>(ns);
        out[static_cast<Eigen::Index>(mu)] = norm > 0.0 ? v / norm : cplx{};
    }
    return out;
}

inline void fill_peak_values(RangePeak& peak, const RadarCube& cube, std::span<const SymbolFrame> frames,
                             const SystemConfig& cfg) {
    peak.values = peak_values(cube, peak.look, peak.index, frames, cfg);
}

struct DopplerEstimate {
    double velocity_mps = 0.0;
    cplx beta_hat{};
    long bin = 0;  // signed bin on the zero-padded grid
};

/// Zero-padded DFT over the slow-time samples; the peak bin is read as a
/// signed frequency and beta is the peak value divided by N_p.
inline DopplerEstimate doppler_estimate(const CVec& values, const SystemConfig& cfg, std::size_t zero_pad_factor = 8) {
    if (values.size() == 0) throw std::invalid_argument("doppler_estimate: no slow-time samples");
    if (zero_pad_factor < 1) throw std::invalid_argument("doppler_estimate: zero_pad_factor must be >= 1");
    const auto np = values.size();
    const auto len = np * static_cast<Eigen::Index>(zero_pad_factor);
    const CVec spec = fft_padded(values, len);
    Eigen::Index best = 0;
    spec.cwiseAbs().maxCoeff(&best);
    DopplerEstimate d;
    d.bin = best >= (len + 1) / 2 ? static_cast<long>(best - len) : static_cast<long>(best);
    d.velocity_mps = static_cast<double>(d.bin) * kSpeedOfLight /
                     (2.0 * cfg.carrier_freq_hz * static_cast<double>(len) * cfg.ofdm_symbol_duration_s);
    d.beta_hat = spec[best] / static_cast<double>(np);
    return d;
}

inline DopplerEstimate doppler_estimate(const RangePeak& peak, const SystemConfig& cfg, std::size_t zero_pad_factor = 8) {
    return doppler_estimate(peak.values, cfg, zero_pad_factor);
}

// ---------------------------------------------------------------------------
// Virtual array and dictionary

namespace detail {
inline void require_private(const SystemConfig& cfg) {
    if (cfg.private_set.empty()) throw std::invalid_argument("virtual array requires at least one private subcarrier");
}
}  // namespace detail

/// Private-subcarrier samples divided by their known symbols. With the
/// wavelength approximation the layout is receive-antenna major (index
/// m M + p); otherwise it is subcarrier major (index p N_r + m).
inline CVec build_va_snapshot(const RadarCube& cube, std::span<const SymbolFrame> frames, const SystemConfig& cfg,
                              std::size_t mu, bool wavelength_approx = true) {
    detail::require_private(cfg);
    if (mu >= frames.size() || mu >= cube.num_symbols()) throw std::invalid_argument("build_va_snapshot: symbol index out of range");
    const std::size_t mp = cfg.private_set.size(), nr = cube.num_rx();
    CVec z(static_cast<Eigen::Index>(mp * nr));
    for (std::size_t p = 0; p < mp; ++p) {
        const auto& pa = cfg.private_set[p];
        const cplx sym = frames[mu].transmit(static_cast<Eigen::Index>(pa.antenna), static_cast<Eigen::Index>(pa.subcarrier));
        if (std::abs(sym) == 0.0) throw NumericalError("build_va_snapshot: zero private symbol");
        for (std::size_t m = 0; m < nr; ++m) {
            const std::size_t idx = wavelength_approx ? m * mp + p : p * nr + m;
            z[static_cast<Eigen::Index>(idx)] = cube(m, pa.subcarrier, mu) / sym;
        }
    }
    return z;
}

/// Column for angle theta and range R in the layout of build_va_snapshot.
inline CVec va_atom(double angle_rad, double range_m, const SystemConfig& cfg, bool wavelength_approx = true) {
    detail::require_private(cfg);
    const std::size_t mp = cfg.private_set.size(), nr = cfg.num_radar_rx;
    const double s = std::sin(angle_rad);
    CVec col(static_cast<Eigen::Index>(mp * nr));
    for (std::size_t p = 0; p < mp; ++p) {
        const auto& pa = cfg.private_set[p];
        const double f = wavelength_approx ? cfg.carrier_freq_hz : cfg.subcarrier_freq(pa.subcarrier);
        const double range_phase = -2.0 * kPi * static_cast<double>(pa.subcarrier) * cfg.subcarrier_spacing_hz * 2.0 * range_m / kSpeedOfLight;
        for (std::size_t m = 0; m < nr; ++m) {
            const double path = static_cast<double>(m) * cfg.radar_rx_spacing_m + static_cast<double>(pa.antenna) * cfg.tx_spacing_m;
            const std::size_t idx = wavelength_approx ? m * mp + p : p * nr + m;
            col[static_cast<Eigen::Index>(idx)] = std::polar(1.0, -2.0 * kPi * path * s * f / kSpeedOfLight + range_phase);
        }
    }
    return col;
}

struct SsrProblem {
    CMat z;  // one column per measurement vector
    NormalizedDictionary dictionary;
    std::vector<double> angle_grid;  // radians
    std::vector<double> ranges;      // metres
    bool wavelength_approx = true;

    std::size_t num_angles() const { return angle_grid.size(); }
    std::size_t num_ranges() const { return ranges.size(); }
    std::size_t column(std::size_t angle_idx, std::size_t range_idx) const { return angle_idx * ranges.size() + range_idx; }
    std::size_t angle_index(std::size_t col) const { return col / ranges.size(); }
    std::size_t range_index(std::size_t col) const { return col % ranges.size(); }
};

/// One-degree grid on [lo, hi] in degrees, returned in radians.
inline std::vector<double> angle_grid_deg(double lo = -90.0, double hi = 90.0, double step = 1.0) {
    std::vector<double> g;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) g.push_back(deg2rad(lo + static_cast<double>(k) * step));
    return g;
}

/// Columns ordered angle-major: column (i, j) = i N + j.
inline SsrProblem build_ssr_dictionary(const std::vector<double>& angle_grid, const std::vector<double>& ranges,
                                       const SystemConfig& cfg, bool wavelength_approx = true) {
    detail::require_private(cfg);
    if (ranges.empty()) throw std::invalid_argument("build_ssr_dictionary: at least one range estimate required");
    if (angle_grid.empty()) throw std::invalid_argument("build_ssr_dictionary: empty angle grid");
    if (!std::is_sorted(angle_grid.begin(), angle_grid.end()))
        throw std::invalid_argument("build_ssr_dictionary: angle grid must be sorted");
    const std::size_t len = cfg.private_set.size() * cfg.num_radar_rx;
    CMat raw(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(angle_grid.size() * ranges.size()));
    SsrProblem prob;
    prob.angle_grid = angle_grid;
    prob.ranges = ranges;
    prob.wavelength_approx = wavelength_approx;
    for (std::size_t i = 0; i < angle_grid.size(); ++i)
        for (std::size_t j = 0; j < ranges.size(); ++j)
            raw.col(static_cast<Eigen::Index>(prob.column(i, j))) = va_atom(angle_grid[i], ranges[j], cfg, wavelength_approx);
    prob.dictionary = normalize_columns(raw);
    return prob;
}

struct SsrAtom {
    std::size_t angle_index = 0;
    std::size_t range_index = 0;
    double angle_rad = 0.0;
    double range_m = 0.0;
    cplx amplitude{};       // first measurement column
    double strength = 0.0;  // row norm across all measurement columns
};

/// Solves the problem and, when `merge_adjacent` is set, collapses atoms on
/// neighbouring grid angles at the same range into the strongest one.
inline std::vector<SsrAtom> solve_ssr(const SsrProblem& prob, const SparseParams& params, bool merge_adjacent,
                                      SparseSolution* raw = nullptr) {
    const SparseSolution sol = sparse_solve(prob.dictionary, prob.z, params);
    if (raw) *raw = sol;
    std::vector<SsrAtom> atoms;
    for (std::size_t k = 0; k < sol.support.size(); ++k) {
        const std::size_t c = sol.support[k];
        atoms.push_back({prob.angle_index(c), prob.range_index(c), prob.angle_grid[prob.angle_index(c)],
                         prob.ranges[prob.range_index(c)], sol.amplitudes[k], sol.row_norms[k]});
    }
    if (!merge_adjacent) return atoms;
    std::vector<SsrAtom> order = atoms;
    std::stable_sort(order.begin(), order.end(), [](const SsrAtom& a, const SsrAtom& b) {
        return a.strength > b.strength;
    });
    std::vector<SsrAtom> kept;
    for (const auto& a : order) {
        bool absorbed = false;
        for (const auto& k : kept)
            if (k.range_index == a.range_index &&
                (k.angle_index > a.angle_index ? k.angle_index - a.angle_index : a.angle_index - k.angle_index) <= 1)
                absorbed = true;
        if (!absorbed) kept.push_back(a);
    }
    std::sort(kept.begin(), kept.end(), [](const SsrAtom& a, const SsrAtom& b) {
        return a.angle_index != b.angle_index ? a.angle_index < b.angle_index : a.range_index < b.range_index;
    });
    return kept;
}

// ---------------------------------------------------------------------------
// Iterative angle-range estimation

enum class Provenance { Coarse, SsrRefined };

/// SingleSymbol solves on the snapshot of one OFDM symbol. Subspace stacks the
/// snapshots of every symbol and keeps the dominant left singular vectors
/// (scaled by their singular values) as jointly sparse measurements.
enum class SnapshotMode { SingleSymbol, Subspace };

inline const char* to_string(Provenance p) { return p == Provenance::Coarse ? "coarse" : "ssr-refined"; }

struct TargetEstimate {
    double angle_deg = 0.0;
    double range_m = 0.0;
    double velocity_mps = 0.0;
    cplx beta_hat{};
    Provenance provenance = Provenance::Coarse;
    std::size_t iteration_found = 0;
    std::size_t range_index = 0;
};

struct EstimatorParams {
    double angle_mads = 10.0;
    double range_mads = 10.0;
    std::size_t zero_pad_factor = 8;
    std::size_t symbol = 0;  // OFDM symbol used for angle and range estimation
    bool wavelength_approx = true;
    std::vector<double> angle_grid = angle_grid_deg();
    SparseParams sparse{};
    SnapshotMode snapshot_mode = SnapshotMode::Subspace;
    std::size_t max_subspace_rank = 8;
    bool noise_aware_tolerance = true;
    double noise_var = 0.0;        // radar noise variance, used when noise_aware_tolerance is set
    double tolerance_factor = 1.5;  // residual energy allowed, in units of the expected noise energy
    bool merge_adjacent = true;
    std::size_t range_merge_cells = 2;  // range peaks this close to a known one are the same target
    std::size_t max_iterations = 5;
    bool estimate_doppler = true;
};

struct IterationRecord {
    std::size_t iteration = 0;
    std::vector<double> ranges_m;
    std::vector<SsrAtom> atoms;
    double residual_norm = 0.0;
    std::size_t solver_iterations = 0;
    bool ranges_changed = false;
};

struct EstimationResult {
    std::vector<AngleBin> coarse_bins;
    std::vector<TargetEstimate> coarse_estimates;
    std::vector<TargetEstimate> estimates;
    std::vector<IterationRecord> log;
    std::size_t iterations = 0;  // number of SSR solves, at least 1 when refinement ran
    bool converged = true;
    bool refined = false;
};

namespace detail {

inline TargetEstimate make_estimate(const RadarCube& cube, std::span<const SymbolFrame> frames, const SystemConfig& cfg,
                                    const Look& look, std::size_t range_index, Provenance prov, std::size_t iteration,
                                    const EstimatorParams& params) {
    TargetEstimate e;
    e.angle_deg = rad2deg(look.angle_rad);
    e.range_index = range_index;
    e.range_m = range_of_index(range_index, cfg);
    e.provenance = prov;
    e.iteration_found = iteration;
    if (params.estimate_doppler) {
        const auto d = doppler_estimate(peak_values(cube, look, range_index, frames, cfg), cfg, params.zero_pad_factor);
        e.velocity_mps = d.velocity_mps;
        e.beta_hat = d.beta_hat;
    }
    return e;
}

inline double mean_private_power(std::span<const SymbolFrame> frames, const SystemConfig& cfg, std::size_t mu) {
    double acc = 0.0;
    for (const auto& pa : cfg.private_set)
        acc += std::norm(frames[mu].transmit(static_cast<Eigen::Index>(pa.antenna), static_cast<Eigen::Index>(pa.subcarrier)));
    return acc / static_cast<double>(cfg.private_set.size());
}

struct VaMeasurements {
    CMat y;
    double noise_energy = 0.0;  // expected noise energy in y
    std::size_t rank = 1;
};

inline VaMeasurements va_measurements(const RadarCube& cube, std::span<const SymbolFrame> frames,
                                      const SystemConfig& cfg, const EstimatorParams& params) {
    VaMeasurements out;
    if (params.snapshot_mode == SnapshotMode::SingleSymbol) {
        out.y = build_va_snapshot(cube, frames, cfg, params.symbol, params.wavelength_approx);
        if (params.noise_var > 0.0)
            out.noise_energy = static_cast<double>(out.y.rows()) * params.noise_var / mean_private_power(frames, cfg, params.symbol);
        return out;
    }
    const std::size_t np = cube.num_symbols();
    const auto len = static_cast<Eigen::Index>(cfg.private_set.size() * cube.num_rx());
    CMat stack(len, static_cast<Eigen::Index>(np));
    double var_z = 0.0;
    for (std::size_t mu = 0; mu < np; ++mu) {
        stack.col(static_cast<Eigen::Index>(mu)) = build_va_snapshot(cube, frames, cfg, mu, params.wavelength_approx);
        if (params.noise_var > 0.0) var_z += params.noise_var / mean_private_power(frames, cfg, mu);
    }
    var_z /= static_cast<double>(np);
    Eigen::BDCSVD<CMat> svd(stack, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    // Largest singular value expected from noise alone.
    const double noise_edge = std::sqrt(var_z) * (std::sqrt(static_cast<double>(len)) + std::sqrt(static_cast<double>(np)));
    std::size_t rank = 0;
    const std::size_t cap = std::min<std::size_t>(params.max_subspace_rank, static_cast<std::size_t>(sv.size()));
    while (rank < cap && sv[static_cast<Eigen::Index>(rank)] > std::max(1.2 * noise_edge, 1e-6 * sv[0])) ++rank;
    rank = std::max<std::size_t>(rank, 1);
    out.rank = rank;
    const auto r = static_cast<Eigen::Index>(rank);
    out.y = svd.matrixU().leftCols(r) * sv.head(r).asDiagonal();
    out.noise_energy = static_cast<double>(rank) * noise_edge * noise_edge;
    return out;
}

}  // namespace detail

/// Coarse angles on all subcarriers, then alternate range estimation and
/// sparse angle recovery on the virtual array until the range set stops
/// growing (the SSR result is a function of the range set, so an unchanged
/// set reproduces the previous solution).
inline EstimationResult iterative_angle_range(const RadarCube& cube, std::span<const SymbolFrame> frames,
                                              const SystemConfig& cfg, const EstimatorParams& params = {}) {
    if (frames.size() < cube.num_symbols()) throw std::invalid_argument("iterative_angle_range: missing symbol frames");
    const std::size_t mu = params.symbol;
    EstimationResult res;
    res.coarse_bins = coarse_angle_estimate(cube, mu, cfg, params.angle_mads);

    auto near_known = [&](const std::set<std::size_t>& known, std::size_t index) {
        return std::any_of(known.begin(), known.end(), [&](std::size_t l) {
            return (l > index ? l - index : index - l) <= params.range_merge_cells;
        });
    };

    std::vector<RangePeak> coarse_peaks;
    for (const auto& bin : res.coarse_bins)
        for (auto& pk : range_estimate(cube, bin, frames, cfg, mu, params.range_mads)) {
            res.coarse_estimates.push_back(detail::make_estimate(cube, frames, cfg, pk.look, pk.index, Provenance::Coarse, 0, params));
            coarse_peaks.push_back(std::move(pk));
        }
    // Strongest peaks claim their neighbourhood first.
    std::stable_sort(coarse_peaks.begin(), coarse_peaks.end(),
                     [](const RangePeak& a, const RangePeak& b) { return a.magnitude > b.magnitude; });
    std::set<std::size_t> range_set;
    for (const auto& pk : coarse_peaks)
        if (!near_known(range_set, pk.index)) range_set.insert(pk.index);

    if (cfg.private_set.empty()) {
        res.estimates = res.coarse_estimates;
        return res;
    }
    res.refined = true;
    res.iterations = 1;
    if (range_set.empty()) return res;

    const detail::VaMeasurements meas = detail::va_measurements(cube, frames, cfg, params);
    const CMat& z = meas.y;
    SparseParams sp = params.sparse;
    if (params.noise_aware_tolerance && params.noise_var > 0.0 && z.norm() > 0.0)
        sp.residual_tol = std::sqrt(params.tolerance_factor * meas.noise_energy) / z.norm();

    std::vector<SsrAtom> atoms;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> first_seen;  // (angle idx, range idx) -> iteration
    res.converged = false;
    std::size_t solves = 0;
    while (solves < params.max_iterations) {
        std::vector<double> ranges;
        std::vector<std::size_t> indices(range_set.begin(), range_set.end());
        for (auto l : indices) ranges.push_back(range_of_index(l, cfg));
        SsrProblem prob = build_ssr_dictionary(params.angle_grid, ranges, cfg, params.wavelength_approx);
        prob.z = z;
        SparseParams local = sp;
        local.max_sparsity = std::min<std::size_t>(sp.max_sparsity, static_cast<std::size_t>(z.rows()) - 1);
        SparseSolution raw;
        atoms = solve_ssr(prob, local, params.merge_adjacent, &raw);
        ++solves;
        for (const auto& a : atoms) first_seen.emplace(std::make_pair(a.angle_index, indices[a.range_index]), solves);

        IterationRecord rec;
        rec.iteration = solves;
        rec.ranges_m = ranges;
        rec.atoms = atoms;
        rec.residual_norm = raw.residual_norm;
        rec.solver_iterations = raw.iterations;

        std::set<std::size_t> next = range_set;
        std::set<std::size_t> seen_angles;
        for (const auto& a : atoms) {
            if (!seen_angles.insert(a.angle_index).second) continue;
            for (const auto& pk : range_estimate(cube, Look::steered(a.angle_rad), frames, cfg, mu, params.range_mads)) {
                if (!near_known(next, pk.index)) next.insert(pk.index);
            }
        }
        rec.ranges_changed = next != range_set;
        res.log.push_back(rec);
        if (!rec.ranges_changed) {
            res.converged = true;
            break;
        }
        range_set = std::move(next);
    }
    res.iterations = solves;

    // Map atoms back to absolute range indices from the last solved problem.
    const std::vector<std::size_t> last_indices = [&] {
        std::vector<std::size_t> v;
        for (double r : res.log.back().ranges_m)
            v.push_back(static_cast<std::size_t>(std::llround(r / resolutions(cfg).range_res_m)));
        return v;
    }();
    for (const auto& a : atoms) {
        const std::size_t l = last_indices[a.range_index];
        res.estimates.push_back(detail::make_estimate(cube, frames, cfg, Look::steered(a.angle_rad), l, Provenance::SsrRefined,
                                                      first_seen[{a.angle_index, l}], params));
    }
    if (res.estimates.empty()) res.estimates = res.coarse_estimates;
    return res;
}

}  // namespace ssdfrc
