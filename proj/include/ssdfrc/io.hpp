// SPDX-License-Identifier: Apache-2.0
//
// File formats: complex-matrix binary dumps, JSON configuration and CSV
// tables.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "channel.hpp"
#include "config.hpp"
#include "estimation.hpp"
#include "waveform.hpp"

namespace ssdfrc {

using Json = nlohmann::json;

/// Malformed or inconsistent configuration input.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Binary dumps
//
// 32-byte little-endian header followed by row-major interleaved (re, im)
// float64 values:
//   u32 magic 'SDFR', u16 kind, u16 version, u32 dim0, u32 dim1, u32 dim2,
//   u32 reserved, u64 aux
// Frames: (N_t, N_s, 1, aux = mu). Radar cube: (N_p, N_s, N_r, aux = seed),
// stored as [mu][i][m]. Plain matrix: (rows, cols, 1, aux = 0).

enum class DumpKind : std::uint16_t { Matrix = 1, Frame = 2, RadarCube = 3 };

struct DumpHeader {
    DumpKind kind = DumpKind::Matrix;
    std::uint32_t dims[3] = {0, 0, 1};
    std::uint64_t aux = 0;
};

inline constexpr std::uint32_t kDumpMagic = 0x52464453;  // "SDFR"
inline constexpr std::uint16_t kDumpVersion = 1;

namespace detail {

template <class T>
void put_le(std::string& buf, T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t b = 0; b < sizeof(T); ++b) buf.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

template <class T>
T get_le(const unsigned char* p) {
    std::make_unsigned_t<T> u = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) u |= static_cast<std::make_unsigned_t<T>>(p[b]) << (8 * b);
    return static_cast<T>(u);
}

inline void put_f64(std::string& buf, double x) { put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(x)); }

}  // namespace detail

inline std::string encode_dump(const DumpHeader& h, const cplx* data, std::size_t count) {
    std::string buf;
    buf.reserve(32 + 16 * count);
    detail::put_le<std::uint32_t>(buf, kDumpMagic);
    detail::put_le<std::uint16_t>(buf, static_cast<std::uint16_t>(h.kind));
    detail::put_le<std::uint16_t>(buf, kDumpVersion);
    for (auto d : h.dims) detail::put_le<std::uint32_t>(buf, d);
    detail::put_le<std::uint32_t>(buf, 0);
    detail::put_le<std::uint64_t>(buf, h.aux);
    for (std::size_t k = 0; k < count; ++k) {
        detail::put_f64(buf, data[k].real());
        detail::put_f64(buf, data[k].imag());
    }
    return buf;
}

struct DecodedDump {
    DumpHeader header;
    std::vector<cplx> values;
};

inline DecodedDump decode_dump(const std::string& buf) {
    if (buf.size() < 32) throw std::invalid_argument("decode_dump: truncated header");
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    if (detail::get_le<std::uint32_t>(p) != kDumpMagic) throw std::invalid_argument("decode_dump: bad magic");
    DecodedDump out;
    out.header.kind = static_cast<DumpKind>(detail::get_le<std::uint16_t>(p + 4));
    if (detail::get_le<std::uint16_t>(p + 6) != kDumpVersion) throw std::invalid_argument("decode_dump: unsupported version");
    std::uint64_t count = 1;
    for (int d = 0; d < 3; ++d) {
        out.header.dims[d] = detail::get_le<std::uint32_t>(p + 8 + 4 * d);
        count *= out.header.dims[d];
    }
    out.header.aux = detail::get_le<std::uint64_t>(p + 24);
    if (buf.size() != 32 + 16 * count) throw std::invalid_argument("decode_dump: payload size does not match header");
    out.values.resize(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        const double re = std::bit_cast<double>(detail::get_le<std::uint64_t>(p + 32 + 16 * k));
        const double im = std::bit_cast<double>(detail::get_le<std::uint64_t>(p + 40 + 16 * k));
        out.values[k] = {re, im};
    }
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Row-major copy of an Eigen (column-major) matrix.
inline std::vector<cplx> row_major(const CMat& m) {
    std::vector<cplx> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
}

inline CMat from_row_major(const std::vector<cplx>& v, std::size_t rows, std::size_t cols) {
    CMat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r * cols + c];
    return m;
}

inline std::string encode_matrix(const CMat& m) {
    const auto v = row_major(m);
    return encode_dump({DumpKind::Matrix, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols()), 1}, 0},
                       v.data(), v.size());
}

inline CMat decode_matrix(const std::string& buf) {
    const DecodedDump d = decode_dump(buf);
    if (d.header.kind != DumpKind::Matrix || d.header.dims[2] != 1) throw std::invalid_argument("decode_matrix: not a matrix dump");
    return from_row_major(d.values, d.header.dims[0], d.header.dims[1]);
}

/// Transmit matrix D of one frame.
inline std::string encode_frame(const SymbolFrame& f) {
    const auto v = row_major(f.transmit);
    return encode_dump({DumpKind::Frame,
                        {static_cast<std::uint32_t>(f.transmit.rows()), static_cast<std::uint32_t>(f.transmit.cols()), 1},
                        f.symbol_index},
                       v.data(), v.size());
}

inline std::string encode_cube(const RadarCube& cube, std::uint64_t seed) {
    return encode_dump({DumpKind::RadarCube,
                        {static_cast<std::uint32_t>(cube.num_symbols()), static_cast<std::uint32_t>(cube.num_subcarriers()),
                         static_cast<std::uint32_t>(cube.num_rx())},
                        seed},
                       cube.data().data(), cube.data().size());
}

inline RadarCube decode_cube(const std::string& buf, std::uint64_t* seed = nullptr) {
    const DecodedDump d = decode_dump(buf);
    if (d.header.kind != DumpKind::RadarCube) throw std::invalid_argument("decode_cube: not a radar cube dump");
    RadarCube cube(d.header.dims[2], d.header.dims[1], d.header.dims[0]);
    std::copy(d.values.begin(), d.values.end(), cube.data().begin());
    if (seed) *seed = d.header.aux;
    return cube;
}

// ---------------------------------------------------------------------------
// JSON configuration

namespace detail {

/// Rejects keys of `obj` that are not in `allowed`.
inline void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void read_opt(const Json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace detail

/// SystemConfig from JSON. Antenna spacings may be given in metres
/// (`tx_spacing_m`) or in carrier wavelengths (`tx_spacing_wavelengths`);
/// the default is half a wavelength. `num_private` selects the default
/// private set, `private_set` lists explicit [subcarrier, antenna] pairs.
inline SystemConfig system_config_from_json(const Json& j) {
    const std::string where = "system";
    detail::check_keys(j,
                       {"carrier_freq_hz", "subcarrier_spacing_hz", "num_subcarriers", "num_ofdm_symbols", "num_tx",
                        "num_radar_rx", "num_comm_rx", "tx_spacing_m", "radar_rx_spacing_m", "comm_rx_spacing_m",
                        "tx_spacing_wavelengths", "radar_rx_spacing_wavelengths", "comm_rx_spacing_wavelengths",
                        "ofdm_symbol_duration_s", "cp_duration_s", "radar_noise_var", "comm_noise_var", "num_private",
                        "private_set", "rng_seed"},
                       where);
    SystemConfig cfg;
    detail::read_opt(j, "carrier_freq_hz", cfg.carrier_freq_hz, where);
    detail::read_opt(j, "subcarrier_spacing_hz", cfg.subcarrier_spacing_hz, where);
    detail::read_opt(j, "num_subcarriers", cfg.num_subcarriers, where);
    detail::read_opt(j, "num_ofdm_symbols", cfg.num_ofdm_symbols, where);
    detail::read_opt(j, "num_tx", cfg.num_tx, where);
    detail::read_opt(j, "num_radar_rx", cfg.num_radar_rx, where);
    detail::read_opt(j, "num_comm_rx", cfg.num_comm_rx, where);
    detail::read_opt(j, "cp_duration_s", cfg.cp_duration_s, where);
    cfg.ofdm_symbol_duration_s = 1.0 / cfg.subcarrier_spacing_hz + cfg.cp_duration_s;
    detail::read_opt(j, "ofdm_symbol_duration_s", cfg.ofdm_symbol_duration_s, where);
    detail::read_opt(j, "radar_noise_var", cfg.radar_noise_var, where);
    detail::read_opt(j, "comm_noise_var", cfg.comm_noise_var, where);
    detail::read_opt(j, "rng_seed", cfg.rng_seed, where);

    const double lambda = cfg.wavelength();
    auto spacing = [&](const char* metres, const char* waves, double& out) {
        if (j.contains(metres) && j.contains(waves))
            throw ConfigError(where + ": give only one of " + metres + " and " + waves);
        double w = 0.5;
        detail::read_opt(j, waves, w, where);
        out = w * lambda;
        detail::read_opt(j, metres, out, where);
    };
    spacing("tx_spacing_m", "tx_spacing_wavelengths", cfg.tx_spacing_m);
    spacing("radar_rx_spacing_m", "radar_rx_spacing_wavelengths", cfg.radar_rx_spacing_m);
    spacing("comm_rx_spacing_m", "comm_rx_spacing_wavelengths", cfg.comm_rx_spacing_m);

    if (j.contains("num_private") && j.contains("private_set"))
        throw ConfigError(where + ": give only one of num_private and private_set");
    if (j.contains("num_private")) {
        std::size_t m = 0;
        detail::read_opt(j, "num_private", m, where);
        cfg.private_set = default_private_set(m);
    }
    if (j.contains("private_set")) {
        std::vector<std::array<std::size_t, 2>> pairs;
        detail::read_opt(j, "private_set", pairs, where);
        for (const auto& p : pairs) cfg.private_set.push_back({p[0], p[1]});
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline Json system_config_to_json(const SystemConfig& cfg) {
    Json j;
    j["carrier_freq_hz"] = cfg.carrier_freq_hz;
    j["subcarrier_spacing_hz"] = cfg.subcarrier_spacing_hz;
    j["num_subcarriers"] = cfg.num_subcarriers;
    j["num_ofdm_symbols"] = cfg.num_ofdm_symbols;
    j["num_tx"] = cfg.num_tx;
    j["num_radar_rx"] = cfg.num_radar_rx;
    j["num_comm_rx"] = cfg.num_comm_rx;
    j["tx_spacing_m"] = cfg.tx_spacing_m;
    j["radar_rx_spacing_m"] = cfg.radar_rx_spacing_m;
    j["comm_rx_spacing_m"] = cfg.comm_rx_spacing_m;
    j["ofdm_symbol_duration_s"] = cfg.ofdm_symbol_duration_s;
    j["cp_duration_s"] = cfg.cp_duration_s;
    j["radar_noise_var"] = cfg.radar_noise_var;
    j["comm_noise_var"] = cfg.comm_noise_var;
    Json ps = Json::array();
    for (const auto& p : cfg.private_set) ps.push_back({p.subcarrier, p.antenna});
    j["private_set"] = ps;
    j["rng_seed"] = cfg.rng_seed;
    return j;
}

/// Target list entries: {angle_deg, range_m, velocity_mps, beta_re, beta_im}.
inline std::vector<TargetRecord> targets_from_json(const Json& j) {
    if (!j.is_array()) throw ConfigError("targets: expected an array");
    std::vector<TargetRecord> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string where = "targets[" + std::to_string(k) + "]";
        detail::check_keys(j[k], {"angle_deg", "range_m", "velocity_mps", "beta_re", "beta_im"}, where);
        double deg = 0.0, re = 1.0, im = 0.0;
        TargetRecord t;
        detail::read_opt(j[k], "angle_deg", deg, where);
        detail::read_opt(j[k], "range_m", t.range_m, where);
        detail::read_opt(j[k], "velocity_mps", t.velocity_mps, where);
        detail::read_opt(j[k], "beta_re", re, where);
        detail::read_opt(j[k], "beta_im", im, where);
        t.angle_rad = deg2rad(deg);
        t.beta = {re, im};
        out.push_back(t);
    }
    return out;
}

inline Json target_to_json(const TargetRecord& t) {
    return {{"angle_deg", rad2deg(t.angle_rad)}, {"range_m", t.range_m}, {"velocity_mps", t.velocity_mps},
            {"beta_re", t.beta.real()}, {"beta_im", t.beta.imag()}};
}

inline Json estimate_to_json(const TargetEstimate& e) {
    return {{"angle_deg", e.angle_deg},           {"range_m", e.range_m},   {"velocity_mps", e.velocity_mps},
            {"beta_re", e.beta_hat.real()},        {"beta_im", e.beta_hat.imag()},
            {"provenance", to_string(e.provenance)}, {"iteration", e.iteration_found}};
}

inline Json iteration_to_json(const IterationRecord& r) {
    Json atoms = Json::array();
    for (const auto& a : r.atoms)
        atoms.push_back({{"angle_deg", rad2deg(a.angle_rad)}, {"range_m", a.range_m}, {"strength", a.strength}});
    return {{"iteration", r.iteration},          {"ranges_m", r.ranges_m}, {"atoms", atoms},
            {"residual_norm", r.residual_norm}, {"solver_iterations", r.solver_iterations},
            {"ranges_changed", r.ranges_changed}};
}

// ---------------------------------------------------------------------------
// CSV

/// Formats a double with enough digits to round-trip.
inline std::string fmt_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    template <class... Ts>
    void row(const Ts&... cells) {
        std::vector<std::string> r;
        (r.push_back(cell(cells)), ...);
        if (r.size() != header_.size()) throw std::invalid_argument("CsvTable: row width does not match header");
        rows_.push_back(std::move(r));
    }

    const std::vector<std::string>& header() const { return header_; }
    std::size_t size() const { return rows_.size(); }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t k = 0; k < r.size(); ++k) {
                if (k) out += ',';
                out += r[k];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    void write(const std::filesystem::path& path) const { write_file(path, str()); }

private:
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(double x) { return fmt_num(x); }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I x) {
        return std::to_string(x);
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace ssdfrc
