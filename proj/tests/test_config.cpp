// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include "ssdfrc/config.hpp"
#include "ssdfrc/rng.hpp"

using namespace ssdfrc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("steering vector is all ones at broadside", "[config]") {
    const auto cfg = SystemConfig::reference();
    for (std::size_t i : {0u, 17u, 511u}) {
        const CVec a = steering_vector(ArrayKind::RadarRx, 0.0, i, cfg);
        REQUIRE(a.size() == 32);
        REQUIRE((a - CVec::Ones(32)).norm() < 1e-15);
    }
}

TEST_CASE("two-element receive array at 30 degrees", "[config]") {
    auto cfg = SystemConfig::reference();
    cfg.num_radar_rx = 2;
    const CVec a = steering_vector(ArrayKind::RadarRx, deg2rad(30.0), 0, cfg);
    // exp(-j 2 pi (lambda/2) sin 30 / lambda) = exp(-j pi / 2)
    REQUIRE(std::abs(a[0] - cplx(1, 0)) < 1e-12);
    REQUIRE(std::abs(a[1] - cplx(0, -1)) < 1e-12);
}

TEST_CASE("subcarrier dependence of the transmit steering vector", "[config]") {
    const auto cfg = SystemConfig::reference();
    const double th = deg2rad(30.0);
    const CVec a0 = steering_vector(ArrayKind::Tx, th, 0, cfg);
    const CVec a1 = steering_vector(ArrayKind::Tx, th, 511, cfg);
    for (Eigen::Index n = 0; n < a0.size(); ++n) {
        const cplx expected = std::polar(1.0, -2.0 * kPi * static_cast<double>(n) * cfg.tx_spacing_m * std::sin(th) *
                                                  cfg.subcarrier_spacing_hz * 511.0 / kSpeedOfLight);
        REQUIRE(std::abs(a1[n] / a0[n] - expected) < 1e-12);
    }
}

TEST_CASE("steering vector has unit modulus", "[config][property]") {
    auto cfg = SystemConfig::reference();
    Rng rng(7);
    std::uniform_real_distribution<double> ang(-1.5, 1.5);
    std::uniform_int_distribution<std::size_t> sub(0, cfg.num_subcarriers - 1);
    for (int k = 0; k < 200; ++k) {
        const CVec a = steering_vector(ArrayKind::CommRx, ang(rng), sub(rng), cfg);
        REQUIRE(a.size() == 64);
        REQUIRE((a.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("steering vector rejects bad inputs", "[config]") {
    const auto cfg = SystemConfig::reference();
    REQUIRE_THROWS_AS(steering_vector(ArrayKind::Tx, 0.1, 512, cfg), std::invalid_argument);
    REQUIRE_THROWS_AS(steering_vector(static_cast<ArrayKind>(9), 0.1, 0, cfg), std::invalid_argument);
}

TEST_CASE("resolution formulas for the reference configuration", "[config]") {
    const auto cfg = SystemConfig::reference();
    const Resolutions r = resolutions(cfg);
    const double c = 2.99792458e8;
    REQUIRE_THAT(r.range_res_m, WithinRel(c / (2.0 * 512 * 0.25e6), 1e-12));
    REQUIRE_THAT(r.range_max_m, WithinRel(c / (2.0 * 0.25e6), 1e-12));
    REQUIRE_THAT(r.vel_res_mps, WithinRel(c / (2.0 * 24e9 * 256 * 5e-6), 1e-12));
    REQUIRE_THAT(r.vel_max_mps, WithinRel(c / (2.0 * 24e9 * 5e-6), 1e-12));
    REQUIRE(r.range_max_m == static_cast<double>(cfg.num_subcarriers) * r.range_res_m);
    REQUIRE_THAT(r.range_res_m, WithinRel(1.171875, 1e-3));
    REQUIRE_THAT(r.range_max_m, WithinRel(599.58, 1e-3));
    REQUIRE_THAT(r.vel_res_mps, WithinRel(4.8828, 1e-3));
    REQUIRE_THAT(r.vel_max_mps, WithinRel(1249.9, 1e-3));
}

TEST_CASE("doubling the subcarrier count halves the range resolution", "[config]") {
    auto cfg = SystemConfig::reference();
    const Resolutions a = resolutions(cfg);
    cfg.num_subcarriers *= 2;
    const Resolutions b = resolutions(cfg);
    REQUIRE_THAT(b.range_res_m, WithinRel(a.range_res_m / 2, 1e-14));
    REQUIRE(b.range_max_m == a.range_max_m);
}

TEST_CASE("config validation", "[config]") {
    auto cfg = SystemConfig::reference(8, 8);
    REQUIRE_NOTHROW(cfg.validate());
    REQUIRE(cfg.cp_samples() == 128);
    REQUIRE(cfg.private_set[3] == PrivateAssignment{3, 3});

    auto bad = cfg;
    bad.private_set.push_back({9, 0});
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);  // more than N_t entries

    bad = cfg;
    bad.private_set[1].subcarrier = 0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.private_set[1].antenna = 8;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.ofdm_symbol_duration_s = 4e-6;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.radar_noise_var = -1;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = cfg;
    bad.tx_spacing_m = 0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("seed derivation is deterministic and path sensitive", "[config][rng]") {
    REQUIRE(derive_seed(1, Stream::Bits, {3}) == derive_seed(1, Stream::Bits, {3}));
    REQUIRE(derive_seed(1, Stream::Bits, {3}) != derive_seed(1, Stream::Bits, {4}));
    REQUIRE(derive_seed(1, Stream::Bits, {3}) != derive_seed(2, Stream::Bits, {3}));
    REQUIRE(derive_seed(1, Stream::Bits, {3}) != derive_seed(1, Stream::RadarNoise, {3}));
}

TEST_CASE("complex Gaussian draws have the requested moments", "[rng]") {
    Rng rng(11);
    cplx mean{};
    double var = 0;
    const int n = 200000;
    std::vector<cplx> v(n);
    for (auto& x : v) {
        x = complex_coefficient(rng, {0.1, 0.0}, 0.01);
        mean += x;
    }
    mean /= n;
    for (const auto& x : v) var += std::norm(x - mean);
    var /= n;
    REQUIRE_THAT(mean.real(), WithinAbs(0.1, 1e-3));
    REQUIRE_THAT(mean.imag(), WithinAbs(0.0, 1e-3));
    REQUIRE_THAT(var, WithinRel(0.01, 0.02));
}
