// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include "ssdfrc/channel.hpp"
#include "ssdfrc/comm_rx.hpp"

using namespace ssdfrc;

namespace {

SystemConfig small_config(std::size_t m = 0) {
    auto cfg = SystemConfig::reference(4, m);
    cfg.num_subcarriers = 16;
    cfg.num_comm_rx = 8;
    return cfg;
}

CMat random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    CMat p(r, c);
    for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = complex_gaussian(rng, 1.0);
    return p;
}

}  // namespace

TEST_CASE("least-squares residual is orthogonal to the effective channel", "[comm_rx][property]") {
    Rng rng(1);
    for (int k = 0; k < 10; ++k) {
        const CMat h = random_matrix(rng, 8, 4);
        const CMat P = random_matrix(rng, 4, 4);
        const CVec r = random_matrix(rng, 8, 1);
        const CVec q = ls_estimate_shared(r, h, P);
        REQUIRE(((h * P).adjoint() * (r - h * P * q)).norm() < 1e-10 * r.norm());
    }
}

TEST_CASE("noiseless frames decode without errors", "[comm_rx]") {
    for (std::size_t m : {0u, 1u, 4u}) {
        const auto cfg = small_config(m);
        const auto ch = draw_comm_channel(cfg, {}, 32, 2 + m);
        Rng rng(3 + m);
        const CMat P = random_matrix(rng, 4, 4);
        for (int t = 0; t < 5; ++t) {
            const Bits bits = random_bits(rng, bits_per_ofdm_symbol(cfg));
            const auto frame = build_symbol_frame(bits, P, cfg, 0);
            const CMat r = apply_comm_channel(ch, frame, 0.0, 0);
            const auto dec = decode_frame(r, ch, P, cfg, cfg.private_set, frame.private_scale);
            REQUIRE(dec.bits == bits);
            REQUIRE(ber(bits, dec.bits) == 0.0);
            for (double res : dec.residual_norms) REQUIRE(res < 1e-9 * r.norm());
            const auto counts = count_errors(frame.source, dec.symbols, cfg);
            REQUIRE(counts.shared_errors + counts.private_errors == 0);
            REQUIRE(counts.private_bits == 2 * m);
            REQUIRE(counts.shared_bits == 2 * 4 * (16 - m));
        }
    }
}

TEST_CASE("private subcarriers are detected from a noiseless frame", "[comm_rx]") {
    const auto cfg = small_config(2);
    const auto ch = draw_comm_channel(cfg, {}, 32, 9);
    Rng rng(10);
    const auto frame = build_symbol_frame(random_bits(rng, bits_per_ofdm_symbol(cfg)), CMat::Identity(4, 4), cfg, 0);
    const CMat r = apply_comm_channel(ch, frame, 0.0, 0);
    REQUIRE(detect_private(r, ch) == cfg.private_set);

    auto single = SystemConfig::reference(1, 1);
    single.num_subcarriers = 4;
    single.num_comm_rx = 2;
    const auto ch1 = draw_comm_channel(single, {}, 4, 1);
    REQUIRE(detect_private(CMat::Ones(2, 4), ch1).empty());
}

TEST_CASE("private symbol decision", "[comm_rx]") {
    Rng rng(11);
    const CMat h = random_matrix(rng, 6, 3);
    for (const cplx& s : qpsk::points()) {
        const CVec r = h.col(2) * (2.0 * s);
        REQUIRE(decode_private(r, h, 2, 2.0) == s);
    }
    REQUIRE_THROWS_AS(decode_private(CVec::Zero(6), h, 3, 1.0), std::invalid_argument);
}

TEST_CASE("bit error rate", "[comm_rx]") {
    const Bits a{0, 1, 1, 0}, b{0, 1, 0, 0};
    REQUIRE(ber(a, b) == 0.25);
    REQUIRE(ber(a, a) == 0.0);
    REQUIRE(ber(Bits{}, Bits{}) == 0.0);
    REQUIRE_THROWS_AS(ber(a, Bits{0}), std::invalid_argument);
}

TEST_CASE("decoder errors", "[comm_rx]") {
    const auto cfg = small_config();
    const auto ch = draw_comm_channel(cfg, {}, 32, 12);
    try {
        (void)decode_frame(CMat::Zero(8, 16), ch, CMat::Zero(4, 4), cfg, {}, 1.0);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        REQUIRE(std::string(e.what()).find("subcarrier 0") != std::string::npos);
    }
    auto few = cfg;
    few.num_comm_rx = 2;
    const auto ch2 = draw_comm_channel(few, {}, 4, 1);
    REQUIRE_THROWS_AS(decode_frame(CMat::Zero(2, 16), ch2, CMat::Identity(4, 4), few, {}, 1.0), std::invalid_argument);
}

TEST_CASE("BER sweep", "[comm_rx]") {
    const auto cfg = small_config(2);
    const auto ch = draw_comm_channel(cfg, {}, 32, 13);
    const CMat P = CMat::Identity(4, 4);
    REQUIRE(std::abs(comm_noise_var_for_snr(ch, P, cfg, 0.0) - mean_received_power(ch, P, cfg)) < 1e-15);
    const std::vector<double> snr{-10.0, 40.0};
    const auto pts = simulate_ber(cfg, ch, P, snr, 20, 5);
    REQUIRE(pts.size() == 2);
    REQUIRE(pts[0].counts.total_ber() > 0.01);
    REQUIRE(pts[1].counts.total_ber() == 0.0);
    REQUIRE(pts[0].counts.shared_bits == 20 * 2 * 4 * 14);
    REQUIRE(pts[0].counts.private_bits == 20 * 2 * 2);
    const auto again = simulate_ber(cfg, ch, P, snr, 20, 5);
    REQUIRE(again[0].counts.shared_errors == pts[0].counts.shared_errors);
    REQUIRE(again[0].counts.private_errors == pts[0].counts.private_errors);
    REQUIRE_THROWS_AS(simulate_ber(cfg, ch, P, snr, 0, 5), std::invalid_argument);
}
