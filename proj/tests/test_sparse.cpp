// SPDX-License-Identifier: Apache-2.0

#include "catch_amalgamated.hpp"

#include "ssdfrc/rng.hpp"
#include "ssdfrc/sparse.hpp"

using namespace ssdfrc;

namespace {

CMat gaussian_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    CMat m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = complex_gaussian(rng, 1.0);
    return m;
}

SparseParams params(SparseSolver s) {
    SparseParams p;
    p.solver = s;
    p.max_sparsity = 4;
    return p;
}

}  // namespace

TEST_CASE("column normalization", "[sparse]") {
    CMat raw(2, 2);
    raw << cplx(3.0, 0.0), cplx(0.0, 1.0), cplx(0.0, 4.0), cplx(0.0, 0.0);
    const auto d = normalize_columns(raw);
    REQUIRE(std::abs(d.scale[0] - 5.0) < 1e-15);
    REQUIRE(std::abs(d.scale[1] - 1.0) < 1e-15);
    REQUIRE(std::abs(d.columns.col(0).norm() - 1.0) < 1e-15);
}

TEST_CASE("a scaled dictionary column is recovered exactly", "[sparse]") {
    for (auto solver : {SparseSolver::Omp, SparseSolver::Fista}) {
        // Orthonormal dictionary: the identity.
        const auto eye = normalize_columns(CMat::Identity(8, 8));
        CVec z = CVec::Zero(8);
        z[3] = cplx(0.0, 2.0);
        const auto s1 = sparse_solve(eye, CMat(z), params(solver));
        REQUIRE(s1.support == std::vector<std::size_t>{3});
        REQUIRE(std::abs(s1.amplitudes[0] - z[3]) < 1e-12);
        REQUIRE(s1.residual_norm < 1e-12);

        // Random dictionary with unequal column norms: amplitudes come back in
        // the raw column scale.
        Rng rng(11);
        const CMat raw = gaussian_matrix(rng, 40, 100);
        const auto dict = normalize_columns(raw);
        const CMat y = 2.5 * raw.col(17);
        const auto s2 = sparse_solve(dict, y, params(solver));
        REQUIRE(s2.support == std::vector<std::size_t>{17});
        REQUIRE(std::abs(s2.amplitudes[0] - 2.5) < 1e-9);
    }
}

TEST_CASE("multi-column k-sparse recovery", "[sparse][property]") {
    for (auto solver : {SparseSolver::Omp, SparseSolver::Fista}) {
        Rng rng(21);
        for (int trial = 0; trial < 5; ++trial) {
            const CMat raw = gaussian_matrix(rng, 48, 120);
            const auto dict = normalize_columns(raw);
            const std::vector<std::size_t> truth{5, 40, 77};
            CMat x = CMat::Zero(120, 3);
            for (auto k : truth) x.row(static_cast<Eigen::Index>(k)) = gaussian_matrix(rng, 1, 3) + CMat::Constant(1, 3, 2.0);
            const CMat y = raw * x;
            const auto s = sparse_solve(dict, y, params(solver));
            REQUIRE(s.support == truth);
            for (std::size_t k = 0; k < truth.size(); ++k)
                REQUIRE(std::abs(s.amplitudes[k] - x(static_cast<Eigen::Index>(truth[k]), 0)) < 1e-8);
            REQUIRE(s.residual_norm < 1e-8 * y.norm());
        }
    }
}

TEST_CASE("the amplitude threshold prunes weak atoms", "[sparse]") {
    const auto eye = normalize_columns(CMat::Identity(6, 6));
    CVec z = CVec::Zero(6);
    z[0] = 1.0;
    z[4] = 0.1;
    auto p = params(SparseSolver::Omp);
    p.residual_tol = 1e-9;
    auto s = sparse_solve(eye, CMat(z), p);
    REQUIRE(s.support == std::vector<std::size_t>{0});
    p.amplitude_threshold = 0.05;
    s = sparse_solve(eye, CMat(z), p);
    REQUIRE(s.support == std::vector<std::size_t>{0, 4});
}

TEST_CASE("zero measurements give an empty support", "[sparse]") {
    Rng rng(3);
    const auto dict = normalize_columns(gaussian_matrix(rng, 10, 20));
    for (auto solver : {SparseSolver::Omp, SparseSolver::Fista}) {
        const auto s = sparse_solve(dict, CMat::Zero(10, 1), params(solver));
        REQUIRE(s.support.empty());
    }
}

TEST_CASE("solver errors", "[sparse]") {
    Rng rng(4);
    const auto dict = normalize_columns(gaussian_matrix(rng, 10, 20));
    REQUIRE_THROWS_AS(sparse_solve(dict, CMat::Ones(9, 1), params(SparseSolver::Omp)), std::invalid_argument);
    REQUIRE_THROWS_AS(sparse_solve(dict, CMat::Ones(9, 1), params(SparseSolver::Fista)), std::invalid_argument);
    auto p = params(SparseSolver::Omp);
    p.max_sparsity = 10;
    REQUIRE_THROWS_AS(sparse_solve(dict, CMat::Ones(10, 1), p), std::invalid_argument);
    p = params(SparseSolver::Fista);
    p.fista_max_iter = 2;
    p.fista_tol = 1e-15;
    REQUIRE_THROWS_AS(sparse_solve(dict, gaussian_matrix(rng, 10, 1), p), NumericalError);
}
