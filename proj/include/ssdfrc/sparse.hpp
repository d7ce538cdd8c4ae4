// SPDX-License-Identifier: Apache-2.0
//
// Sparse recovery over a complex dictionary: orthogonal matching pursuit and
// a FISTA solver for the l1-regularized least-squares problem. Both accept a
// matrix of measurement vectors that share one support (row sparsity); a
// single vector is the one-column case.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "config.hpp"

namespace ssdfrc {

enum class SparseSolver { Omp, Fista };

struct SparseParams {
    SparseSolver solver = SparseSolver::Fista;
    std::size_t max_sparsity = 16;
    double residual_tol = 0.05;         // stop when ||R||_F <= residual_tol * ||Y||_F
    double amplitude_threshold = 0.2;   // keep rows with norm >= threshold * largest row norm
    double fista_lambda = 0.01;         // relative to the largest row norm of D^H Y
    std::size_t fista_max_iter = 20000;
    double fista_tol = 1e-5;
};

struct SparseSolution {
    std::vector<std::size_t> support;  // column indices, ascending
    std::vector<cplx> amplitudes;      // de-normalized, first measurement column, aligned with support
    std::vector<double> row_norms;     // de-normalized row norms across all measurement columns
    double residual_norm = 0.0;
    std::size_t iterations = 0;
};

/// Dictionary whose columns have been scaled to unit norm. `scale[c]` is the
/// original norm of column c, so an amplitude x on the normalized column
/// corresponds to x / scale[c] on the original one.
struct NormalizedDictionary {
    CMat columns;
    Eigen::VectorXd scale;
};

inline NormalizedDictionary normalize_columns(const CMat& raw) {
    NormalizedDictionary d{raw, Eigen::VectorXd(raw.cols())};
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
        const double n = raw.col(c).norm();
        if (!(n > 0.0)) throw std::invalid_argument("normalize_columns: zero column");
        d.scale[c] = n;
        d.columns.col(c) /= n;
    }
    return d;
}

namespace detail {

inline CMat least_squares(const CMat& a, const CMat& b) { return a.colPivHouseholderQr().solve(b); }

inline CMat gather(const CMat& d, const std::vector<std::size_t>& cols) {
    CMat out(d.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = d.col(static_cast<Eigen::Index>(cols[k]));
    return out;
}

/// Applies the relative amplitude threshold to the de-normalized row norms,
/// re-fits the survivors by least squares and de-normalizes.
inline SparseSolution finalize(const NormalizedDictionary& dict, const CMat& y, std::vector<std::size_t> support,
                               double threshold, std::size_t iterations) {
    SparseSolution out;
    out.iterations = iterations;
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    if (support.empty()) {
        out.residual_norm = y.norm();
        return out;
    }
    CMat x = least_squares(gather(dict.columns, support), y);
    auto row_norm = [&](const CMat& xs, std::size_t k) {
        return xs.row(static_cast<Eigen::Index>(k)).norm() / dict.scale[static_cast<Eigen::Index>(support[k])];
    };
    // Re-fitting redistributes energy between correlated atoms, so prune until
    // the support is stable.
    for (;;) {
        double peak = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k) peak = std::max(peak, row_norm(x, k));
        std::vector<std::size_t> kept;
        for (std::size_t k = 0; k < support.size(); ++k)
            if (row_norm(x, k) >= threshold * peak) kept.push_back(support[k]);
        if (kept.size() == support.size()) break;
        support = std::move(kept);
        x = least_squares(gather(dict.columns, support), y);
    }
    out.residual_norm = (y - gather(dict.columns, support) * x).norm();
    out.support = support;
    for (std::size_t k = 0; k < support.size(); ++k) {
        const double s = dict.scale[static_cast<Eigen::Index>(support[k])];
        out.amplitudes.push_back(x(static_cast<Eigen::Index>(k), 0) / s);
        out.row_norms.push_back(x.row(static_cast<Eigen::Index>(k)).norm() / s);
    }
    return out;
}

}  // namespace detail

/// Orthogonal matching pursuit (simultaneous form for several columns): the
/// atom with the largest correlation energy against the residual joins the
/// support and all amplitudes are re-fitted by least squares.
inline SparseSolution omp(const NormalizedDictionary& dict, const CMat& y, const SparseParams& p) {
    const CMat& d = dict.columns;
    if (y.rows() != d.rows()) throw std::invalid_argument("omp: measurement length does not match dictionary");
    if (p.max_sparsity >= static_cast<std::size_t>(d.rows()))
        throw std::invalid_argument("omp: max_sparsity must be smaller than the number of measurements");
    const double y_norm = y.norm();
    std::vector<std::size_t> support;
    CMat r = y;
    std::size_t it = 0;
    std::vector<char> used(static_cast<std::size_t>(d.cols()), 0);
    while (support.size() < p.max_sparsity && r.norm() > p.residual_tol * y_norm && y_norm > 0.0) {
        const Eigen::VectorXd corr = (d.adjoint() * r).rowwise().norm();
        Eigen::Index best = -1;
        double best_v = -1.0;
        for (Eigen::Index c = 0; c < corr.size(); ++c)
            if (!used[static_cast<std::size_t>(c)] && corr[c] > best_v) {
                best_v = corr[c];
                best = c;
            }
        if (best < 0 || best_v <= 1e-14 * y_norm) break;
        used[static_cast<std::size_t>(best)] = 1;
        support.push_back(static_cast<std::size_t>(best));
        const CMat sub = detail::gather(d, support);
        r = y - sub * detail::least_squares(sub, y);
        ++it;
    }
    return detail::finalize(dict, y, std::move(support), p.amplitude_threshold, it);
}

inline SparseSolution omp(const NormalizedDictionary& dict, const CVec& z, const SparseParams& p) {
    return omp(dict, CMat(z), p);
}

/// FISTA on 0.5 ||Y - D X||_F^2 + lambda sum_rows ||X_row||_2 (complex soft
/// thresholding for a single column), followed by a least-squares re-fit on
/// the thresholded support. Throws NumericalError when the iterate has not
/// settled within fista_max_iter steps.
inline SparseSolution fista(const NormalizedDictionary& dict, const CMat& y, const SparseParams& p) {
    const CMat& d = dict.columns;
    if (y.rows() != d.rows()) throw std::invalid_argument("fista: measurement length does not match dictionary");
    const CMat dy = d.adjoint() * y;
    const double lambda = p.fista_lambda * dy.rowwise().norm().maxCoeff();
    if (!(lambda > 0.0)) return detail::finalize(dict, y, {}, p.amplitude_threshold, 0);

    // Lipschitz constant of the smooth part: largest eigenvalue of D^H D.
    CVec v = CVec::Ones(d.cols()).normalized();
    double lip = 0.0;
    for (int k = 0; k < 200; ++k) {
        const CVec w = d.adjoint() * (d * v);
        const double n = w.norm();
        if (!(n > 0.0)) break;
        const bool settled = std::abs(n - lip) <= 1e-9 * n;
        lip = n;
        v = w / n;
        if (settled) break;
    }
    const double step = 1.0 / (1.01 * lip);
    const double shrink_by = lambda * step;

    auto shrink = [&](CMat u) {
        for (Eigen::Index k = 0; k < u.rows(); ++k) {
            const double a = u.row(k).norm();
            if (a > shrink_by) u.row(k) *= (a - shrink_by) / a;
            else u.row(k).setZero();
        }
        return u;
    };

    CMat x = CMat::Zero(d.cols(), y.cols()), z = x;
    double t = 1.0;
    std::size_t it = 0;
    bool converged = false;
    while (it < p.fista_max_iter) {
        ++it;
        CMat next = shrink(z - step * (d.adjoint() * (d * z - y)));
        // Momentum restart when the step points uphill.
        if ((z - next).cwiseProduct((next - x).conjugate()).sum().real() > 0.0) t = 1.0;
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double delta = (next - x).norm();
        z = next + ((t - 1.0) / t_next) * (next - x);
        x = std::move(next);
        t = t_next;
        if (!std::isfinite(delta)) break;
        if (delta <= p.fista_tol * std::max(1e-12, x.norm())) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        const double res = (y - d * x).norm();
        throw NumericalError("fista: no convergence after " + std::to_string(it) + " iterations, residual " +
                             std::to_string(res));
    }

    std::vector<std::size_t> support;
    double peak = 0.0;
    for (Eigen::Index k = 0; k < x.rows(); ++k) peak = std::max(peak, x.row(k).norm() / dict.scale[k]);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
        const double a = x.row(k).norm() / dict.scale[k];
        if (peak > 0.0 && a >= p.amplitude_threshold * peak) ranked.emplace_back(a, static_cast<std::size_t>(k));
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t cap = std::min<std::size_t>(p.max_sparsity, static_cast<std::size_t>(d.rows()) - 1);
    for (std::size_t k = 0; k < ranked.size() && k < cap; ++k) support.push_back(ranked[k].second);
    return detail::finalize(dict, y, std::move(support), p.amplitude_threshold, it);
}

inline SparseSolution fista(const NormalizedDictionary& dict, const CVec& z, const SparseParams& p) {
    return fista(dict, CMat(z), p);
}

inline SparseSolution sparse_solve(const NormalizedDictionary& dict, const CMat& y, const SparseParams& p) {
    return p.solver == SparseSolver::Omp ? omp(dict, y, p) : fista(dict, y, p);
}

}  // namespace ssdfrc
