// SPDX-License-Identifier: Apache-2.0
//
// Thin wrapper over Eigen's FFT with explicit scaling conventions:
//   fft(x)[k]  = sum_n x[n] exp(-j 2 pi k n / N)
//   ifft(X)[n] = sum_k X[k] exp(+j 2 pi k n / N)      (no 1/N)

#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace ssdfrc {

namespace detail {
inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine = [] {
        Eigen::FFT<double> e;
        e.SetFlag(Eigen::FFT<double>::Unscaled);
        return e;
    }();
    return engine;
}
}  // namespace detail

inline Eigen::VectorXcd fft(const Eigen::VectorXcd& x) {
    std::vector<std::complex<double>> in(x.data(), x.data() + x.size()), out;
    detail::fft_engine().fwd(out, in);
    return Eigen::Map<Eigen::VectorXcd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

inline Eigen::VectorXcd ifft(const Eigen::VectorXcd& x) {
    std::vector<std::complex<double>> in(x.data(), x.data() + x.size()), out;
    detail::fft_engine().inv(out, in);
    return Eigen::Map<Eigen::VectorXcd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

/// Zero-padded forward transform of length `n` (n >= x.size()).
inline Eigen::VectorXcd fft_padded(const Eigen::VectorXcd& x, Eigen::Index n) {
    Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(n);
    padded.head(x.size()) = x;
    return fft(padded);
}

}  // namespace ssdfrc
