#include "rff/stft.hpp"

#include <cmath>
#include <stdexcept>

namespace rff {

Vec gaussian_window(int length, double std) {
    if (length < 1) throw std::invalid_argument("gaussian_window: length must be >= 1");
    if (std <= 0.0) throw std::invalid_argument("gaussian_window: std must be > 0");
    Vec w(length);
    const double center = (length - 1) / 2.0;
    for (int k = 0; k < length; ++k) {
        const double d = k - center;
        w(k) = std::exp(-(d * d) / (2.0 * std * std));
    }
    return w;
}

CVec dft(const CVec& x, int n_bins) {
    // Direct transform with a precomputed twiddle table; sizes here are tiny
    // (<= a few hundred bins).
    CVec out(n_bins);
    std::vector<std::complex<double>> twiddle(static_cast<size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
        const double phase = -2.0 * M_PI * k / static_cast<double>(n_bins);
        twiddle[static_cast<size_t>(k)] = {std::cos(phase), std::sin(phase)};
    }
    for (int f = 0; f < n_bins; ++f) {
        std::complex<double> acc{0.0, 0.0};
        for (Eigen::Index m = 0; m < x.size(); ++m)
            acc += x(m) * twiddle[static_cast<size_t>((static_cast<long long>(f) * m) % n_bins)];
        out(f) = acc;
    }
    return out;
}

Spectrogram stft(const IQSignal& s, const STFTConfig& config) {
    if (config.window_length < 1 || config.hop < 1)
        throw std::invalid_argument("stft: window_length and hop must be >= 1");
    if (config.fft_size < config.window_length)
        throw std::invalid_argument("stft: fft_size must be >= window_length");
    if (static_cast<int>(s.size()) < config.window_length)
        throw std::invalid_argument("stft: signal shorter than the analysis window");

    const int T = config.frames_for(static_cast<int>(s.size()));
    const int F = config.fft_size;
    const Vec w = gaussian_window(config.window_length, config.gaussian_std);

    Spectrogram spec;
    spec.config = config;
    spec.values.resize(T, F);
    CVec frame = CVec::Zero(F);
    for (int t = 0; t < T; ++t) {
        frame.setZero();
        const int start = t * config.hop;
        for (int m = 0; m < config.window_length; ++m)
            frame(m) = s[static_cast<size_t>(start + m)] * w(m);
        spec.values.row(t) = dft(frame, F).transpose();
    }
    return spec;
}

Vec magnitude_features(const Spectrogram& spec) {
    Vec out(spec.values.size());
    Eigen::Index k = 0;
    for (int t = 0; t < spec.frames(); ++t)
        for (int f = 0; f < spec.bins(); ++f) out(k++) = std::abs(spec.values(t, f));
    return out;
}

Mat psd(const Spectrogram& spec) {
    return spec.values.cwiseAbs2();
}

Vec fq_features(const IQSignal& s) {
    const auto len = static_cast<Eigen::Index>(s.size());
    CVec x(len);
    for (Eigen::Index n = 0; n < len; ++n) x(n) = s[static_cast<size_t>(n)];
    const CVec X = dft(x, static_cast<int>(len));
    Vec out(2 * len);
    for (Eigen::Index f = 0; f < len; ++f) {
        out(f) = X(f).real();
        out(f + len) = X(f).imag();
    }
    return out;
}

Vec pa_features(const IQSignal& s) {
    const auto len = static_cast<Eigen::Index>(s.size());
    Vec out(2 * len);
    for (Eigen::Index n = 0; n < len; ++n) {
        const auto& z = s[static_cast<size_t>(n)];
        out(n) = std::abs(z);
        double phase = std::arg(z);  // [-pi, pi]; fold the closed lower edge
        if (phase <= -M_PI) phase = M_PI;
        out(n + len) = phase;
    }
    return out;
}

}  // namespace rff
