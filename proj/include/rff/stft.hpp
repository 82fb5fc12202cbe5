#pragma once

#include "rff/linalg.hpp"
#include "rff/signal.hpp"

namespace rff {

struct STFTConfig {
    int window_length = 50;
    double gaussian_std = 7.0;
    int hop = 18;
    int fft_size = 50;  // M; >= window_length, zero-padded when larger

    int frames_for(int signal_len) const { return (signal_len - window_length) / hop + 1; }
};

// T x F complex short-time spectrum; rows are frames, columns DFT bins.
struct Spectrogram {
    CMat values;
    STFTConfig config;

    int frames() const { return static_cast<int>(values.rows()); }
    int bins() const { return static_cast<int>(values.cols()); }
};

// w[k] = exp(-(k - (length-1)/2)^2 / (2 std^2)); peak 1 at the center.
Vec gaussian_window(int length, double std);

// Frame t covers samples [t*hop, t*hop + window_length); each frame is
// windowed and transformed with an M-point DFT over the complex input. All M
// bins are retained (complex signal, no one-sided reduction).
Spectrogram stft(const IQSignal& s, const STFTConfig& config);

// Row-major flatten of |values|, length T*F.
Vec magnitude_features(const Spectrogram& spec);

// Element-wise |S|^2.
Mat psd(const Spectrogram& spec);

// Full-length DFT of the signal, concatenated [Re; Im], width 2l.
Vec fq_features(const IQSignal& s);

// Amplitude and phase, [|s|; arg(s)] with phase in (-pi, pi], width 2l.
Vec pa_features(const IQSignal& s);

// Direct DFT used by the feature maps (and by test oracles via an
// independent path).
CVec dft(const CVec& x, int n_bins);

}  // namespace rff
