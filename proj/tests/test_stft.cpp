#include "doctest.h"

#include <cmath>
#include <complex>

#include "rff/stft.hpp"

using namespace rff;

namespace {

// Independent direct DFT oracle (plain loop with std::polar, no shared code
// with the implementation's twiddle-table transform).
CVec oracle_dft(const CVec& x, int bins) {
    CVec out(bins);
    for (int f = 0; f < bins; ++f) {
        std::complex<double> acc{0.0, 0.0};
        for (Eigen::Index m = 0; m < x.size(); ++m)
            acc += x(m) * std::polar(1.0, -2.0 * M_PI * f * static_cast<double>(m) / bins);
        out(f) = acc;
    }
    return out;
}

IQSignal random_signal(int len, std::uint64_t seed) {
    Rng rng(seed);
    IQSignal s(static_cast<size_t>(len));
    for (auto& v : s.samples) v = rng.cnormal(1.0);
    return s;
}

}  // namespace

TEST_CASE("gaussian window: length one, symmetry, reference value") {
    const Vec w1 = gaussian_window(1, 7.0);
    REQUIRE(w1.size() == 1);
    CHECK(w1(0) == doctest::Approx(1.0));

    const Vec w = gaussian_window(50, 7.0);
    for (int k = 0; k < 50; ++k) CHECK(w(k) == doctest::Approx(w(49 - k)).epsilon(1e-12));
    CHECK(w(0) == doctest::Approx(std::exp(-6.125)).epsilon(1e-12));  // (24.5^2)/(2*49)
    CHECK(w.maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("stft: paper defaults produce a 12x50 spectrogram from l=256") {
    const STFTConfig cfg;
    const Spectrogram spec = stft(random_signal(256, 3), cfg);
    CHECK(spec.frames() == 12);
    CHECK(spec.bins() == 50);
}

TEST_CASE("stft: zero signal gives an all-zero spectrogram") {
    const Spectrogram spec = stft(IQSignal(256), STFTConfig{});
    CHECK(spec.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(magnitude_features(spec).norm() == 0.0);
}

TEST_CASE("stft: linearity and complex scaling") {
    const STFTConfig cfg;
    const IQSignal a = random_signal(256, 5);
    const IQSignal b = random_signal(256, 6);
    const Spectrogram sa = stft(a, cfg), sb = stft(b, cfg), sab = stft(add(a, b), cfg);
    CHECK((sab.values - sa.values - sb.values).cwiseAbs().maxCoeff() < 1e-9);

    const std::complex<double> c{0.7, -1.3};
    IQSignal scaled(a.size());
    for (size_t n = 0; n < a.size(); ++n) scaled[n] = c * a[n];
    CHECK((stft(scaled, cfg).values - c * sa.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stft: frames match the direct-DFT oracle") {
    const STFTConfig cfg;
    const IQSignal s = random_signal(256, 7);
    const Spectrogram spec = stft(s, cfg);
    const Vec w = gaussian_window(cfg.window_length, cfg.gaussian_std);
    for (int t = 0; t < spec.frames(); ++t) {
        CVec frame = CVec::Zero(cfg.fft_size);
        for (int m = 0; m < cfg.window_length; ++m)
            frame(m) = s[static_cast<size_t>(t * cfg.hop + m)] * w(m);
        const CVec expected = oracle_dft(frame, cfg.fft_size);
        for (int f = 0; f < cfg.fft_size; ++f)
            CHECK(std::abs(spec.values(t, f) - expected(f)) < 1e-9);
    }
}

TEST_CASE("stft: pure tone at bin 10 localizes there in every frame") {
    const STFTConfig cfg;
    IQSignal s(256);
    for (size_t n = 0; n < s.size(); ++n)
        s[n] = std::polar(1.0, 2.0 * M_PI * 10.0 * static_cast<double>(n) / cfg.fft_size);
    const Spectrogram spec = stft(s, cfg);
    for (int t = 0; t < spec.frames(); ++t) {
        int argmax = 0;
        double best = 0.0;
        for (int f = 0; f < spec.bins(); ++f)
            if (std::abs(spec.values(t, f)) > best) {
                best = std::abs(spec.values(t, f));
                argmax = f;
            }
        CHECK(argmax == 10);
    }
}

TEST_CASE("stft: per-frame Parseval holds, with and without zero padding") {
    for (int fft_size : {50, 64}) {
        STFTConfig cfg;
        cfg.fft_size = fft_size;
        const IQSignal s = random_signal(256, 11);
        const Spectrogram spec = stft(s, cfg);
        const Mat p = psd(spec);
        const Vec w = gaussian_window(cfg.window_length, cfg.gaussian_std);
        for (int t = 0; t < spec.frames(); ++t) {
            double frame_energy = 0.0;
            for (int m = 0; m < cfg.window_length; ++m)
                frame_energy += std::norm(s[static_cast<size_t>(t * cfg.hop + m)] * w(m));
            const double bin_sum = p.row(t).sum();
            CHECK(bin_sum == doctest::Approx(fft_size * frame_energy).epsilon(1e-9));
        }
    }
}

TEST_CASE("stft: rejects a signal shorter than the window") {
    CHECK_THROWS_AS(stft(IQSignal(32), STFTConfig{}), std::invalid_argument);
}

TEST_CASE("magnitude features: row-major layout of length T*F") {
    const Spectrogram spec = stft(random_signal(256, 13), STFTConfig{});
    const Vec feats = magnitude_features(spec);
    REQUIRE(feats.size() == 600);
    CHECK(feats.minCoeff() >= 0.0);
    CHECK(feats(2 * 50 + 7) == doctest::Approx(std::abs(spec.values(2, 7))));
}

TEST_CASE("psd is the elementwise squared magnitude") {
    const Spectrogram spec = stft(random_signal(256, 17), STFTConfig{});
    const Mat p = psd(spec);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p(3, 4) == doctest::Approx(std::norm(spec.values(3, 4))).epsilon(1e-12));
}

TEST_CASE("fq features: constant signal concentrates in bin zero") {
    IQSignal s(64);
    for (auto& v : s.samples) v = {2.0, 0.0};
    const Vec f = fq_features(s);
    REQUIRE(f.size() == 128);
    CHECK(f(0) == doctest::Approx(128.0));  // 64 * 2
    for (Eigen::Index k = 1; k < 64; ++k) {
        CHECK(std::abs(f(k)) < 1e-9);
        CHECK(std::abs(f(k + 64)) < 1e-9);
    }
    CHECK(fq_features(IQSignal(64)).norm() == 0.0);
}

TEST_CASE("fq features: inverse transform restores the signal") {
    const IQSignal s = random_signal(64, 19);
    const Vec f = fq_features(s);
    for (size_t n = 0; n < s.size(); ++n) {
        std::complex<double> acc{0.0, 0.0};
        for (int k = 0; k < 64; ++k) {
            const std::complex<double> X{f(k), f(k + 64)};
            acc += X * std::polar(1.0, 2.0 * M_PI * k * static_cast<double>(n) / 64.0);
        }
        acc /= 64.0;
        CHECK(std::abs(acc - s[n]) < 1e-9);
    }
}

TEST_CASE("pa features: amplitude-phase with phase in (-pi, pi]") {
    IQSignal s(2);
    s[0] = {1.0, 0.0};
    s[1] = {0.0, 1.0};
    const Vec f = pa_features(s);
    REQUIRE(f.size() == 4);
    CHECK(f(0) == doctest::Approx(1.0));
    CHECK(f(2) == doctest::Approx(0.0));
    CHECK(f(1) == doctest::Approx(1.0));
    CHECK(f(3) == doctest::Approx(M_PI / 2.0));

    IQSignal edge(1);
    edge[0] = {-1.0, -0.0};
    const Vec fe = pa_features(edge);
    CHECK(fe(1) == doctest::Approx(M_PI));  // closed upper edge, never -pi

    const IQSignal z = random_signal(32, 23);
    const Vec fz = pa_features(z);
    for (size_t n = 0; n < z.size(); ++n) {
        const std::complex<double> back = std::polar(fz(static_cast<Eigen::Index>(n)),
                                                     fz(static_cast<Eigen::Index>(n) + 32));
        CHECK(std::abs(back - z[n]) < 1e-12);
    }
}
