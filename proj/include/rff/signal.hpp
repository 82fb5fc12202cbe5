#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "rff/linalg.hpp"
#include "rff/rng.hpp"

namespace rff {

// Complex baseband sample vector; the unit of transmission.
struct IQSignal {
    std::vector<std::complex<double>> samples;

    IQSignal() = default;
    explicit IQSignal(size_t len) : samples(len) {}
    size_t size() const { return samples.size(); }
    std::complex<double>& operator[](size_t i) { return samples[i]; }
    const std::complex<double>& operator[](size_t i) const { return samples[i]; }
};

// Hardware impairments of one device; drawn once and frozen, since the
// fingerprint is a device property.
struct TransmitterProfile {
    int device_id = 0;
    bool trusted = false;
    double iq_gain_imbalance_db = 0.0;  // quadrature-arm gain error
    double iq_phase_imbalance_rad = 0.0;
    std::complex<double> dc_offset{0.0, 0.0};
    double cfo = 0.0;             // carrier frequency offset, fraction of sample rate
    double phase_noise_std = 0.0; // per-sample random-walk step, radians
};

// Diagonal of the channel matrix: one complex gain per sample.
struct ChannelRealization {
    std::vector<std::complex<double>> gains;
};

enum class ChannelModel { rayleigh_block, rician };

struct ScenarioConfig {
    int n_trusted = 3;
    int n_untrusted_seen = 6;
    int n_untrusted_unseen = 4;
    int signals_per_device = 400;
    int signal_len = 256;  // l, samples per transmission
    double snr_db = 20.0;
    ChannelModel channel_model = ChannelModel::rayleigh_block;
    int coherence_block = 32;  // samples per fading block
    // Links are quasi-static: each device-to-party link keeps a fixed base
    // realization (devices do not move) and every transmission adds
    // per-block jitter with this relative power.
    double channel_jitter = 0.25;
    std::uint64_t seed = 1;

    // impairment draw ranges (uniform magnitude bounds per device), sized so
    // fingerprints stay learnable through block fading at the default SNR
    double max_gain_imbalance_db = 3.0;
    double max_phase_imbalance_rad = 15.0 * M_PI / 180.0;
    double max_dc_offset = 0.15;
    double max_cfo = 1e-2;
    double max_phase_noise_std = 0.01;

    int total_devices() const { return n_trusted + n_untrusted_seen + n_untrusted_unseen; }
};

enum class Vantage { receiver, eavesdropper };

struct SignalExample {
    IQSignal signal;
    int label = 0;  // 1 iff the device is trusted
    int device_id = 0;
};

struct Dataset {
    std::vector<SignalExample> train;
    std::vector<SignalExample> test;
    std::vector<SignalExample> unseen;  // devices absent from training; label 0 only
    ScenarioConfig config;
    Vantage vantage = Vantage::receiver;
};

// Deterministic unit-average-power preamble: a fixed QPSK training sequence
// tiled to the requested length.
IQSignal make_preamble(int len);

// Per-device impairments drawn from the scenario's ranges.
TransmitterProfile draw_profile(int device_id, bool trusted, const ScenarioConfig& cfg, Rng& rng);

// Frozen per-scenario device population: trusted devices first, then seen
// untrusted, then unseen untrusted. Identical for both vantages.
std::vector<TransmitterProfile> scenario_profiles(const ScenarioConfig& cfg);

// Applies, in order: IQ imbalance, DC offset, CFO rotation, and a seeded
// phase-noise random walk.
IQSignal apply_fingerprint(const IQSignal& x, const TransmitterProfile& profile,
                           std::uint64_t noise_seed);

ChannelRealization draw_channel(int len, ChannelModel model, int coherence_block, Rng& rng);

// Static part of one device-to-party link, one complex gain per coherence
// block.
struct LinkChannel {
    std::vector<std::complex<double>> base;
    int coherence_block = 32;
    double jitter = 0.25;
};

// Deterministic per (scenario seed, vantage, device): the link's frozen base
// realization, scaled so base plus jitter has unit average power.
LinkChannel make_link_channel(const ScenarioConfig& cfg, Vantage vantage, int device_id);

// One transmission's channel: base plus per-block jitter drawn from rng.
ChannelRealization draw_link_realization(const LinkChannel& link, int len, Rng& rng);

// Element-wise H*(x) plus complex AWGN at snr_db relative to the received
// signal power. snr_db = +infinity disables the noise.
IQSignal transmit(const IQSignal& x, const ChannelRealization& channel, double snr_db, Rng& rng);

// Same channel application with a caller-supplied noise vector, so paired
// perturbed/clean receptions can share one realization exactly.
IQSignal transmit_with_noise(const IQSignal& x, const ChannelRealization& channel,
                             const std::vector<std::complex<double>>& noise);

std::vector<std::complex<double>> draw_noise(const IQSignal& reference,
                                             const ChannelRealization& channel, double snr_db,
                                             Rng& rng);

// [Re(s); Im(s)] concatenation, width 2l.
Vec to_real(const IQSignal& s);
IQSignal to_complex(const Vec& v);

// 10*log10(|delta|^2 / |s|^2). Zero delta reports -infinity; zero-power s is
// rejected.
double psr_db(const Vec& delta, const Vec& s);

// Rescales delta so that psr_db(result, s) == target_psr_db.
Vec scale_to_psr(const Vec& delta, const Vec& s, double target_psr_db);

Dataset generate_dataset(const ScenarioConfig& cfg, Vantage vantage);

IQSignal add(const IQSignal& a, const IQSignal& b);

}  // namespace rff
