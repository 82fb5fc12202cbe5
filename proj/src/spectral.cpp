#include "rff/spectral.hpp"

#include <cmath>
#include <stdexcept>

namespace rff {

namespace {

double band_energy(const Mat& psd_matrix, const SpectralBand& band) {
    double e = 0.0;
    for (Eigen::Index t = 0; t < psd_matrix.rows(); ++t)
        for (int f = band.f_low; f <= band.f_high; ++f) e += psd_matrix(t, f);
    return e;
}

struct StagedReception {
    IQSignal clean;      // s'_E: delta = 0
    IQSignal perturbed;  // s_E
    IQSignal psi;        // H_E * delta
    Vec delta_real;
};

// One transmission staged end to end: fingerprinted emission, transmitter-side
// crafting against the receiver model, then eavesdropper reception with a
// shared channel/noise pair for the delta on/off arms.
StagedReception stage_example(const AttackVerificationContext& ctx,
                              const std::vector<TransmitterProfile>& profiles, int example_index,
                              const PerturbationSpec& spec, double psr_db, bool random_delta) {
    const ScenarioConfig& sc = ctx.scenario;
    const int n_seen = sc.n_trusted + sc.n_untrusted_seen;
    const TransmitterProfile& profile = profiles[static_cast<size_t>(example_index % n_seen)];

    Rng rng(derive_seed(ctx.seed, "spectral", static_cast<std::uint64_t>(example_index)));
    const IQSignal preamble = make_preamble(sc.signal_len);
    const IQSignal emitted = apply_fingerprint(preamble, profile, rng.raw());
    const LinkChannel link_rx = make_link_channel(sc, Vantage::receiver, profile.device_id);
    const LinkChannel link_ev = make_link_channel(sc, Vantage::eavesdropper, profile.device_id);

    // Transmitter side: craft delta on its own draw of the receiver channel.
    ChannelRealization estimate = draw_link_realization(link_rx, sc.signal_len, rng);
    CraftOutcome crafted;
    if (random_delta) {
        const IQSignal approx = transmit(emitted, estimate, sc.snr_db, rng);
        const Vec s_real = to_real(approx);
        Vec dir(s_real.size());
        for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
        crafted.delta_real = scale_to_psr(dir, s_real, psr_db);
        crafted.x_adv = add(emitted, to_complex(crafted.delta_real));
    } else {
        crafted = craft_at_transmitter(*ctx.receiver_model, emitted, estimate, sc.snr_db,
                                       profile.trusted ? 1.0 : 0.0, spec, psr_db, rng);
    }

    // Eavesdropper side: one channel and one noise realization shared by the
    // delta on/off receptions.
    ChannelRealization ch_e = draw_link_realization(link_ev, sc.signal_len, rng);
    const auto noise = draw_noise(emitted, ch_e, sc.snr_db, rng);

    StagedReception out;
    out.clean = transmit_with_noise(emitted, ch_e, noise);
    out.perturbed = transmit_with_noise(crafted.x_adv, ch_e, noise);
    out.delta_real = crafted.delta_real;
    const IQSignal delta_c = to_complex(crafted.delta_real);
    out.psi = IQSignal(delta_c.size());
    for (size_t n = 0; n < delta_c.size(); ++n) out.psi[n] = ch_e.gains[n] * delta_c[n];
    return out;
}

}  // namespace

BandPartition standard_bands(int n_bins) {
    if (n_bins < 5) throw std::invalid_argument("standard_bands: too few bins");
    const int lo_end = static_cast<int>(0.2 * n_bins);
    const int mid_end = static_cast<int>(0.8 * n_bins);
    return {{0, lo_end - 1}, {lo_end, mid_end - 1}, {mid_end, n_bins - 1}};
}

double BandEnergyReport::max_fraction() const {
    return std::max(low_fraction, std::max(mid_fraction, high_fraction));
}

int BandEnergyReport::argmax_band() const {
    if (low_fraction >= mid_fraction && low_fraction >= high_fraction) return 0;
    if (mid_fraction >= high_fraction) return 1;
    return 2;
}

BandEnergyReport band_energy_of_psd(const Mat& psd_matrix, const BandPartition& bands) {
    const double dl = band_energy(psd_matrix, bands.low) / band_width(bands.low);
    const double dm = band_energy(psd_matrix, bands.mid) / band_width(bands.mid);
    const double dh = band_energy(psd_matrix, bands.high) / band_width(bands.high);
    const double total = dl + dm + dh;
    if (total == 0.0) throw std::invalid_argument("band_energy_of_psd: zero-energy PSD");
    return {dl / total, dm / total, dh / total, bands};
}

BandEnergyReport perturbation_band_energy(const IQSignal& delta_received, const STFTConfig& config,
                                          const BandPartition& bands) {
    double energy = 0.0;
    for (size_t n = 0; n < delta_received.size(); ++n) energy += std::norm(delta_received[n]);
    if (energy == 0.0) throw std::invalid_argument("perturbation_band_energy: zero perturbation");
    return band_energy_of_psd(psd(stft(delta_received, config)), bands);
}

double window_leakage_bound(double window_std, double distance_bins, int fft_size,
                            int window_length) {
    if (window_std <= 0.0) throw std::invalid_argument("window_leakage_bound: std must be > 0");
    const double peak = gaussian_window(window_length, window_std).sum();  // K, the DC gain
    const double sigma_f = fft_size / (2.0 * M_PI * window_std);
    return peak * std::exp(-(distance_bins * distance_bins) / (2.0 * sigma_f * sigma_f));
}

PSDInvarianceReport verify_theorem1(const AttackVerificationContext& ctx,
                                    const PerturbationSpec& spec, double psr_db,
                                    const SpectralBand& mid_band) {
    if (ctx.receiver_model == nullptr)
        throw std::invalid_argument("verify_theorem1: receiver model required");
    if (mid_band.f_high < mid_band.f_low)
        throw std::invalid_argument("verify_theorem1: empty mid band");

    const auto profiles = scenario_profiles(ctx.scenario);
    double err_sum = 0.0;
    double max_bin_err = 0.0;
    for (int i = 0; i < ctx.n_examples; ++i) {
        StagedReception r = stage_example(ctx, profiles, i, spec, psr_db, false);
        const Mat p_clean = psd(stft(r.clean, ctx.stft));
        const Mat p_pert = psd(stft(r.perturbed, ctx.stft));

        double num = 0.0, den = 0.0, worst = 0.0, mean_clean = 0.0;
        int bins_counted = 0;
        for (Eigen::Index t = 0; t < p_clean.rows(); ++t)
            for (int f = mid_band.f_low; f <= mid_band.f_high; ++f) {
                const double d = std::abs(p_pert(t, f) - p_clean(t, f));
                num += d;
                den += p_clean(t, f);
                worst = std::max(worst, d);
                mean_clean += p_clean(t, f);
                ++bins_counted;
            }
        mean_clean /= bins_counted;
        err_sum += den > 0.0 ? num / den : 0.0;
        if (mean_clean > 0.0) max_bin_err = std::max(max_bin_err, worst / mean_clean);
    }
    return {err_sum / ctx.n_examples, max_bin_err, psr_db};
}

BandEnergyReport verify_assumptions(const AttackVerificationContext& ctx,
                                    const PerturbationSpec& spec, double psr_db) {
    if (ctx.receiver_model == nullptr)
        throw std::invalid_argument("verify_assumptions: receiver model required");
    const auto profiles = scenario_profiles(ctx.scenario);
    const BandPartition bands = standard_bands(ctx.stft.fft_size);
    BandEnergyReport acc{0.0, 0.0, 0.0, bands};
    for (int i = 0; i < ctx.n_examples; ++i) {
        StagedReception r = stage_example(ctx, profiles, i, spec, psr_db, false);
        const BandEnergyReport one = perturbation_band_energy(r.psi, ctx.stft, bands);
        acc.low_fraction += one.low_fraction;
        acc.mid_fraction += one.mid_fraction;
        acc.high_fraction += one.high_fraction;
    }
    acc.low_fraction /= ctx.n_examples;
    acc.mid_fraction /= ctx.n_examples;
    acc.high_fraction /= ctx.n_examples;
    return acc;
}

BandEnergyReport random_noise_band_energy(const AttackVerificationContext& ctx, double psr_db) {
    const auto profiles = scenario_profiles(ctx.scenario);
    const BandPartition bands = standard_bands(ctx.stft.fft_size);
    BandEnergyReport acc{0.0, 0.0, 0.0, bands};
    PerturbationSpec unused;
    for (int i = 0; i < ctx.n_examples; ++i) {
        StagedReception r = stage_example(ctx, profiles, i, unused, psr_db, true);
        const BandEnergyReport one = perturbation_band_energy(r.psi, ctx.stft, bands);
        acc.low_fraction += one.low_fraction;
        acc.mid_fraction += one.mid_fraction;
        acc.high_fraction += one.high_fraction;
    }
    acc.low_fraction /= ctx.n_examples;
    acc.mid_fraction /= ctx.n_examples;
    acc.high_fraction /= ctx.n_examples;
    return acc;
}

Mat psd_from_components(const IQSignal& y, const IQSignal& psi, const IQSignal& g,
                        const STFTConfig& config) {
    const CMat Y = stft(y, config).values;
    const CMat P = stft(psi, config).values;
    const CMat G = stft(g, config).values;
    Mat out(Y.rows(), Y.cols());
    for (Eigen::Index t = 0; t < Y.rows(); ++t)
        for (Eigen::Index f = 0; f < Y.cols(); ++f) {
            const auto yv = Y(t, f);
            const auto pv = P(t, f);
            const auto gv = G(t, f);
            out(t, f) = std::norm(yv) + std::norm(pv) + std::norm(gv) +
                        2.0 * std::real(yv * std::conj(pv)) + 2.0 * std::real(yv * std::conj(gv)) +
                        2.0 * std::real(pv * std::conj(gv));
        }
    return out;
}

}  // namespace rff
