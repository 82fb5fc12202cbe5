#pragma once

#include "rff/attack.hpp"
#include "rff/shap.hpp"
#include "rff/stft.hpp"

namespace rff {

// The 20/60/20 split of the raw DFT bin axis. For a complex DFT the upper
// bins hold negative frequencies; the bands are fixed on raw bin index so
// the reports match what spectrogram heatmaps show.
struct BandPartition {
    SpectralBand low, mid, high;
};

BandPartition standard_bands(int n_bins);

inline int band_width(const SpectralBand& b) { return b.f_high - b.f_low + 1; }

// Band occupancy of a perturbation's PSD. Fractions are bandwidth-normalized
// energy densities (band energy / band width, renormalized to sum to one), so
// a spectrally flat signal reports equal thirds regardless of how the bin
// axis is split.
struct BandEnergyReport {
    double low_fraction = 0.0;
    double mid_fraction = 0.0;
    double high_fraction = 0.0;
    BandPartition bands;

    double max_fraction() const;
    int argmax_band() const;  // 0 = low, 1 = mid, 2 = high
};

BandEnergyReport band_energy_of_psd(const Mat& psd_matrix, const BandPartition& bands);

// PSD of psi = H_E * delta integrated per band.
BandEnergyReport perturbation_band_energy(const IQSignal& delta_received, const STFTConfig& config,
                                          const BandPartition& bands);

// Gaussian spectral envelope K exp(-d^2 / (2 sigma_f^2)) with
// sigma_f = fft_size / (2 pi window_std) bins; K defaults to the window's DC
// gain (its spectral peak).
double window_leakage_bound(double window_std, double distance_bins, int fft_size = 50,
                            int window_length = 50);

struct PSDInvarianceReport {
    double mid_band_relative_error = 0.0;  // L1 PSD difference over mid band / clean mid-band PSD
    double per_bin_max_error = 0.0;        // worst mid-band bin, relative to the mean clean level
    double psr_db = 0.0;
};

// Everything needed to stage paired perturbed/clean receptions at the
// eavesdropper with shared channel and noise realizations.
struct AttackVerificationContext {
    const MLPModel* receiver_model = nullptr;
    ScenarioConfig scenario;
    STFTConfig stft;
    int n_examples = 64;
    std::uint64_t seed = 99;
};

// Numerical check of the PSD-invariance claim: delta on/off with shared
// channel/noise, PSD compared over the mid band, averaged over examples.
PSDInvarianceReport verify_theorem1(const AttackVerificationContext& ctx,
                                    const PerturbationSpec& spec, double psr_db,
                                    const SpectralBand& mid_band);

// Band profile of psi for the given attack at the given PSR, averaged over
// examples.
BandEnergyReport verify_assumptions(const AttackVerificationContext& ctx,
                                    const PerturbationSpec& spec, double psr_db);

// Control: white perturbation of equal PSR through the same pipeline.
BandEnergyReport random_noise_band_energy(const AttackVerificationContext& ctx, double psr_db);

// |S[y + psi + g]|^2 assembled from the component spectrograms and all cross
// terms; used to validate the PSD expansion against the direct computation.
Mat psd_from_components(const IQSignal& y, const IQSignal& psi, const IQSignal& g,
                        const STFTConfig& config);

}  // namespace rff
