#include "rff/signal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rff {

namespace {

// Fixed QPSK training pattern (constellation indices), held for kHold
// samples per symbol and mixed to +fs/4 so the occupied band sits away from
// DC. The j^n mixing keeps every sample on the QPSK grid.
constexpr int kPattern[8] = {0, 1, 3, 2, 3, 1, 0, 2};
constexpr int kHold = 8;

std::complex<double> qpsk_point(int k) {
    const double phase = M_PI / 4.0 + (M_PI / 2.0) * static_cast<double>(k & 3);
    return {std::cos(phase), std::sin(phase)};
}

const char* vantage_tag(Vantage v) { return v == Vantage::receiver ? "rx" : "ev"; }

}  // namespace

IQSignal make_preamble(int len) {
    if (len < 1) throw std::invalid_argument("make_preamble: length must be >= 1");
    IQSignal s(static_cast<size_t>(len));
    const std::complex<double> j{0.0, 1.0};
    std::complex<double> carrier{1.0, 0.0};
    for (int n = 0; n < len; ++n) {
        const int sym = kPattern[(n / kHold) % 8];
        s[static_cast<size_t>(n)] = qpsk_point(sym) * carrier;
        carrier *= j;
    }
    return s;
}

TransmitterProfile draw_profile(int device_id, bool trusted, const ScenarioConfig& cfg, Rng& rng) {
    TransmitterProfile p;
    p.device_id = device_id;
    p.trusted = trusted;
    p.iq_gain_imbalance_db = rng.uniform(-cfg.max_gain_imbalance_db, cfg.max_gain_imbalance_db);
    p.iq_phase_imbalance_rad =
        rng.uniform(-cfg.max_phase_imbalance_rad, cfg.max_phase_imbalance_rad);
    const double dc_mag = rng.uniform(0.0, cfg.max_dc_offset);
    const double dc_arg = rng.uniform(0.0, 2.0 * M_PI);
    p.dc_offset = {dc_mag * std::cos(dc_arg), dc_mag * std::sin(dc_arg)};
    p.cfo = rng.uniform(-cfg.max_cfo, cfg.max_cfo);
    p.phase_noise_std = rng.uniform(0.0, cfg.max_phase_noise_std);
    return p;
}

std::vector<TransmitterProfile> scenario_profiles(const ScenarioConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "profiles"));
    std::vector<TransmitterProfile> profiles;
    profiles.reserve(static_cast<size_t>(cfg.total_devices()));
    int id = 0;
    for (int i = 0; i < cfg.n_trusted; ++i) profiles.push_back(draw_profile(id++, true, cfg, rng));
    for (int i = 0; i < cfg.n_untrusted_seen + cfg.n_untrusted_unseen; ++i)
        profiles.push_back(draw_profile(id++, false, cfg, rng));
    return profiles;
}

IQSignal apply_fingerprint(const IQSignal& x, const TransmitterProfile& profile,
                           std::uint64_t noise_seed) {
    const double g = std::pow(10.0, profile.iq_gain_imbalance_db / 20.0);
    const std::complex<double> rot{std::cos(profile.iq_phase_imbalance_rad),
                                   std::sin(profile.iq_phase_imbalance_rad)};
    const std::complex<double> alpha = 0.5 * (1.0 + g * rot);
    const std::complex<double> beta = 0.5 * (1.0 - g * rot);

    Rng rng(noise_seed);
    IQSignal y(x.size());
    double theta = 0.0;
    for (size_t n = 0; n < x.size(); ++n) {
        std::complex<double> v = alpha * x[n] + beta * std::conj(x[n]);
        v += profile.dc_offset;
        const double cfo_phase = 2.0 * M_PI * profile.cfo * static_cast<double>(n);
        theta += profile.phase_noise_std > 0.0 ? rng.normal(0.0, profile.phase_noise_std) : 0.0;
        const double total = cfo_phase + theta;
        v *= std::complex<double>{std::cos(total), std::sin(total)};
        y[n] = v;
    }
    return y;
}

ChannelRealization draw_channel(int len, ChannelModel model, int coherence_block, Rng& rng) {
    if (len < 1) throw std::invalid_argument("draw_channel: length must be >= 1");
    if (coherence_block < 1) throw std::invalid_argument("draw_channel: coherence_block must be >= 1");
    ChannelRealization ch;
    ch.gains.resize(static_cast<size_t>(len));
    std::complex<double> gain{1.0, 0.0};
    for (int n = 0; n < len; ++n) {
        if (n % coherence_block == 0) {
            if (model == ChannelModel::rayleigh_block) {
                gain = rng.cnormal(1.0);
            } else {
                // Rician with K = 4: fixed LOS plus scattered component
                constexpr double kRiceK = 4.0;
                gain = std::sqrt(kRiceK / (kRiceK + 1.0)) +
                       std::sqrt(1.0 / (kRiceK + 1.0)) * rng.cnormal(1.0);
            }
        }
        ch.gains[static_cast<size_t>(n)] = gain;
    }
    return ch;
}

LinkChannel make_link_channel(const ScenarioConfig& cfg, Vantage vantage, int device_id) {
    Rng rng(derive_seed(cfg.seed, std::string("link/") + vantage_tag(vantage),
                        static_cast<std::uint64_t>(device_id)));
    const int blocks = (cfg.signal_len + cfg.coherence_block - 1) / cfg.coherence_block;
    const double jitter_var = cfg.channel_jitter * cfg.channel_jitter;
    const double base_var = std::max(1.0 - jitter_var, 0.0);

    LinkChannel link;
    link.coherence_block = cfg.coherence_block;
    link.jitter = cfg.channel_jitter;
    link.base.resize(static_cast<size_t>(blocks));
    for (auto& g : link.base) {
        if (cfg.channel_model == ChannelModel::rayleigh_block) {
            g = rng.cnormal(base_var);
        } else {
            constexpr double kRiceK = 4.0;
            g = std::sqrt(base_var) * (std::sqrt(kRiceK / (kRiceK + 1.0)) +
                                       std::sqrt(1.0 / (kRiceK + 1.0)) * rng.cnormal(1.0));
        }
    }
    return link;
}

ChannelRealization draw_link_realization(const LinkChannel& link, int len, Rng& rng) {
    const double jitter_var = link.jitter * link.jitter;
    ChannelRealization ch;
    ch.gains.resize(static_cast<size_t>(len));
    std::complex<double> gain{0.0, 0.0};
    for (int n = 0; n < len; ++n) {
        if (n % link.coherence_block == 0) {
            const size_t b = static_cast<size_t>(n / link.coherence_block);
            if (b >= link.base.size())
                throw std::invalid_argument("draw_link_realization: signal longer than the link base");
            gain = link.base[b] + (jitter_var > 0.0 ? rng.cnormal(jitter_var)
                                                    : std::complex<double>{0.0, 0.0});
        }
        ch.gains[static_cast<size_t>(n)] = gain;
    }
    return ch;
}

IQSignal transmit(const IQSignal& x, const ChannelRealization& channel, double snr_db, Rng& rng) {
    if (x.size() != channel.gains.size())
        throw std::invalid_argument("transmit: signal/channel length mismatch");
    IQSignal y(x.size());
    for (size_t n = 0; n < x.size(); ++n) y[n] = channel.gains[n] * x[n];
    if (std::isinf(snr_db)) return y;

    double sig_power = 0.0;
    for (size_t n = 0; n < y.size(); ++n) sig_power += std::norm(y[n]);
    sig_power /= static_cast<double>(y.size());
    const double noise_var = sig_power * std::pow(10.0, -snr_db / 10.0);
    for (size_t n = 0; n < y.size(); ++n) y[n] += rng.cnormal(noise_var);
    return y;
}

std::vector<std::complex<double>> draw_noise(const IQSignal& reference,
                                             const ChannelRealization& channel, double snr_db,
                                             Rng& rng) {
    if (reference.size() != channel.gains.size())
        throw std::invalid_argument("draw_noise: signal/channel length mismatch");
    std::vector<std::complex<double>> noise(reference.size(), {0.0, 0.0});
    if (std::isinf(snr_db)) return noise;
    double sig_power = 0.0;
    for (size_t n = 0; n < reference.size(); ++n)
        sig_power += std::norm(channel.gains[n] * reference[n]);
    sig_power /= static_cast<double>(reference.size());
    const double noise_var = sig_power * std::pow(10.0, -snr_db / 10.0);
    for (auto& g : noise) g = rng.cnormal(noise_var);
    return noise;
}

IQSignal transmit_with_noise(const IQSignal& x, const ChannelRealization& channel,
                             const std::vector<std::complex<double>>& noise) {
    if (x.size() != channel.gains.size() || x.size() != noise.size())
        throw std::invalid_argument("transmit_with_noise: length mismatch");
    IQSignal y(x.size());
    for (size_t n = 0; n < x.size(); ++n) y[n] = channel.gains[n] * x[n] + noise[n];
    return y;
}

Vec to_real(const IQSignal& s) {
    const auto len = static_cast<Eigen::Index>(s.size());
    Vec v(2 * len);
    for (Eigen::Index n = 0; n < len; ++n) {
        v(n) = s[static_cast<size_t>(n)].real();
        v(n + len) = s[static_cast<size_t>(n)].imag();
    }
    return v;
}

IQSignal to_complex(const Vec& v) {
    if (v.size() % 2 != 0) throw std::invalid_argument("to_complex: width must be even");
    const Eigen::Index len = v.size() / 2;
    IQSignal s(static_cast<size_t>(len));
    for (Eigen::Index n = 0; n < len; ++n) s[static_cast<size_t>(n)] = {v(n), v(n + len)};
    return s;
}

double psr_db(const Vec& delta, const Vec& s) {
    const double ns = s.squaredNorm();
    if (ns == 0.0) throw std::invalid_argument("psr_db: zero-power reference signal");
    const double nd = delta.squaredNorm();
    if (nd == 0.0) return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(nd / ns);
}

Vec scale_to_psr(const Vec& delta, const Vec& s, double target_psr_db) {
    const double nd = delta.squaredNorm();
    if (nd == 0.0) throw std::invalid_argument("scale_to_psr: zero perturbation");
    const double ns = s.squaredNorm();
    if (ns == 0.0) throw std::invalid_argument("scale_to_psr: zero-power reference signal");
    const double target = std::pow(10.0, target_psr_db / 10.0);
    return delta * std::sqrt(target * ns / nd);
}

Dataset generate_dataset(const ScenarioConfig& cfg, Vantage vantage) {
    if (cfg.n_trusted < 1 || cfg.n_untrusted_seen < 1 || cfg.n_untrusted_unseen < 0)
        throw std::invalid_argument("generate_dataset: invalid device counts");
    if (cfg.signals_per_device < 1)
        throw std::invalid_argument("generate_dataset: signals_per_device must be >= 1");

    const auto profiles = scenario_profiles(cfg);
    const IQSignal preamble = make_preamble(cfg.signal_len);
    const int n_seen = cfg.n_trusted + cfg.n_untrusted_seen;
    const int train_per_device = (cfg.signals_per_device * 3) / 4;
    const std::string tag = vantage_tag(vantage);

    Dataset ds;
    ds.config = cfg;
    ds.vantage = vantage;
    for (int d = 0; d < cfg.total_devices(); ++d) {
        const TransmitterProfile& profile = profiles[static_cast<size_t>(d)];
        const LinkChannel link = make_link_channel(cfg, vantage, profile.device_id);
        for (int i = 0; i < cfg.signals_per_device; ++i) {
            Rng rng(derive_seed(cfg.seed, tag,
                                static_cast<std::uint64_t>(d) * static_cast<std::uint64_t>(cfg.signals_per_device) +
                                    static_cast<std::uint64_t>(i)));
            const std::uint64_t emission_seed = rng.raw();
            const IQSignal emitted = apply_fingerprint(preamble, profile, emission_seed);
            ChannelRealization ch = draw_link_realization(link, cfg.signal_len, rng);
            IQSignal received = transmit(emitted, ch, cfg.snr_db, rng);

            SignalExample ex{std::move(received), profile.trusted ? 1 : 0, profile.device_id};
            if (d >= n_seen)
                ds.unseen.push_back(std::move(ex));
            else if (i < train_per_device)
                ds.train.push_back(std::move(ex));
            else
                ds.test.push_back(std::move(ex));
        }
    }
    return ds;
}

IQSignal add(const IQSignal& a, const IQSignal& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add: length mismatch");
    IQSignal out(a.size());
    for (size_t n = 0; n < a.size(); ++n) out[n] = a[n] + b[n];
    return out;
}

}  // namespace rff
