#include "rff/shap.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rff/rng.hpp"

namespace rff {

namespace {

constexpr int kExactLimit = 20;

double binomial(int n, int k) {
    double v = 1.0;
    for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
    return v;
}

}  // namespace

ShapleyEstimate shapley_exact(const ScalarModel& model, const Vec& input,
                              const MaskingPolicy& policy) {
    const int n = static_cast<int>(input.size());
    if (n < 1) throw std::invalid_argument("shapley_exact: empty input");
    if (n > kExactLimit)
        throw std::invalid_argument("shapley_exact: feature count above exact-enumeration limit; use shapley_mc");
    if (policy.background.size() != input.size())
        throw std::invalid_argument("shapley_exact: background width mismatch");

    // Evaluate the model once per subset; phi reuses the cached values.
    const std::uint32_t n_subsets = 1u << n;
    std::vector<double> value(n_subsets);
    Vec masked(n);
    for (std::uint32_t mask = 0; mask < n_subsets; ++mask) {
        for (int i = 0; i < n; ++i)
            masked(i) = (mask >> i) & 1u ? input(i) : policy.background(i);
        value[mask] = model(masked);
    }

    // weight for |P| = s: s!(n-s-1)!/n! = 1/(n * C(n-1, s))
    std::vector<double> weight(static_cast<size_t>(n));
    for (int s = 0; s < n; ++s) weight[static_cast<size_t>(s)] = 1.0 / (n * binomial(n - 1, s));

    ShapleyEstimate est;
    est.method = ShapMethod::exact;
    est.baseline_value = value[0];
    est.attributions = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        const std::uint32_t bit = 1u << i;
        double phi = 0.0;
        for (std::uint32_t mask = 0; mask < n_subsets; ++mask) {
            if (mask & bit) continue;
            const int size = std::popcount(mask);
            phi += weight[static_cast<size_t>(size)] * (value[mask | bit] - value[mask]);
        }
        est.attributions(i) = phi;
    }
    return est;
}

ShapleyEstimate shapley_mc(const ScalarModel& model, const Vec& input, const MaskingPolicy& policy,
                           int n_samples, std::uint64_t seed) {
    const int n = static_cast<int>(input.size());
    if (n < 1) throw std::invalid_argument("shapley_mc: empty input");
    if (n_samples < 1) throw std::invalid_argument("shapley_mc: n_samples must be >= 1");
    if (policy.background.size() != input.size())
        throw std::invalid_argument("shapley_mc: background width mismatch");

    ShapleyEstimate est;
    est.method = ShapMethod::monte_carlo;
    est.n_samples = n_samples;
    est.baseline_value = model(policy.background);
    est.attributions = Vec::Zero(n);

    std::vector<int> order(static_cast<size_t>(n));
    Vec masked(n);
    for (int s = 0; s < n_samples; ++s) {
        Rng perm_rng(derive_seed(seed, "perm", static_cast<std::uint64_t>(s)));
        std::iota(order.begin(), order.end(), 0);
        for (size_t i = static_cast<size_t>(n); i > 1; --i)
            std::swap(order[i - 1], order[perm_rng.integer(i)]);
        masked = policy.background;
        double prev = est.baseline_value;
        for (int idx : order) {
            masked(idx) = input(idx);
            const double v = model(masked);
            est.attributions(idx) += v - prev;
            prev = v;
        }
    }
    est.attributions /= static_cast<double>(n_samples);
    return est;
}

ShapleyEstimate shapley_mc_batch(const BatchScalarModel& model, const Vec& input,
                                 const MaskingPolicy& policy, int n_samples, std::uint64_t seed) {
    const int n = static_cast<int>(input.size());
    if (n < 1) throw std::invalid_argument("shapley_mc_batch: empty input");
    if (n_samples < 1) throw std::invalid_argument("shapley_mc_batch: n_samples must be >= 1");
    if (policy.background.size() != input.size())
        throw std::invalid_argument("shapley_mc_batch: background width mismatch");

    ShapleyEstimate est;
    est.method = ShapMethod::monte_carlo;
    est.n_samples = n_samples;

    std::vector<std::vector<int>> orders(static_cast<size_t>(n_samples),
                                         std::vector<int>(static_cast<size_t>(n)));
    for (int s = 0; s < n_samples; ++s) {
        Rng perm_rng(derive_seed(seed, "perm", static_cast<std::uint64_t>(s)));
        auto& order = orders[static_cast<size_t>(s)];
        std::iota(order.begin(), order.end(), 0);
        for (size_t i = static_cast<size_t>(n); i > 1; --i)
            std::swap(order[i - 1], order[perm_rng.integer(i)]);
    }

    Mat masked(n, n_samples);
    for (int s = 0; s < n_samples; ++s) masked.col(s) = policy.background;
    est.baseline_value = model(Mat(policy.background))(0);

    est.attributions = Vec::Zero(n);
    Vec prev = Vec::Constant(n_samples, est.baseline_value);
    for (int step = 0; step < n; ++step) {
        for (int s = 0; s < n_samples; ++s) {
            const int idx = orders[static_cast<size_t>(s)][static_cast<size_t>(step)];
            masked(idx, s) = input(idx);
        }
        const Vec values = model(masked);
        for (int s = 0; s < n_samples; ++s) {
            const int idx = orders[static_cast<size_t>(s)][static_cast<size_t>(step)];
            est.attributions(idx) += values(s) - prev(s);
        }
        prev = values;
    }
    est.attributions /= static_cast<double>(n_samples);
    return est;
}

BandImportance band_importance(const Vec& attributions, int frames, int bins,
                               const SpectralBand& band) {
    if (attributions.size() != static_cast<Eigen::Index>(frames) * bins)
        throw std::invalid_argument("band_importance: attribution length != frames*bins");
    if (band.f_low < 0 || band.f_high < band.f_low || band.f_high >= bins)
        throw std::invalid_argument("band_importance: band outside [0, bins)");

    double total = 0.0;
    double in_band = 0.0;
    for (int t = 0; t < frames; ++t)
        for (int f = 0; f < bins; ++f) {
            const double a = std::abs(attributions(static_cast<Eigen::Index>(t) * bins + f));
            total += a;
            if (f >= band.f_low && f <= band.f_high) in_band += a;
        }
    if (total == 0.0) return {0.0, true};
    return {in_band / total, false};
}

}  // namespace rff
