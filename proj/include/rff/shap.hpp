#pragma once

#include <cstdint>
#include <functional>

#include "rff/linalg.hpp"

namespace rff {

// Inclusive DFT-bin range.
struct SpectralBand {
    int f_low = 0;
    int f_high = 0;
};

// Replacement values for features treated as absent. We use the
// training-set mean of each feature.
struct MaskingPolicy {
    Vec background;
};

enum class ShapMethod { exact, monte_carlo };

struct ShapleyEstimate {
    Vec attributions;           // one phi per feature
    double baseline_value = 0;  // f(background)
    ShapMethod method = ShapMethod::exact;
    int n_samples = 0;          // monte_carlo only
};

// The scalar model under explanation.
using ScalarModel = std::function<double(const Vec&)>;

// Exact Shapley values by subset enumeration with the standard weight
// |P|! (|Q|-|P|-1)! / |Q|!. Only permitted for <= 20 features.
ShapleyEstimate shapley_exact(const ScalarModel& model, const Vec& input,
                              const MaskingPolicy& policy);

// Permutation-sampling estimator of the same quantity; unbiased, and exact
// for the efficiency identity sum(phi) = f(x) - f(background). Permutation p
// draws from its own sub-seed, so estimates are independent of evaluation
// batching.
ShapleyEstimate shapley_mc(const ScalarModel& model, const Vec& input, const MaskingPolicy& policy,
                           int n_samples, std::uint64_t seed);

// Same estimator with the permutation walks advanced in lockstep so each
// step is one batched model call (columns = permutations). Agrees with
// shapley_mc up to floating-point summation order.
using BatchScalarModel = std::function<Vec(const Mat&)>;
ShapleyEstimate shapley_mc_batch(const BatchScalarModel& model, const Vec& input,
                                 const MaskingPolicy& policy, int n_samples, std::uint64_t seed);

struct BandImportance {
    double fraction = 0.0;
    bool degenerate = false;  // all-zero attributions
};

// Fraction of sum|phi| carried by frequency bins [f_low, f_high] across all
// frames, for attributions laid out frame-major (index = t*F + f).
BandImportance band_importance(const Vec& attributions, int frames, int bins,
                               const SpectralBand& band);

}  // namespace rff
