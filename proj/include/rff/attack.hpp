#pragma once

#include "rff/nn.hpp"
#include "rff/signal.hpp"

namespace rff {

enum class AttackAlgo { fgsm, pgd };
enum class NormKind { l2, linf };

struct PerturbationSpec {
    AttackAlgo algorithm = AttackAlgo::fgsm;
    NormKind norm = NormKind::l2;
    double power_budget = 1.0;  // P_T
    int iterations = 10;        // T, pgd only
    // Eq. (6) is undefined at zero gradient; when set, fall back to a random
    // unit direction instead of rejecting.
    bool random_fallback = false;
};

struct AttackResult {
    Vec delta;
    int iterations_used = 0;
    double loss_before = 0.0;
    double loss_after = 0.0;
};

// Single gradient step of norm sqrt(P_T): delta = sqrt(P_T) * grad / |grad|_2.
Vec fgsm_l2(const MLPModel& model, const Vec& s, double label, double power_budget,
            bool random_fallback = false, Rng* fallback_rng = nullptr);

// delta = sqrt(P_T) * sign(grad); coordinates with exactly zero gradient stay 0.
Vec fgsm_linf(const MLPModel& model, const Vec& s, double label, double power_budget);

// Iterative ascent with per-step budget beta = 2 sqrt(P_T)/T, each iterate
// projected back onto the l2 ball of radius sqrt(P_T).
Vec pgd_l2(const MLPModel& model, const Vec& s, double label, double power_budget, int iterations);

// Iterative sign ascent with beta = sqrt(P_T)/T and per-coordinate clipping
// to +-sqrt(P_T).
Vec pgd_linf(const MLPModel& model, const Vec& s, double label, double power_budget,
             int iterations);

// radius * v / max(|v|, radius)
Vec project_l2_ball(const Vec& v, double radius);

// clip(v, +-bound)
Vec clip_linf(const Vec& v, double bound);

AttackResult craft_delta(const MLPModel& model, const Vec& s, double label,
                         const PerturbationSpec& spec, Rng* fallback_rng = nullptr);

// Column-batched crafting with per-example budgets derived from a common PSR
// target; every returned column satisfies psr_db(delta, s) == target exactly.
// Columns whose gradient vanishes end-to-end come back zero.
Mat craft_deltas_at_psr(const MLPModel& model, const Mat& inputs, const Vec& labels,
                        const PerturbationSpec& spec, double target_psr_db);

struct CraftOutcome {
    IQSignal x_adv;       // x plus the embedded perturbation
    Vec delta_real;       // the perturbation in the 2l real mapping
    double achieved_psr_db = 0.0;
    double target_psr_db = 0.0;
};

// Transmitter-side crafting: approximates the received signal with one
// seeded draw from the channel/noise distribution, computes delta against
// the receiver's classifier in that domain, scales it to the target PSR and
// embeds it into the outgoing signal. target_psr_db = -infinity returns x
// unchanged (attack off).
CraftOutcome craft_at_transmitter(const MLPModel& receiver_model, const IQSignal& x_fp,
                                  const ChannelRealization& channel_estimate, double snr_db,
                                  double label, const PerturbationSpec& spec,
                                  double target_psr_db, Rng& rng);

}  // namespace rff
