#include "rff/attack.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rff {

namespace {

Vec classifier_gradient(const MLPModel& model, const Vec& s, double label) {
    Vec target(1);
    target(0) = label;
    return input_gradient(model, s, target, LossKind::cross_entropy);
}

double classifier_loss(const MLPModel& model, const Vec& s, double label) {
    Vec target(1);
    target(0) = label;
    const LabeledVector one{s, target};
    return batch_loss(model, std::span<const LabeledVector>(&one, 1), LossKind::cross_entropy);
}

Vec sign_of(const Vec& g) {
    return g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

}  // namespace

Vec project_l2_ball(const Vec& v, double radius) {
    const double n = v.norm();
    return radius * v / std::max(n, radius);
}

Vec clip_linf(const Vec& v, double bound) {
    return v.cwiseMax(-bound).cwiseMin(bound);
}

Vec fgsm_l2(const MLPModel& model, const Vec& s, double label, double power_budget,
            bool random_fallback, Rng* fallback_rng) {
    if (power_budget <= 0.0) throw std::invalid_argument("fgsm_l2: power budget must be > 0");
    Vec g = classifier_gradient(model, s, label);
    double n = g.norm();
    if (n == 0.0) {
        if (!random_fallback || fallback_rng == nullptr)
            throw std::runtime_error("fgsm_l2: zero gradient, attack direction undefined");
        for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = fallback_rng->normal();
        n = g.norm();
    }
    return std::sqrt(power_budget) * g / n;
}

Vec fgsm_linf(const MLPModel& model, const Vec& s, double label, double power_budget) {
    if (power_budget <= 0.0) throw std::invalid_argument("fgsm_linf: power budget must be > 0");
    return std::sqrt(power_budget) * sign_of(classifier_gradient(model, s, label));
}

Vec pgd_l2(const MLPModel& model, const Vec& s, double label, double power_budget,
           int iterations) {
    if (power_budget <= 0.0) throw std::invalid_argument("pgd_l2: power budget must be > 0");
    if (iterations < 1) throw std::invalid_argument("pgd_l2: iterations must be >= 1");
    const double radius = std::sqrt(power_budget);
    const double beta = 2.0 * radius / static_cast<double>(iterations);
    Vec delta = Vec::Zero(s.size());
    for (int t = 0; t < iterations; ++t) {
        const Vec g = classifier_gradient(model, s + delta, label);
        const double n = g.norm();
        if (n == 0.0) continue;  // keep the current iterate
        delta = project_l2_ball(delta + beta * g / n, radius);
    }
    return delta;
}

Vec pgd_linf(const MLPModel& model, const Vec& s, double label, double power_budget,
             int iterations) {
    if (power_budget <= 0.0) throw std::invalid_argument("pgd_linf: power budget must be > 0");
    if (iterations < 1) throw std::invalid_argument("pgd_linf: iterations must be >= 1");
    const double bound = std::sqrt(power_budget);
    const double beta = bound / static_cast<double>(iterations);
    Vec delta = Vec::Zero(s.size());
    for (int t = 0; t < iterations; ++t) {
        const Vec g = classifier_gradient(model, s + delta, label);
        delta = clip_linf(delta + beta * sign_of(g), bound);
    }
    return delta;
}

AttackResult craft_delta(const MLPModel& model, const Vec& s, double label,
                         const PerturbationSpec& spec, Rng* fallback_rng) {
    AttackResult res;
    res.loss_before = classifier_loss(model, s, label);
    if (spec.algorithm == AttackAlgo::fgsm) {
        res.delta = spec.norm == NormKind::l2
                        ? fgsm_l2(model, s, label, spec.power_budget, spec.random_fallback,
                                  fallback_rng)
                        : fgsm_linf(model, s, label, spec.power_budget);
        res.iterations_used = 1;
    } else {
        res.delta = spec.norm == NormKind::l2
                        ? pgd_l2(model, s, label, spec.power_budget, spec.iterations)
                        : pgd_linf(model, s, label, spec.power_budget, spec.iterations);
        res.iterations_used = spec.iterations;
    }
    res.loss_after = classifier_loss(model, s + res.delta, label);
    return res;
}

Mat craft_deltas_at_psr(const MLPModel& model, const Mat& inputs, const Vec& labels,
                        const PerturbationSpec& spec, double target_psr_db) {
    if (inputs.cols() != labels.size())
        throw std::invalid_argument("craft_deltas_at_psr: label count mismatch");
    const Eigen::Index n = inputs.cols();
    const double psr_lin = std::pow(10.0, target_psr_db / 10.0);
    Mat targets = labels.transpose();

    // Per-column l2 radii / linf bounds sized so the crafted delta lands at
    // the PSR target for that column's signal power.
    Vec radius(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ns = inputs.col(i).squaredNorm();
        const double budget =
            spec.norm == NormKind::l2 ? psr_lin * ns : psr_lin * ns / static_cast<double>(inputs.rows());
        radius(i) = std::sqrt(budget);
    }

    const int iters = spec.algorithm == AttackAlgo::fgsm ? 1 : spec.iterations;
    Mat delta = Mat::Zero(inputs.rows(), n);
    for (int t = 0; t < iters; ++t) {
        const Mat g = input_gradient_batch(model, inputs + delta, targets, LossKind::cross_entropy);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (spec.norm == NormKind::l2) {
                const double gn = g.col(i).norm();
                if (gn == 0.0) continue;
                const double beta =
                    spec.algorithm == AttackAlgo::fgsm ? radius(i) : 2.0 * radius(i) / iters;
                delta.col(i) = project_l2_ball(delta.col(i) + beta * g.col(i) / gn, radius(i));
            } else {
                const double beta =
                    spec.algorithm == AttackAlgo::fgsm ? radius(i) : radius(i) / iters;
                delta.col(i) = clip_linf(delta.col(i) + beta * sign_of(g.col(i)), radius(i));
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (delta.col(i).norm() > 0.0)
            delta.col(i) = scale_to_psr(delta.col(i), inputs.col(i), target_psr_db);
    return delta;
}

CraftOutcome craft_at_transmitter(const MLPModel& receiver_model, const IQSignal& x_fp,
                                  const ChannelRealization& channel_estimate, double snr_db,
                                  double label, const PerturbationSpec& spec,
                                  double target_psr_db, Rng& rng) {
    CraftOutcome out;
    out.target_psr_db = target_psr_db;
    if (std::isinf(target_psr_db) && target_psr_db < 0.0) {
        out.x_adv = x_fp;
        out.delta_real = Vec::Zero(2 * static_cast<Eigen::Index>(x_fp.size()));
        out.achieved_psr_db = -std::numeric_limits<double>::infinity();
        return out;
    }

    // The transmitter only knows the channel/noise distributions; its view of
    // s_R is one seeded draw from them.
    const IQSignal s_approx = transmit(x_fp, channel_estimate, snr_db, rng);
    const Vec s_real = to_real(s_approx);

    // Derive the power budget from the PSR target so the iterative attacks
    // run at the geometry they will be deployed at.
    PerturbationSpec sized = spec;
    const double psr_lin = std::pow(10.0, target_psr_db / 10.0);
    const double ns = s_real.squaredNorm();
    sized.power_budget = spec.norm == NormKind::l2
                             ? psr_lin * ns
                             : psr_lin * ns / static_cast<double>(s_real.size());

    AttackResult res = craft_delta(receiver_model, s_real, label, sized, &rng);
    if (res.delta.norm() == 0.0) {
        out.x_adv = x_fp;
        out.delta_real = res.delta;
        out.achieved_psr_db = -std::numeric_limits<double>::infinity();
        return out;
    }
    out.delta_real = scale_to_psr(res.delta, s_real, target_psr_db);
    out.achieved_psr_db = psr_db(out.delta_real, s_real);
    out.x_adv = add(x_fp, to_complex(out.delta_real));
    return out;
}

}  // namespace rff
