#include "phylo/objective.hpp"

#include "phylo/error.hpp"

#include <algorithm>
#include <cmath>

namespace phylo {

namespace {

bool selected(const std::vector<bool>& mask, std::size_t i) { return mask.empty() || mask[i]; }

void check_lengths(const std::vector<int>& labels, const Eigen::VectorXd& p, const std::vector<bool>& mask) {
    if (static_cast<Eigen::Index>(labels.size()) != p.size() || (!mask.empty() && mask.size() != labels.size())) {
        throw ValidationError("labels, probabilities and mask must have equal lengths");
    }
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double clip(double p) { return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip); }

} // namespace

ConfusionCounts confusion_counts(const std::vector<int>& labels, const Eigen::VectorXd& probability,
                                 const std::vector<bool>& mask, CountMode mode) {
    check_lengths(labels, probability, mask);
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!selected(mask, i)) continue;
        const double p = probability(static_cast<Eigen::Index>(i));
        const bool pos = labels[i] == 1;
        if (mode == CountMode::Hard) {
            const bool pred = p >= kDecisionThreshold;
            if (pos && pred) c.tp += 1;
            else if (!pos && pred) c.fp += 1;
            else if (!pos) c.tn += 1;
            else c.fn += 1;
        } else if (pos) {
            c.tp += p;
            c.fn += 1.0 - p;
        } else {
            c.fp += p;
            c.tn += 1.0 - p;
        }
    }
    return c;
}

RatioVector ratio_vector(const ConfusionCounts& c) {
    if (c.tp == 0.0 && c.fp == 0.0 && c.tn == 0.0 && c.fn == 0.0) {
        throw ValidationError("ratio_vector: all confusion counts are zero");
    }
    RatioVector r;
    r.tpr = safe_div(c.tp, c.tp + c.fn);
    r.tnr = safe_div(c.tn, c.tn + c.fp);
    r.ppv = safe_div(c.tp, c.tp + c.fp);
    r.npv = safe_div(c.tn, c.tn + c.fn);
    r.fper = safe_div(c.fp, c.fn + c.fp);
    const double u = c.tp - c.fn + c.fp - c.tn;
    r.dr = -safe_div(u * u, c.total() * c.total());
    return r;
}

RatioVector ratio_vector_smoothed(const ConfusionCounts& c, double eps) {
    RatioVector r;
    r.tpr = c.tp / (c.tp + c.fn + eps);
    r.tnr = c.tn / (c.tn + c.fp + eps);
    r.ppv = c.tp / (c.tp + c.fp + eps);
    r.npv = c.tn / (c.tn + c.fn + eps);
    r.fper = c.fp / (c.fn + c.fp + eps);
    const double u = c.tp - c.fn + c.fp - c.tn;
    const double s = c.total() + eps;
    r.dr = -(u * u) / (s * s);
    return r;
}

double accuracy(const ConfusionCounts& c) {
    if (!(c.total() > 0.0)) throw ValidationError("accuracy: no evaluated samples");
    return (c.tp + c.tn) / c.total();
}

double overall_weighted_score(const RatioVector& r, const ObjectiveWeights& w) {
    const auto a = r.as_array();
    const auto b = w.as_array();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Eigen::VectorXd inverse_class_weights(const std::vector<int>& labels, const std::vector<bool>& train_mask) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!selected(train_mask, i)) continue;
        (labels[i] == 1 ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) throw ValidationError("training mask must contain both classes");
    const double n = static_cast<double>(pos + neg);
    const double w_pos = n / (2.0 * static_cast<double>(pos));
    const double w_neg = n / (2.0 * static_cast<double>(neg));
    Eigen::VectorXd w(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) w(static_cast<Eigen::Index>(i)) = labels[i] == 1 ? w_pos : w_neg;
    return w;
}

double weighted_bce(const std::vector<int>& labels, const Eigen::VectorXd& probability, const std::vector<bool>& mask,
                    const Eigen::VectorXd& class_weights) {
    check_lengths(labels, probability, mask);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!selected(mask, i)) continue;
        const auto ii = static_cast<Eigen::Index>(i);
        const double w = class_weights.size() == 0 ? 1.0 : class_weights(ii);
        const double p = clip(probability(ii));
        num += w * (labels[i] == 1 ? std::log(p) : std::log(1.0 - p));
        den += w;
    }
    if (den == 0.0) throw ValidationError("weighted_bce: empty mask");
    return -num / den;
}

LossValue total_loss(const std::vector<int>& labels, const Eigen::VectorXd& probability, const std::vector<bool>& mask,
                     const ObjectiveWeights& weights, const Eigen::VectorXd& class_weights, CountMode mode) {
    check_lengths(labels, probability, mask);
    LossValue out;
    out.bce = weighted_bce(labels, probability, mask, class_weights);
    out.grad_probability = Eigen::VectorXd::Zero(probability.size());

    double wsum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (selected(mask, i)) wsum += class_weights.size() == 0 ? 1.0 : class_weights(static_cast<Eigen::Index>(i));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!selected(mask, i)) continue;
        const auto ii = static_cast<Eigen::Index>(i);
        const double raw = probability(ii);
        if (raw <= kProbabilityClip || raw >= 1.0 - kProbabilityClip) continue; // clipped: flat
        const double w = class_weights.size() == 0 ? 1.0 : class_weights(ii);
        out.grad_probability(ii) = labels[i] == 1 ? -w / (raw * wsum) : w / ((1.0 - raw) * wsum);
    }

    const ConfusionCounts c = confusion_counts(labels, probability, mask, mode);
    if (mode == CountMode::Hard) {
        out.ows = overall_weighted_score(ratio_vector(c), weights);
        out.total = out.bce - out.ows;
        return out;
    }

    const double eps = kSoftRatioEpsilon;
    const RatioVector r = ratio_vector_smoothed(c, eps);
    out.ows = overall_weighted_score(r, weights);
    out.total = out.bce - out.ows;

    // dS_w / d(count) for each soft count; ratio a/(a+b+eps) has partials
    // (b+eps)/den^2 and -a/den^2.
    double d_tp = 0.0, d_fp = 0.0, d_tn = 0.0, d_fn = 0.0;
    const auto ratio_partials = [](double a, double b, double e, double& da, double& db, double weight) {
        const double den = a + b + e;
        da += weight * (b + e) / (den * den);
        db += weight * (-a) / (den * den);
    };
    ratio_partials(c.tp, c.fn, eps, d_tp, d_fn, weights.tpr);
    ratio_partials(c.tn, c.fp, eps, d_tn, d_fp, weights.tnr);
    ratio_partials(c.tp, c.fp, eps, d_tp, d_fp, weights.ppv);
    ratio_partials(c.tn, c.fn, eps, d_tn, d_fn, weights.npv);
    ratio_partials(c.fp, c.fn, eps, d_fp, d_fn, weights.fper);
    {
        const double u = c.tp - c.fn + c.fp - c.tn;
        const double s = c.total() + eps;
        const double common = 2.0 * u * u / (s * s * s);
        d_tp += weights.dr * (-2.0 * u / (s * s) + common);
        d_fp += weights.dr * (-2.0 * u / (s * s) + common);
        d_fn += weights.dr * (2.0 * u / (s * s) + common);
        d_tn += weights.dr * (2.0 * u / (s * s) + common);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!selected(mask, i)) continue;
        const auto ii = static_cast<Eigen::Index>(i);
        // positives: tp += p, fn += 1-p; negatives: fp += p, tn += 1-p
        const double ds_dp = labels[i] == 1 ? d_tp - d_fn : d_fp - d_tn;
        out.grad_probability(ii) -= ds_dp;
    }
    return out;
}

EvaluationRecord evaluate_predictions(const std::vector<int>& labels, const Eigen::VectorXd& probability,
                                      const std::vector<bool>& mask, const ObjectiveWeights& weights) {
    EvaluationRecord e;
    e.counts = confusion_counts(labels, probability, mask, CountMode::Hard);
    e.accuracy = accuracy(e.counts);
    e.ratios = ratio_vector(e.counts);
    e.ows = overall_weighted_score(e.ratios, weights);
    return e;
}

EvaluationRecord evaluate_hard_labels(const std::vector<int>& labels, const std::vector<int>& predicted,
                                      const ObjectiveWeights& weights) {
    if (labels.size() != predicted.size()) throw ValidationError("label and prediction lengths differ");
    Eigen::VectorXd p(static_cast<Eigen::Index>(predicted.size()));
    for (std::size_t i = 0; i < predicted.size(); ++i) p(static_cast<Eigen::Index>(i)) = predicted[i] == 1 ? 1.0 : 0.0;
    return evaluate_predictions(labels, p, {}, weights);
}

} // namespace phylo
