#pragma once
// Confusion counts, evaluation ratios, weighted BCE and the composite loss
// (BCE minus the overall weighted score of the ratios).
#include <Eigen/Dense>

#include <array>
#include <vector>

namespace phylo {

enum class CountMode { Hard, Soft };

struct ConfusionCounts {
    double tp = 0.0;
    double fp = 0.0;
    double tn = 0.0;
    double fn = 0.0;
    double total() const { return tp + fp + tn + fn; }
};

// Order: TPR, TNR, PPV, NPV, FPER, DR.
struct RatioVector {
    double tpr = 0.0;
    double tnr = 0.0;
    double ppv = 0.0;
    double npv = 0.0;
    double fper = 0.0;
    double dr = 0.0;
    std::array<double, 6> as_array() const { return {tpr, tnr, ppv, npv, fper, dr}; }
};

struct ObjectiveWeights {
    double tpr = 0.5;
    double tnr = 0.1;
    double ppv = 0.1;
    double npv = 0.1;
    double fper = 0.2;
    double dr = 0.0;
    std::array<double, 6> as_array() const { return {tpr, tnr, ppv, npv, fper, dr}; }
    static ObjectiveWeights zeros() { return {0, 0, 0, 0, 0, 0}; }
};

constexpr double kDecisionThreshold = 0.5; // p >= 0.5 -> class 1
constexpr double kProbabilityClip = 1e-7;
constexpr double kSoftRatioEpsilon = 1e-7;

// Labels 0/1; mask selects the evaluated nodes. An empty mask vector means all nodes.
ConfusionCounts confusion_counts(const std::vector<int>& labels, const Eigen::VectorXd& probability,
                                 const std::vector<bool>& mask, CountMode mode);

// Zero denominators give 0. Raises when every count is zero.
RatioVector ratio_vector(const ConfusionCounts& c);

// Soft-count variant used in training: every denominator gets +epsilon.
RatioVector ratio_vector_smoothed(const ConfusionCounts& c, double epsilon = kSoftRatioEpsilon);

double accuracy(const ConfusionCounts& c);

double overall_weighted_score(const RatioVector& r, const ObjectiveWeights& w);

// Per-node weights: inverse class size on the training mask, normalized to
// mean 1 over that mask. Raises when the mask lacks either class.
Eigen::VectorXd inverse_class_weights(const std::vector<int>& labels, const std::vector<bool>& train_mask);

// -(1/sum w) * sum w_i (d_i log p_i + (1-d_i) log(1-p_i)) over the mask, with p
// clipped to [1e-7, 1-1e-7]. An empty weight vector means unit weights.
double weighted_bce(const std::vector<int>& labels, const Eigen::VectorXd& probability,
                    const std::vector<bool>& mask, const Eigen::VectorXd& class_weights);

struct LossValue {
    double total = 0.0;
    double bce = 0.0;
    double ows = 0.0;
    Eigen::VectorXd grad_probability; // d total / d p, zero outside the mask
};

// total = weighted_bce - S_w. Soft mode builds S_w from probabilistic counts
// with smoothed ratios (differentiable); hard mode uses thresholded counts,
// which contribute no gradient.
LossValue total_loss(const std::vector<int>& labels, const Eigen::VectorXd& probability,
                     const std::vector<bool>& mask, const ObjectiveWeights& weights,
                     const Eigen::VectorXd& class_weights, CountMode mode);

struct EvaluationRecord {
    ConfusionCounts counts;
    double accuracy = 0.0;
    RatioVector ratios;
    double ows = 0.0;
};

EvaluationRecord evaluate_predictions(const std::vector<int>& labels, const Eigen::VectorXd& probability,
                                      const std::vector<bool>& mask, const ObjectiveWeights& weights);

// Same record from predicted hard labels.
EvaluationRecord evaluate_hard_labels(const std::vector<int>& labels, const std::vector<int>& predicted,
                                      const ObjectiveWeights& weights);

} // namespace phylo
