#include "phylo/logreg.hpp"

#include "phylo/error.hpp"
#include "phylo/objective.hpp"

#include <algorithm>
#include <cmath>

namespace phylo {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double row_dot(const ChromosomeMatrix& m, std::size_t r, const Eigen::VectorXd& w) {
    double s = 0.0;
    for (auto c : m.row(r)) s += w(c);
    return s;
}

void check_inputs(const ChromosomeMatrix& matrix, const std::vector<int>& labels, const std::vector<bool>& mask) {
    if (labels.size() != matrix.rows() || mask.size() != matrix.rows()) {
        throw ValidationError("labels and mask must have one entry per product");
    }
}

} // namespace

LogRegLoss logreg_loss(const ChromosomeMatrix& matrix, const std::vector<int>& labels,
                       const std::vector<bool>& mask, const Eigen::VectorXd& node_weights,
                       const Eigen::VectorXd& w, double b, double l2) {
    check_inputs(matrix, labels, mask);
    LogRegLoss out;
    out.grad_w = Eigen::VectorXd::Zero(w.size());
    double wsum = 0.0;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        if (!mask[i]) continue;
        const double wi = node_weights.size() ? node_weights(static_cast<Eigen::Index>(i)) : 1.0;
        const double z = row_dot(matrix, i, w) + b;
        const double y = labels[i];
        out.value += wi * (softplus(z) - y * z);
        const double g = wi * (sigmoid(z) - y);
        for (auto c : matrix.row(i)) out.grad_w(c) += g;
        out.grad_b += g;
        wsum += wi;
    }
    if (wsum <= 0.0) throw ValidationError("logistic loss needs at least one masked product");
    out.value /= wsum;
    out.grad_w /= wsum;
    out.grad_b /= wsum;
    out.value += 0.5 * l2 * w.squaredNorm();
    out.grad_w += l2 * w;
    return out;
}

LogRegModel train_logreg(const ChromosomeMatrix& matrix, const std::vector<int>& labels,
                         const std::vector<bool>& train_mask, const LogRegOptions& options) {
    check_inputs(matrix, labels, train_mask);
    if (!(options.l2 >= 0.0) || options.max_iterations < 0) throw ValidationError("invalid logistic options");
    bool pos = false, neg = false;
    std::size_t max_row = 0;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        if (!train_mask[i]) continue;
        (labels[i] == 1 ? pos : neg) = true;
        max_row = std::max(max_row, matrix.row(i).size());
    }
    if (!pos || !neg) throw ValidationError("training mask must contain both classes");

    Eigen::VectorXd node_weights;
    if (options.class_weighting) node_weights = inverse_class_weights(labels, train_mask);

    // Binary rows: |[x, 1]|^2 = nnz + 1, and the logistic curvature is at most 1/4.
    const double lipschitz = 0.25 * static_cast<double>(max_row + 1) + options.l2;
    const double step = 1.0 / lipschitz;

    LogRegModel model;
    model.l2 = options.l2;
    model.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(matrix.cols()));
    for (int it = 0;; ++it) {
        const auto loss = logreg_loss(matrix, labels, train_mask, node_weights, model.weights, model.bias, options.l2);
        model.gradient_norm = std::sqrt(loss.grad_w.squaredNorm() + loss.grad_b * loss.grad_b);
        model.iterations = it;
        if (model.gradient_norm <= options.tolerance || it >= options.max_iterations) break;
        model.weights -= step * loss.grad_w;
        model.bias -= step * loss.grad_b;
    }
    if (!model.weights.allFinite() || !std::isfinite(model.bias)) {
        throw TrainingError("logistic regression diverged");
    }
    return model;
}

Eigen::VectorXd logreg_probabilities(const LogRegModel& model, const ChromosomeMatrix& matrix) {
    if (static_cast<std::size_t>(model.weights.size()) != matrix.cols()) {
        throw ValidationError("logistic model has " + std::to_string(model.weights.size()) +
                              " weights but the matrix has " + std::to_string(matrix.cols()) + " genotypes");
    }
    Eigen::VectorXd p(static_cast<Eigen::Index>(matrix.rows()));
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        p(static_cast<Eigen::Index>(i)) = sigmoid(row_dot(matrix, i, model.weights) + model.bias);
    }
    return p;
}

LogRegPrediction predict_logreg(const LogRegModel& model, const ChromosomeMatrix& matrix,
                                const std::vector<bool>& mask) {
    if (!mask.empty() && mask.size() != matrix.rows()) throw ValidationError("mask length mismatch");
    const Eigen::VectorXd all = logreg_probabilities(model, matrix);
    LogRegPrediction out;
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        if (mask.empty() || mask[i]) out.nodes.push_back(i);
    }
    out.probability.resize(static_cast<Eigen::Index>(out.nodes.size()));
    for (std::size_t k = 0; k < out.nodes.size(); ++k) {
        const double p = all(static_cast<Eigen::Index>(out.nodes[k]));
        out.probability(static_cast<Eigen::Index>(k)) = p;
        out.predicted.push_back(p >= kDecisionThreshold ? 1 : 0);
    }
    return out;
}

} // namespace phylo
