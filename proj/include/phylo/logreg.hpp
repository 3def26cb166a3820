#pragma once
// Logistic-regression baseline over raw binary chromosomes.
#include "phylo/product_panel.hpp"

#include <Eigen/Dense>
#include <vector>

namespace phylo {

struct LogRegModel {
    Eigen::VectorXd weights; // length n
    double bias = 0.0;
    double l2 = 1e-4;
    int iterations = 0;
    double gradient_norm = 0.0;
};

struct LogRegOptions {
    double l2 = 1e-4;
    bool class_weighting = false;
    int max_iterations = 5000;
    double tolerance = 1e-6; // on the full gradient norm
};

// Mean-normalized weighted logistic loss over the mask plus (l2/2)|w|^2.
struct LogRegLoss {
    double value = 0.0;
    Eigen::VectorXd grad_w;
    double grad_b = 0.0;
};
LogRegLoss logreg_loss(const ChromosomeMatrix& matrix, const std::vector<int>& labels,
                       const std::vector<bool>& mask, const Eigen::VectorXd& node_weights,
                       const Eigen::VectorXd& w, double b, double l2);

LogRegModel train_logreg(const ChromosomeMatrix& matrix, const std::vector<int>& labels,
                         const std::vector<bool>& train_mask, const LogRegOptions& options = {});

struct LogRegPrediction {
    std::vector<std::size_t> nodes;
    Eigen::VectorXd probability; // parallel to nodes
    std::vector<int> predicted;
};

// Empty mask -> all rows.
LogRegPrediction predict_logreg(const LogRegModel& model, const ChromosomeMatrix& matrix,
                                const std::vector<bool>& mask);

// Probabilities for every row.
Eigen::VectorXd logreg_probabilities(const LogRegModel& model, const ChromosomeMatrix& matrix);

} // namespace phylo
