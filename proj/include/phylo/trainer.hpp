#pragma once
// Full-batch transductive training, multi-seed evaluation and prediction.
#include "phylo/dominance.hpp"
#include "phylo/fcp_gnn.hpp"
#include "phylo/features.hpp"
#include "phylo/objective.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace phylo {

enum class PcaFit { AllNodes, TrainOnly };

struct TrainConfig {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int max_epochs = 500;
    int patience = 50;
    std::uint64_t seed = 1;
    SplitYears split{16, 2, 3};
    double dominance_threshold = 0.5;
    double pca_fraction = 0.3;
    PcaFit pca_fit = PcaFit::AllNodes;
    int hidden = 32;
    int pooled = 32;
    int cheb_order = 2;
    int generations = 3;
    Activation activation = Activation::Identity;
    ObjectiveWeights weights;
    CountMode train_mode = CountMode::Soft;
    bool class_weighting = true;
};

// Everything the model consumes, derived from a product panel.
struct TrainingInputs {
    std::vector<std::string> product_ids;
    std::vector<int> years;
    std::string vocabulary_digest;
    ScaledLaplacian laplacian;
    PcaModel pca;
    Eigen::MatrixXd features;   // N x F
    std::vector<int> labels;    // d
    SplitMasks masks;
    std::vector<GenotypeDossier> dossiers;
    ProductLabels product_labels;

    std::size_t node_count() const { return labels.size(); }
};

// Vocabulary -> chromosomes -> FCPN -> Laplacian, labels at the configured
// threshold, split masks, PCA features.
TrainingInputs prepare_inputs(const std::vector<ProductRecord>& records, const TrainConfig& config);

// Same, reusing an already-fit PCA model (prediction with a checkpoint).
TrainingInputs prepare_inputs(const std::vector<ProductRecord>& records, const TrainConfig& config,
                              const PcaModel& pca);

ModelConfig model_config_for(const TrainConfig& config, int features);

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> train_bce;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    int epochs_run = 0;
};

struct TrainResult {
    FcpGnnModel model; // best-validation parameters
    TrainHistory history;
};

TrainResult train_model(const TrainingInputs& inputs, const TrainConfig& config);

// Loss and parameter gradient on the training mask at the current parameters.
struct LossAndGradient {
    LossValue loss;
    FcpGnnParams gradient;
};
LossAndGradient training_loss_and_gradient(const FcpGnnModel& model, const TrainingInputs& inputs,
                                           const TrainConfig& config);

struct PredictionRow {
    std::size_t node = 0;
    double probability = 0.0;
    int predicted = 0;
    int actual = 0;
};

// Empty mask -> all nodes.
std::vector<PredictionRow> predict(const FcpGnnModel& model, const TrainingInputs& inputs,
                                   const std::vector<bool>& mask);

std::string predictions_csv(const std::vector<PredictionRow>& rows, const TrainingInputs& inputs);

struct RunRecord {
    std::uint64_t seed = 0;
    double threshold = 0.0;
    SplitYears split;
    EvaluationRecord evaluation; // test mask
    EvaluationRecord train_evaluation;
    int best_epoch = -1;
    int epochs_run = 0;
};

struct AveragedMetrics {
    double tn = 0, tp = 0, fp = 0, fn = 0;
    double accuracy = 0, tpr = 0, tnr = 0, ppv = 0, npv = 0, fper = 0, dr = 0, ows = 0;
    std::size_t runs = 0;
};

struct SeedOutcome {
    RunRecord record;
    FcpGnnModel model;
    std::vector<PredictionRow> test_predictions;
};

struct MetricsReport {
    std::vector<RunRecord> runs;
    std::vector<std::uint64_t> failed_seeds;
    std::vector<std::string> failure_messages;
    AveragedMetrics averages;
    std::vector<SeedOutcome> outcomes; // parallel to runs
};

AveragedMetrics average_runs(const std::vector<RunRecord>& runs);

// Trains once per seed (config.seed is overridden). Failed seeds are logged,
// recorded and excluded from the averages. Seeds may run concurrently.
MetricsReport run_multi_seed(const TrainingInputs& inputs, const TrainConfig& config,
                             const std::vector<std::uint64_t>& seeds);

// Parses "1..5", "1,2,7" or a single number.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

} // namespace phylo
