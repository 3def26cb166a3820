#pragma once
// Command-line entry point: ingest, graph, label, stats, split, train,
// predict, evaluate, baseline, synth.
#include "phylo/evo_synth.hpp"
#include "phylo/trainer.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace phylo {

inline constexpr const char* kToolName = "phylo_forecast";
inline constexpr const char* kToolVersion = "1.0.0";

// Every tunable a run can carry. Absent keys keep these defaults.
struct RunConfig {
    std::string input;
    std::string format = "auto"; // auto | csv | jsonl
    std::vector<double> thresholds{0.4, 0.5, 0.6};
    double tree_threshold = 0.0;
    TrainConfig train;
    std::string seeds = "1";
    double l2 = 1e-4;
    bool baseline_class_weighting = true;
    std::string checkpoint;
    std::string predictions;
    std::string mask = "test"; // train | val | test | all
    std::string output_format = "csv";
    SynthConfig synth;
    bool benchmark = false;
};

// Unknown keys raise ValidationError.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json run_config_to_json(const RunConfig& c);

// Returns the process exit code: 0 success, 1 usage or validation error, 2 I/O error.
int run_command(const std::vector<std::string>& args);
int run_command(int argc, char** argv);

} // namespace phylo
