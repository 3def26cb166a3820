#pragma once
// JSON persistence for models, PCA and run reports.
#include "phylo/trainer.hpp"

#include "json.hpp"

#include <filesystem>

namespace phylo {

struct Checkpoint {
    FcpGnnModel model;
    PcaModel pca;
    double pca_fraction = 0.3;
    double dominance_threshold = 0.5;
    std::uint64_t seed = 0;
    std::string vocabulary_digest;
};

nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::ordered_json evaluation_to_json(const EvaluationRecord& e);
nlohmann::ordered_json run_record_to_json(const RunRecord& r);
nlohmann::ordered_json averages_to_json(const AveragedMetrics& a);

// metrics.json layout: {"runs": [...], "averages": {...}}.
nlohmann::ordered_json metrics_to_json(const MetricsReport& report);

} // namespace phylo
