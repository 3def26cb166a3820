#pragma once
// Seeded generator of synthetic product panels with planted dominant genotypes.
#include "phylo/product_panel.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace phylo {

// A genotype injected at a given year index whose carrier share stays at or
// below the threshold for `lead` years and strictly above it afterwards.
// An explicit schedule lists the per-year carrier ratio from the birth year;
// its last value repeats.
struct PlantedDominant {
    int birth = 2; // 1-based year index
    int lead = 1;
    std::vector<double> schedule;
};

struct SynthConfig {
    int years = 15;
    int first_year = 2001;
    std::vector<int> products_per_year{30}; // one entry per year, or a single entry for all
    int founder_genome = 40;
    int founder_pool = 0;      // distinct founder genes; 0 means 4 x founder_genome
    int founder_lineages = 0;  // distinct founder genomes; 0 means one per founder
    double mutation_rate = 2.0; // mean brand-new genotypes per product
    double vertical_inheritance = 0.9;
    double hgt_rate = 0.1;
    double planted_fitness = 2.0; // extra ancestor weight per planted genotype still at or below the threshold
    std::vector<PlantedDominant> planted;
    double threshold = 0.5;
    std::uint64_t seed = 1;
};

SynthConfig benchmark_synth_config();

// Unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json synth_config_to_json(const SynthConfig& c);

struct TruthGenotype {
    std::string genotype;
    int birth_year = 0;
    std::map<int, double> adoption_ratio;
    bool dominant = false;
    std::optional<int> dominance_year;
    std::optional<int> years_to_dominance;
    bool planted = false;
};

struct SynthTruth {
    double threshold = 0.5;
    std::vector<TruthGenotype> genotypes;   // sorted by name
    std::map<std::string, int> labels;       // product id -> 0/1
    std::vector<std::string> planted_names; // in config order
};

struct SynthPanel {
    std::vector<ProductRecord> records; // (year, id) order
    SynthTruth truth;
};

SynthPanel generate_panel(const SynthConfig& config);

nlohmann::ordered_json truth_to_json(const SynthTruth& truth);

} // namespace phylo
