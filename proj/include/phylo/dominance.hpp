#pragma once
// Dominant genotype detection and dominant product labels.
//
// A genotype is dominant when, in some year at or after its birth year, the
// share of products carrying it strictly exceeds the threshold. A product is
// a dominant product when it carries a dominant genotype in that genotype's
// birth year; later carriers are not labeled.
#include "phylo/product_panel.hpp"

#include <map>
#include <optional>
#include <vector>

namespace phylo {

struct GenotypeDossier {
    std::uint32_t genotype = 0;
    int birth_year = 0;
    std::map<int, double> adoption_ratio; // year -> carriers / products, years >= birth
    bool dominant = false;
    std::optional<int> dominance_year;
    std::optional<int> years_to_dominance;

    friend bool operator==(const GenotypeDossier&, const GenotypeDossier&) = default;
};

struct ProductLabels {
    std::vector<int> d;                                    // per row, 0/1
    std::vector<std::vector<std::uint32_t>> introduced;    // per row, dominant genotypes born in it
    std::map<std::uint32_t, std::size_t> birth_carriers;   // dominant genotype -> birth-year carrier count

    std::size_t dominant_count() const;
};

std::vector<int> genotype_birth_years(const ChromosomeMatrix& matrix);

// threshold must lie strictly inside (0, 1). Dossiers are ordered by genotype index.
std::vector<GenotypeDossier> detect_dominant_genotypes(const ChromosomeMatrix& matrix, double threshold);

ProductLabels label_dominant_products(const ChromosomeMatrix& matrix,
                                      const std::vector<GenotypeDossier>& dossiers);

// Five-number style summary; quantiles interpolate linearly between order
// statistics and std uses the n-1 denominator.
struct SummaryStats {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;
    double max = 0.0;
};

SummaryStats summarize(std::vector<double> values);
double quantile_linear(const std::vector<double>& sorted, double q);

struct YearRow {
    int year = 0;
    std::size_t dominant_products = 0;
    std::size_t total_products = 0;
    double dominant_ratio = 0.0;
    std::size_t dominant_genotypes = 0; // dominant genotypes born this year
};

struct DominanceStatistics {
    double threshold = 0.0;
    std::size_t genotype_count = 0;
    std::size_t dominant_genotype_count = 0;
    std::size_t dominant_product_count = 0;
    SummaryStats years_to_dominance;
    std::vector<YearRow> per_year;
    SummaryStats carriers_per_dominant_genotype;
    SummaryStats genotypes_per_dominant_product;
};

DominanceStatistics dominance_statistics(const std::vector<GenotypeDossier>& dossiers,
                                         const ProductLabels& labels, const ChromosomeMatrix& matrix,
                                         double threshold);

} // namespace phylo
