#pragma once
// PCA reduction of chromosomes and chronological split masks.
#include "phylo/product_panel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace phylo {

struct PcaModel {
    Eigen::VectorXd mean;                     // length n
    Eigen::MatrixXd components;               // k x n, orthonormal rows
    Eigen::VectorXd explained_variance;       // per component, n-1 denominator
    Eigen::VectorXd explained_variance_ratio; // per component
    double retained_fraction = 1.0;

    std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(components.rows()); }
};

// Fits on mean-centred rows. When fit_rows is given only those rows are used
// (train-only fit); otherwise all rows (transductive). k is the smallest count
// whose cumulative explained-variance ratio reaches `retained`.
PcaModel fit_pca(const ChromosomeMatrix& matrix, double retained,
                 const std::optional<std::vector<bool>>& fit_rows = std::nullopt);

Eigen::MatrixXd transform_pca(const PcaModel& model, const ChromosomeMatrix& matrix);

// Inverse mapping, rows of `features` back to chromosome space.
Eigen::MatrixXd reconstruct_pca(const PcaModel& model, const Eigen::MatrixXd& features);

struct SplitYears {
    int train = 0;
    int val = 0;
    int test = 0;
    friend bool operator==(const SplitYears&, const SplitYears&) = default;
};

// Parses "a,b,c".
SplitYears parse_split_years(const std::string& text);

enum class Split { Train, Val, Test };
const char* split_name(Split s);

struct SplitMasks {
    std::vector<bool> train;
    std::vector<bool> val;
    std::vector<bool> test;
    SplitYears years;
    std::vector<int> train_years, val_years, test_years;

    const std::vector<bool>& mask(Split s) const;
    Split split_of(std::size_t node) const;
};

// First a distinct years -> train, next b -> validation, last c -> test.
SplitMasks make_split_masks(const ChromosomeMatrix& matrix, SplitYears years);

std::size_t mask_count(const std::vector<bool>& mask);

} // namespace phylo
