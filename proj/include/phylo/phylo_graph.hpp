#pragma once
// Fully connected phylogenetic network (FCPN) and the conventional product tree.
#include "phylo/product_panel.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace phylo {

// |a ∩ b| / |a ∪ b| over sorted column lists; 0 when both are empty.
double jaccard_similarity(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

inline double jaccard_similarity(ChromosomeMatrix::RowView a, ChromosomeMatrix::RowView b) {
    return jaccard_similarity(std::span<const std::uint32_t>(a.begin(), a.size()),
                              std::span<const std::uint32_t>(b.begin(), b.size()));
}

struct Generation {
    int year = 0;
    std::vector<std::size_t> nodes; // row indices, ascending
};

// Groups matrix rows by year; consecutive distinct years are adjacent.
std::vector<Generation> group_generations(const ChromosomeMatrix& matrix);

struct Edge {
    std::size_t src = 0;
    std::size_t dst = 0;
    double weight = 0.0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

// Shared node table + directed edge list. Node ids are ChromosomeMatrix row indices.
struct PhyloGraph {
    std::vector<std::string> product_ids;
    std::vector<int> years;
    std::vector<Generation> generations;
    std::vector<Edge> edges; // sorted by (src, dst)

    std::size_t node_count() const { return years.size(); }
};

struct Fcpn : PhyloGraph {};

struct PhyloTree : PhyloGraph {
    double threshold = 0.0;
};

// Full bipartite Jaccard-weighted links from every generation to the next.
// Zero-weight links are kept.
Fcpn build_fcpn(const ChromosomeMatrix& matrix);

// Keeps, per descendant, the single most similar previous-generation ancestor
// when that similarity is >= threshold (ties -> lowest ancestor row).
PhyloTree build_product_tree(const ChromosomeMatrix& matrix, double threshold);

// Writes nodes.csv and edges.csv (weights with 9 decimals) into out_dir.
void export_graph(const PhyloGraph& graph, const std::filesystem::path& out_dir);

} // namespace phylo
