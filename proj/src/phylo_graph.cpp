#include "phylo/phylo_graph.hpp"

#include "phylo/error.hpp"
#include "phylo/util.hpp"

#include <algorithm>
#include <sstream>

namespace phylo {

double jaccard_similarity(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    std::size_t inter = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Generation> group_generations(const ChromosomeMatrix& matrix) {
    std::vector<Generation> gens;
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        const int y = matrix.year(r);
        if (gens.empty() || gens.back().year != y) {
            if (!gens.empty() && gens.back().year > y) {
                throw ValidationError("chromosome rows are not sorted by year");
            }
            gens.push_back({y, {}});
        }
        gens.back().nodes.push_back(r);
    }
    return gens;
}

namespace {

PhyloGraph node_table(const ChromosomeMatrix& matrix) {
    if (matrix.rows() == 0) throw ValidationError("cannot build a graph from an empty matrix");
    PhyloGraph g;
    g.product_ids = matrix.product_ids();
    g.years = matrix.years();
    g.generations = group_generations(matrix);
    return g;
}

} // namespace

Fcpn build_fcpn(const ChromosomeMatrix& matrix) {
    Fcpn out;
    static_cast<PhyloGraph&>(out) = node_table(matrix);
    const auto& gens = out.generations;

    // Rows are year-sorted, so iterating (generation pair, src, dst) in order
    // yields edges already sorted by (src, dst).
    std::size_t total = 0;
    std::vector<std::size_t> pair_offset;
    for (std::size_t t = 0; t + 1 < gens.size(); ++t) {
        pair_offset.push_back(total);
        total += gens[t].nodes.size() * gens[t + 1].nodes.size();
    }
    out.edges.resize(total);

    // One parallel task per source node; each writes its own contiguous slice.
    struct Task {
        std::size_t pair, local_src;
    };
    std::vector<Task> tasks;
    for (std::size_t t = 0; t + 1 < gens.size(); ++t) {
        for (std::size_t i = 0; i < gens[t].nodes.size(); ++i) tasks.push_back({t, i});
    }
    parallel_for(tasks.size(), [&](std::size_t k) {
        const auto [t, i] = tasks[k];
        const auto& next = gens[t + 1].nodes;
        const std::size_t src = gens[t].nodes[i];
        std::size_t slot = pair_offset[t] + i * next.size();
        for (const std::size_t dst : next) {
            out.edges[slot++] = {src, dst, jaccard_similarity(matrix.row(src), matrix.row(dst))};
        }
    });
    return out;
}

PhyloTree build_product_tree(const ChromosomeMatrix& matrix, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ValidationError("tree threshold must lie in [0, 1]");
    }
    PhyloTree out;
    static_cast<PhyloGraph&>(out) = node_table(matrix);
    out.threshold = threshold;
    const auto& gens = out.generations;
    for (std::size_t t = 0; t + 1 < gens.size(); ++t) {
        for (const std::size_t dst : gens[t + 1].nodes) {
            std::size_t best = gens[t].nodes.front();
            double best_sim = -1.0;
            for (const std::size_t src : gens[t].nodes) {
                const double s = jaccard_similarity(matrix.row(src), matrix.row(dst));
                if (s > best_sim) {
                    best_sim = s;
                    best = src;
                }
            }
            if (best_sim >= threshold) out.edges.push_back({best, dst, best_sim});
        }
    }
    std::sort(out.edges.begin(), out.edges.end(), [](const Edge& a, const Edge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    return out;
}

void export_graph(const PhyloGraph& graph, const std::filesystem::path& out_dir) {
    ensure_directory(out_dir);
    std::ostringstream nodes;
    nodes << "node_id,product_id,year\n";
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
        nodes << i << ',' << csv_escape(graph.product_ids[i]) << ',' << graph.years[i] << '\n';
    }
    write_file(out_dir / "nodes.csv", nodes.str());

    std::string edges = "src,dst,weight\n";
    edges.reserve(edges.size() + graph.edges.size() * 24);
    for (const auto& e : graph.edges) {
        edges += std::to_string(e.src);
        edges.push_back(',');
        edges += std::to_string(e.dst);
        edges.push_back(',');
        edges += format_fixed(e.weight, 9);
        edges.push_back('\n');
    }
    write_file(out_dir / "edges.csv", edges);
}

} // namespace phylo
