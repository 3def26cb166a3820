#include "doctest.h"
#include "oracles.hpp"

#include "phylo/error.hpp"
#include "phylo/phylo_graph.hpp"
#include "phylo/util.hpp"

#include <fstream>
#include <set>

using namespace phylo;
using oracle::record;

namespace {

ChromosomeMatrix encode(const std::vector<ProductRecord>& recs) {
    const auto sorted = normalize_products(recs);
    return encode_chromosomes(sorted, build_vocabulary(sorted));
}

std::vector<ProductRecord> sized_panel(const std::vector<int>& sizes) {
    std::vector<ProductRecord> recs;
    for (std::size_t y = 0; y < sizes.size(); ++y) {
        for (int i = 0; i < sizes[y]; ++i) {
            recs.push_back(record("y" + std::to_string(y) + "_" + std::to_string(i), 2000 + static_cast<int>(y),
                                  {"a" + std::to_string(i), "common"}));
        }
    }
    return recs;
}

std::size_t count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

} // namespace

TEST_CASE("jaccard examples") {
    const std::vector<std::uint32_t> abc{0, 1, 2}, bcd{1, 2, 3}, de{3, 4}, none;
    CHECK(jaccard_similarity(abc, bcd) == doctest::Approx(0.5));
    CHECK(jaccard_similarity(abc, abc) == 1.0);
    CHECK(jaccard_similarity(abc, de) == 0.0);
    CHECK(jaccard_similarity(none, none) == 0.0);
}

TEST_CASE("fcpn edge counts") {
    CHECK(build_fcpn(encode(sized_panel({2, 3}))).edges.size() == 6);
    CHECK(build_fcpn(encode(sized_panel({4}))).edges.empty());
    CHECK(build_fcpn(encode(sized_panel({2, 3, 2}))).edges.size() == 12);
}

TEST_CASE("fcpn keeps zero-weight edges and orders by (src, dst)") {
    const auto m = encode({record("a", 2001, {"x"}), record("b", 2002, {"y"}), record("c", 2002, {"x"})});
    const auto g = build_fcpn(m);
    REQUIRE(g.edges.size() == 2);
    CHECK(g.edges[0] == Edge{0, 1, 0.0});
    CHECK(g.edges[1] == Edge{0, 2, 1.0});
}

TEST_CASE("year gaps make the next present year adjacent") {
    const auto m = encode({record("a", 2001, {"x"}), record("b", 2005, {"x"})});
    const auto g = build_fcpn(m);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].weight == 1.0);
}

TEST_CASE("product tree tie-breaks to the lowest ancestor row") {
    std::set<std::string> d;
    for (char c = 'a'; c <= 'j'; ++c) d.insert(std::string(1, c));
    auto without = [&](char c) {
        auto s = d;
        s.erase(std::string(1, c));
        return s;
    };
    const auto m = encode({record("a1", 2001, {"a", "b"}), record("a2", 2001, without('j')),
                           record("a3", 2001, without('i')), record("d", 2002, d)});
    const auto tree = build_product_tree(m, 0.5);
    REQUIRE(tree.edges.size() == 1);
    CHECK(tree.edges[0].src == 1);
    CHECK(tree.edges[0].dst == 3);
    CHECK(tree.edges[0].weight == doctest::Approx(0.9));

    SUBCASE("below threshold leaves an orphan") {
        CHECK(build_product_tree(m, 0.95).edges.empty());
    }
}

TEST_CASE("tree threshold zero gives every later node one parent") {
    std::mt19937_64 rng(11);
    const auto recs = oracle::random_panel(rng, 40, 5, 20);
    const auto m = encode_chromosomes(recs, build_vocabulary(recs));
    const auto tree = build_product_tree(m, 0.0);
    const auto gens = group_generations(m);
    CHECK(tree.edges.size() == m.rows() - gens.front().nodes.size());
    CHECK_THROWS_AS(build_product_tree(m, 1.5), ValidationError);
}

TEST_CASE("structural properties on random panels") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const auto recs = oracle::random_panel(rng, 50, 2 + trial % 5, 15);
        const auto m = encode_chromosomes(recs, build_vocabulary(recs));
        const auto g = build_fcpn(m);
        const auto gens = group_generations(m);
        std::size_t expected = 0;
        for (std::size_t t = 0; t + 1 < gens.size(); ++t) expected += gens[t].nodes.size() * gens[t + 1].nodes.size();
        CHECK(g.edges.size() == expected);
        std::map<std::size_t, std::size_t> gen_of;
        for (std::size_t t = 0; t < gens.size(); ++t)
            for (auto n : gens[t].nodes) gen_of[n] = t;
        for (const auto& e : g.edges) {
            CHECK(gen_of[e.dst] == gen_of[e.src] + 1);
            CHECK(e.weight == jaccard_similarity(m.row(e.src), m.row(e.dst)));
            CHECK(e.weight == jaccard_similarity(m.row(e.dst), m.row(e.src)));
            CHECK(e.weight >= 0.0);
            CHECK(e.weight <= 1.0);
        }
        const auto tree = build_product_tree(m, 0.3);
        std::map<std::size_t, int> indeg;
        for (const auto& e : tree.edges) {
            CHECK(++indeg[e.dst] <= 1);
            CHECK(std::find(g.edges.begin(), g.edges.end(), e) != g.edges.end());
        }
    }
}

TEST_CASE("export writes headers and is byte-stable") {
    oracle::TempDir dir("graph");
    const auto g = build_fcpn(encode(sized_panel({2, 3})));
    export_graph(g, dir.path / "a");
    export_graph(g, dir.path / "b");
    CHECK(count_lines(dir.path / "a" / "edges.csv") == 7);
    CHECK(count_lines(dir.path / "a" / "nodes.csv") == 6);
    const auto edges = read_file(dir.path / "a" / "edges.csv");
    CHECK(edges.rfind("src,dst,weight\n", 0) == 0);
    CHECK(edges.find("0,2,1.000000000\n0,3,0.333333333\n") != std::string::npos);
    CHECK(read_file(dir.path / "a" / "nodes.csv").rfind("node_id,product_id,year\n", 0) == 0);
    CHECK(edges == read_file(dir.path / "b" / "edges.csv"));

    const auto tree = build_product_tree(encode(sized_panel({1, 2})), 0.0);
    export_graph(tree, dir.path / "t");
    CHECK(count_lines(dir.path / "t" / "edges.csv") == 3);
}
