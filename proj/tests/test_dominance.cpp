#include "doctest.h"
#include "oracles.hpp"

#include "phylo/dominance.hpp"
#include "phylo/error.hpp"

using namespace phylo;
using oracle::record;

namespace {

struct Panel {
    std::vector<ProductRecord> records;
    GenotypeVocabulary vocab;
    ChromosomeMatrix matrix;
};

Panel make(std::vector<ProductRecord> recs) {
    Panel p;
    p.records = normalize_products(std::move(recs));
    p.vocab = build_vocabulary(p.records);
    p.matrix = encode_chromosomes(p.records, p.vocab);
    return p;
}

// Year T: 1 of 3 carry g; T+1: 1 of 3; T+2: 3 of 5.
Panel figure_panel() {
    return make({record("p1", 2010, {"g", "x"}), record("p2", 2010, {"x"}), record("p3", 2010, {"y"}),
                 record("p4", 2011, {"g"}), record("p5", 2011, {"x"}), record("p6", 2011, {"y"}),
                 record("p7", 2012, {"g"}), record("p8", 2012, {"g", "x"}), record("p9", 2012, {"g"}),
                 record("q1", 2012, {"y"}), record("q2", 2012, {"x"})});
}

} // namespace

TEST_CASE("birth years") {
    const auto p = make({record("a", 2001, {"old"}), record("b", 2005, {"new", "old"})});
    const auto birth = genotype_birth_years(p.matrix);
    CHECK(birth[static_cast<std::size_t>(p.vocab.index_of("old"))] == 2001);
    CHECK(birth[static_cast<std::size_t>(p.vocab.index_of("new"))] == 2005);
}

TEST_CASE("three-year adoption example") {
    const auto p = figure_panel();
    const auto dossiers = detect_dominant_genotypes(p.matrix, 0.5);
    const auto& g = dossiers[static_cast<std::size_t>(p.vocab.index_of("g"))];
    CHECK(g.birth_year == 2010);
    CHECK(g.dominant);
    CHECK(g.dominance_year == 2012);
    CHECK(g.years_to_dominance == 2);
    CHECK(g.adoption_ratio.at(2010) == doctest::Approx(1.0 / 3.0));
    CHECK(g.adoption_ratio.at(2012) == doctest::Approx(0.6));

    const auto labels = label_dominant_products(p.matrix, dossiers);
    CHECK(labels.d[0] == 1); // p1 introduces g
    CHECK(labels.d[3] == 0); // p4 carries g a year later
}

TEST_CASE("sole product of a year dominates immediately") {
    const auto p = make({record("a", 2001, {"x"}), record("b", 2002, {"x", "n"})});
    const auto dossiers = detect_dominant_genotypes(p.matrix, 0.5);
    const auto& n = dossiers[static_cast<std::size_t>(p.vocab.index_of("n"))];
    CHECK(n.dominant);
    CHECK(n.years_to_dominance == 0);
}

TEST_CASE("never-crossing genotype and the strict inequality") {
    const auto p = make({record("a", 2001, {"g", "x"}), record("b", 2001, {"x"})});
    const auto d = detect_dominant_genotypes(p.matrix, 0.5);
    const auto& g = d[static_cast<std::size_t>(p.vocab.index_of("g"))];
    CHECK_FALSE(g.dominant);
    CHECK_FALSE(g.dominance_year.has_value());
    CHECK_FALSE(g.years_to_dominance.has_value());
    CHECK_THROWS_AS(detect_dominant_genotypes(p.matrix, 0.0), ValidationError);
    CHECK_THROWS_AS(detect_dominant_genotypes(p.matrix, 1.0), ValidationError);
}

TEST_CASE("carrier distribution toy panel") {
    // g1 introduced by 2 of 3 products, g2 by all 4 products of the next year.
    const auto p = make({record("a", 2001, {"g1"}), record("b", 2001, {"g1"}), record("c", 2001, {"z"}),
                         record("d", 2002, {"g2"}), record("e", 2002, {"g2"}), record("f", 2002, {"g2"}),
                         record("h", 2002, {"g2"})});
    const auto d = detect_dominant_genotypes(p.matrix, 0.5);
    const auto labels = label_dominant_products(p.matrix, d);
    const auto s = dominance_statistics(d, labels, p.matrix, 0.5);
    CHECK(s.dominant_genotype_count == 2);
    CHECK(s.carriers_per_dominant_genotype.mean == doctest::Approx(3.0));
    CHECK(s.carriers_per_dominant_genotype.max == doctest::Approx(4.0));
    CHECK(s.dominant_product_count == 6);
    REQUIRE(s.per_year.size() == 2);
    CHECK(s.per_year[0].dominant_products == 2);
    CHECK(s.per_year[0].dominant_genotypes == 1);
    CHECK(s.per_year[1].dominant_ratio == doctest::Approx(1.0));
}

TEST_CASE("summary statistics conventions") {
    const auto s = summarize({4.0, 1.0, 3.0, 2.0});
    CHECK(s.count == 4);
    CHECK(s.mean == doctest::Approx(2.5));
    CHECK(s.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(s.q25 == doctest::Approx(1.75));
    CHECK(s.q50 == doctest::Approx(2.5));
    CHECK(s.q75 == doctest::Approx(3.25));
    CHECK(s.min == 1.0);
    CHECK(s.max == 4.0);
    CHECK(summarize({}).count == 0);
}

TEST_CASE("brute-force enumeration agrees on random panels") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const auto p = make(oracle::random_panel(rng, 50, 3 + trial % 4, 12));
        for (double theta : {0.3, 0.5, 0.7}) {
            const auto dossiers = detect_dominant_genotypes(p.matrix, theta);
            const auto brute = oracle::brute_dossiers(p.records, theta);
            REQUIRE(dossiers.size() == brute.size());
            for (const auto& d : dossiers) {
                const auto& b = brute.at(p.vocab.attribute(d.genotype));
                CHECK(d.birth_year == b.birth_year);
                CHECK(d.adoption_ratio == b.ratio);
                CHECK(d.dominance_year == b.dominance_year);
                CHECK(d.dominant == b.dominance_year.has_value());
                if (d.dominance_year) CHECK(*d.years_to_dominance == *d.dominance_year - d.birth_year);
            }
            const auto labels = label_dominant_products(p.matrix, dossiers);
            const auto blabels = oracle::brute_labels(p.records, theta);
            for (std::size_t r = 0; r < p.matrix.rows(); ++r) CHECK(labels.d[r] == blabels.at(p.matrix.product_id(r)));
        }
    }
}

TEST_CASE("labeling properties") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = make(oracle::random_panel(rng, 50, 4, 10));
        const auto low = detect_dominant_genotypes(p.matrix, 0.3);
        const auto high = detect_dominant_genotypes(p.matrix, 0.6);
        for (std::size_t g = 0; g < low.size(); ++g) {
            if (high[g].dominant) CHECK(low[g].dominant);
        }
        const auto labels = label_dominant_products(p.matrix, low);
        std::size_t per_product_dominant = 0;
        for (std::size_t r = 0; r < p.matrix.rows(); ++r) {
            if (labels.d[r]) {
                CHECK_FALSE(labels.introduced[r].empty());
                ++per_product_dominant;
            }
        }
        for (const auto& d : low) {
            if (d.dominant) CHECK(labels.birth_carriers.at(d.genotype) >= 1);
        }
        const auto s = dominance_statistics(low, labels, p.matrix, 0.3);
        std::size_t sum = 0;
        for (const auto& row : s.per_year) sum += row.dominant_products;
        CHECK(sum == s.dominant_product_count);
        CHECK(sum == per_product_dominant);
    }
}
