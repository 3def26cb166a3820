#include "doctest.h"
#include "oracles.hpp"

#include "phylo/error.hpp"
#include "phylo/product_panel.hpp"
#include "phylo/util.hpp"

using namespace phylo;
using oracle::record;

TEST_CASE("csv panel loads sorted records") {
    oracle::TempDir dir("panel");
    const auto path = dir.path / "p.csv";
    write_file(path, "id,name,year,attributes\np2,Two,2002,a|b\np1,One,2001, a \n");
    const auto recs = load_products(path, PanelFormat::Csv);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].id == "p1");
    CHECK(recs[1].id == "p2");
    CHECK(recs[0].attributes == std::set<std::string>{"a"});
    CHECK(recs[1].attributes == std::set<std::string>{"a", "b"});
}

TEST_CASE("jsonl panel loads") {
    oracle::TempDir dir("panel");
    const auto path = dir.path / "p.jsonl";
    write_file(path, "{\"id\":\"x\",\"name\":\"X\",\"year\":2003,\"attributes\":[\"q\",\"r\"]}\n\n"
                     "{\"id\":\"w\",\"year\":2003,\"attributes\":[\"q\"]}\n");
    const auto recs = load_products(path, panel_format_from_path(path));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].id == "w");
}

TEST_CASE("panel validation errors") {
    oracle::TempDir dir("panel");
    SUBCASE("duplicate id") {
        write_file(dir.path / "d.csv", "id,name,year,attributes\np1,,2001,a\np1,,2002,b\n");
        CHECK_THROWS_AS(load_products(dir.path / "d.csv", PanelFormat::Csv), ValidationError);
    }
    SUBCASE("empty attributes") {
        write_file(dir.path / "e.csv", "id,name,year,attributes\np1,,2001, | \n");
        CHECK_THROWS_AS(load_products(dir.path / "e.csv", PanelFormat::Csv), ValidationError);
    }
    SUBCASE("bad year reports the line") {
        write_file(dir.path / "y.csv", "id,name,year,attributes\np1,,2001,a\np2,,20x2,a\n");
        try {
            load_products(dir.path / "y.csv", PanelFormat::Csv);
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("bad header") {
        write_file(dir.path / "h.csv", "id,year,attributes\np1,2001,a\n");
        CHECK_THROWS_AS(load_products(dir.path / "h.csv", PanelFormat::Csv), FormatError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_products(dir.path / "none.csv", PanelFormat::Csv), IoError);
    }
}

TEST_CASE("year range check") {
    const auto recs = normalize_products({record("a", 2001, {"x"}), record("b", 2005, {"x"})});
    CHECK_NOTHROW(check_year_range(recs, 2001, 2005));
    CHECK_THROWS_AS(check_year_range(recs, 2002, 2005), ValidationError);
}

TEST_CASE("vocabulary is lexicographic") {
    const auto recs = normalize_products({record("a", 2001, {"b"}), record("b", 2001, {"a", "b"})});
    const auto v = build_vocabulary(recs);
    REQUIRE(v.size() == 2);
    CHECK(v.index_of("a") == 0);
    CHECK(v.index_of("b") == 1);
    CHECK(v.index_of("zzz") == -1);
    CHECK(build_vocabulary({record("a", 2001, {"only"})}).size() == 1);
}

TEST_CASE("chromosome encoding") {
    const auto recs = normalize_products({record("a", 2001, {"a", "c"}), record("b", 2001, {"a", "b", "c"}),
                                          record("c", 2002, {"b"})});
    const auto vocab = build_vocabulary(recs);
    const auto m = encode_chromosomes(recs, vocab);
    REQUIRE(m.rows() == 3);
    REQUIRE(m.cols() == 3);
    CHECK(m.at(0, 0));
    CHECK_FALSE(m.at(0, 1));
    CHECK(m.at(0, 2));
    for (std::uint32_t c = 0; c < 3; ++c) CHECK(m.at(1, c));
    CHECK(m.distinct_years() == std::vector<int>{2001, 2002});

    SUBCASE("unknown attribute") {
        const auto small = build_vocabulary({record("z", 2001, {"a"})});
        CHECK_THROWS_AS(encode_chromosomes(recs, small), ValidationError);
    }
}

TEST_CASE("encode/decode round trip and column coverage on random panels") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto recs = oracle::random_panel(rng, 40, 4, 25);
        const auto vocab = build_vocabulary(recs);
        const auto m = encode_chromosomes(recs, vocab);
        CHECK(m.rows() == recs.size());
        CHECK(m.cols() == vocab.size());
        std::vector<int> colsum(m.cols(), 0);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            CHECK(m.row(r).size() == recs[r].attributes.size());
            CHECK(decode_chromosome(m, r, vocab) == recs[r].attributes);
            for (auto c : m.row(r)) colsum[c]++;
        }
        for (int s : colsum) CHECK(s >= 1);
        const auto again = encode_chromosomes(recs, build_vocabulary(recs));
        CHECK(again.columns() == m.columns());
        CHECK(again.row_offsets() == m.row_offsets());
    }
}

TEST_CASE("save then load reproduces records") {
    oracle::TempDir dir("panel");
    std::mt19937_64 rng(3);
    auto recs = oracle::random_panel(rng, 30, 3, 10);
    recs[0].name = "needs, \"quoting\"";
    for (auto fmt : {PanelFormat::Csv, PanelFormat::Jsonl}) {
        const auto path = dir.path / (fmt == PanelFormat::Csv ? "r.csv" : "r.jsonl");
        save_products(path, recs, fmt);
        const auto back = load_products(path, fmt);
        REQUIRE(back.size() == recs.size());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            CHECK(back[i].id == recs[i].id);
            CHECK(back[i].name == recs[i].name);
            CHECK(back[i].year == recs[i].year);
            CHECK(back[i].attributes == recs[i].attributes);
        }
    }
}
