#include "doctest.h"
#include "oracles.hpp"

#include "phylo/cli.hpp"
#include "phylo/util.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace phylo;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(PHYLO_FORECAST_EXE) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small synthetic panel shared by the tests in this file.
struct Fixture {
    oracle::TempDir dir{"cli"};
    fs::path panel;
    fs::path config;
    Fixture() {
        write(dir.path / "synth.json",
              R"({"synth": {"years": 6, "products_per_year": [8], "founder_genome": 6,
                  "planted": [{"birth": 2, "lead": 1}], "seed": 4}})");
        REQUIRE(run("synth --config " + q(dir.path / "synth.json") + " --out " + q(dir.path / "synth")) == 0);
        panel = dir.path / "synth" / "products.csv";
        config = dir.path / "train.json";
        write(config, R"({"split": [4, 1, 1], "hidden": 4, "pooled": 3, "max_epochs": 10, "pca_fraction": 0.9})");
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

} // namespace

TEST_CASE("synth writes a panel and its truth") {
    auto& f = fixture();
    CHECK(fs::exists(f.panel));
    CHECK(fs::exists(f.dir.path / "synth" / "truth.json"));
    CHECK(fs::exists(f.dir.path / "synth" / "manifest.json"));
}

TEST_CASE("label writes genotypes, labels and stats") {
    auto& f = fixture();
    const auto out = f.dir.path / "label";
    REQUIRE(run("label --input " + q(f.panel) + " --threshold 0.5 --out " + q(out)) == 0);
    CHECK(slurp(out / "genotypes.csv").rfind("genotype_index,attribute,birth_year,dominant,dominance_year,years_to_dominance\n", 0) == 0);
    CHECK(slurp(out / "labels.csv").rfind("node_id,product_id,year,label\n", 0) == 0);
    const auto stats = nlohmann::json::parse(slurp(out / "stats.json"));
    CHECK(stats.is_object());
}

TEST_CASE("other data subcommands succeed") {
    auto& f = fixture();
    CHECK(run("ingest --input " + q(f.panel) + " --out " + q(f.dir.path / "ingest")) == 0);
    CHECK(fs::exists(f.dir.path / "ingest" / "vocabulary.csv"));
    CHECK(run("graph --input " + q(f.panel) + " --out " + q(f.dir.path / "graph")) == 0);
    CHECK(fs::exists(f.dir.path / "graph" / "fcpn" / "edges.csv"));
    CHECK(fs::exists(f.dir.path / "graph" / "tree" / "nodes.csv"));
    CHECK(run("stats --input " + q(f.panel) + " --thresholds 0.4,0.5 --out " + q(f.dir.path / "stats")) == 0);
    CHECK(run("split --input " + q(f.panel) + " --years 4,1,1 --out " + q(f.dir.path / "split")) == 0);
    CHECK(slurp(f.dir.path / "split" / "masks.csv").rfind("node_id,split\n", 0) == 0);
}

TEST_CASE("split with more years than the panel fails") {
    auto& f = fixture();
    CHECK(run("split --input " + q(f.panel) + " --years 10,10,2 --out " + q(f.dir.path / "bad_split")) == 1);
}

TEST_CASE("train with a config file and a seed range") {
    auto& f = fixture();
    const auto out = f.dir.path / "train";
    REQUIRE(run("train --config " + q(f.config) + " --input " + q(f.panel) + " --seeds 1..5 --out " + q(out)) == 0);
    const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
    CHECK(metrics["runs"].size() == 5);
    CHECK(metrics["averages"]["runs"] == 5);
    CHECK(fs::exists(out / "checkpoints" / "seed_3.json"));
    CHECK(fs::exists(out / "predictions.csv"));

    const auto pred = f.dir.path / "predict";
    REQUIRE(run("predict --config " + q(f.config) + " --input " + q(f.panel) + " --checkpoint " +
                q(out / "checkpoints" / "seed_1.json") + " --out " + q(pred)) == 0);
    CHECK(slurp(pred / "predictions.csv") == slurp(out / "predictions.csv"));

    const auto eval = f.dir.path / "evaluate";
    REQUIRE(run("evaluate --predictions " + q(out / "predictions.csv") + " --out " + q(eval)) == 0);
    const auto em = nlohmann::json::parse(slurp(eval / "metrics.json"));
    CHECK(em["runs"][0]["TP"] == metrics["runs"][0]["TP"]);
    CHECK(em["runs"][0]["accuracy"] == metrics["runs"][0]["accuracy"]);
}

TEST_CASE("baseline runs on the panel") {
    auto& f = fixture();
    const auto out = f.dir.path / "baseline";
    REQUIRE(run("baseline --input " + q(f.panel) + " --years 4,1,1 --out " + q(out)) == 0);
    CHECK(fs::exists(out / "metrics.json"));
    CHECK(fs::exists(out / "predictions.csv"));
}

TEST_CASE("bad arguments and missing inputs map to exit codes") {
    auto& f = fixture();
    write(f.dir.path / "unknown.json", R"({"bogus_key": 1})");
    CHECK(run("label --config " + q(f.dir.path / "unknown.json") + " --input " + q(f.panel) + " --out " +
              q(f.dir.path / "u")) == 1);
    CHECK(run("label --input " + q(f.panel) + " --bogus-flag 1 --out " + q(f.dir.path / "u")) == 1);
    CHECK(run("label --input " + q(f.dir.path / "missing.csv") + " --out " + q(f.dir.path / "u")) == 2);
    CHECK(run("nonsense") == 1);
    CHECK(run("--version") == 0);
}

TEST_CASE("identical runs are byte-identical and leave inputs untouched") {
    auto& f = fixture();
    const auto before = sha256_hex(slurp(f.panel));
    const auto a = f.dir.path / "det_a";
    const auto b = f.dir.path / "det_b";
    const std::string args = "train --config " + q(f.config) + " --input " + q(f.panel) + " --seeds 2,3 --out ";
    REQUIRE(run(args + q(a)) == 0);
    REQUIRE(run(args + q(b)) == 0);
    for (const char* file : {"metrics.json", "predictions.csv", "manifest.json", "checkpoints/seed_2.json"}) {
        CHECK_MESSAGE(slurp(a / file) == slurp(b / file), file);
    }
    CHECK(sha256_hex(slurp(f.panel)) == before);
    const auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["command"] == "train");
    CHECK(manifest["inputs"][0]["sha256"] == before);
}

TEST_CASE("in-process entry point") {
    CHECK(run_command(std::vector<std::string>{"phylo_forecast", "--version"}) == 0);
    CHECK(run_command(std::vector<std::string>{"phylo_forecast", "label"}) == 1);
}
