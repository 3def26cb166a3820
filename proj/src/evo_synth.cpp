#include "phylo/evo_synth.hpp"

#include "phylo/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

namespace phylo {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Distribution helpers built on raw engine bits so panels do not depend on
// the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform() < p; }
    std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n))); }

    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        int k = 0;
        double p = uniform();
        while (p > limit) {
            ++k;
            p *= uniform();
        }
        return k;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

    // Index drawn proportionally to non-negative weights.
    std::size_t weighted(const std::vector<double>& w) {
        double total = 0.0;
        for (double x : w) total += x;
        double u = uniform() * total;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (u < w[i]) return i;
            u -= w[i];
        }
        return w.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

struct Resolved {
    std::vector<int> per_year;
    int pool = 0;
    int lineages = 0;
};

Resolved validate(const SynthConfig& c) {
    if (c.years < 4) throw ValidationError("synthetic panels need at least 4 years");
    Resolved r;
    if (c.products_per_year.size() == 1) {
        r.per_year.assign(static_cast<std::size_t>(c.years), c.products_per_year[0]);
    } else if (c.products_per_year.size() == static_cast<std::size_t>(c.years)) {
        r.per_year = c.products_per_year;
    } else {
        throw ValidationError("products_per_year must have 1 or " + std::to_string(c.years) + " entries");
    }
    for (int n : r.per_year) {
        if (n < 1) throw ValidationError("every year needs at least one product");
    }
    if (c.founder_genome < 1) throw ValidationError("founder_genome must be positive");
    r.pool = c.founder_pool == 0 ? 4 * c.founder_genome : c.founder_pool;
    if (r.pool < c.founder_genome) throw ValidationError("founder_pool must be at least founder_genome");
    r.lineages = c.founder_lineages == 0 ? r.per_year[0] : c.founder_lineages;
    if (r.lineages < 1) throw ValidationError("founder_lineages must be positive");
    const auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
    };
    unit(c.vertical_inheritance, "vertical_inheritance");
    unit(c.hgt_rate, "hgt_rate");
    if (!(c.mutation_rate >= 0.0) || !std::isfinite(c.mutation_rate)) {
        throw ValidationError("mutation_rate must be a non-negative mean count");
    }
    if (!(c.planted_fitness >= 0.0)) throw ValidationError("planted_fitness must be non-negative");
    if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw ValidationError("threshold must lie in (0, 1)");
    for (const auto& p : c.planted) {
        if (p.birth < 1 || p.birth > c.years) throw ValidationError("planted birth year index out of range");
        if (p.lead < 0) throw ValidationError("planted lead must be non-negative");
        for (double v : p.schedule) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("infeasible adoption schedule: ratio " + std::to_string(v) + " outside [0, 1]");
            }
        }
    }
    return r;
}

// Carriers of a planted genotype j years after its birth in a year of n products.
std::size_t planted_count(const PlantedDominant& p, double theta, int j, int n, std::size_t k) {
    const double nn = static_cast<double>(n);
    const bool below = j < p.lead;
    std::size_t count = 0;
    if (!p.schedule.empty()) {
        const double r = p.schedule[std::min<std::size_t>(static_cast<std::size_t>(j), p.schedule.size() - 1)];
        count = static_cast<std::size_t>(below ? std::floor(r * nn + 1e-9) : std::ceil(r * nn - 1e-9));
    } else if (below) {
        const double r = theta * (0.2 + 0.6 * j / p.lead);
        count = static_cast<std::size_t>(std::floor(r * nn));
    } else {
        const auto over = static_cast<std::size_t>(std::floor(theta * nn)) + 1;
        const auto margin = static_cast<std::size_t>(std::ceil((theta + 0.1 * (1.0 - theta)) * nn));
        count = std::max(over, margin);
    }
    if (j == 0 && count == 0) count = p.schedule.empty() ? 1 : 0;
    const double ratio = static_cast<double>(count) / nn;
    const std::string who = "planted genotype " + std::to_string(k + 1);
    if (count > static_cast<std::size_t>(n)) {
        throw ValidationError("infeasible adoption schedule for " + who + ": needs more carriers than products");
    }
    if (j == 0 && count == 0) throw ValidationError("infeasible adoption schedule for " + who + ": no carrier at birth");
    if (below && ratio > theta) {
        throw ValidationError("infeasible adoption schedule for " + who + ": crosses the threshold before its lead time");
    }
    if (!below && !(ratio > theta)) {
        throw ValidationError("infeasible adoption schedule for " + who + ": does not exceed the threshold");
    }
    return count;
}

std::string gene_name(const char* prefix, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05zu", prefix, k);
    return buf;
}

} // namespace

SynthConfig benchmark_synth_config() {
    SynthConfig c;
    c.years = 15;
    c.products_per_year = {30};
    c.founder_genome = 40;
    c.mutation_rate = 2.0;
    c.hgt_rate = 0.1;
    c.threshold = 0.5;
    c.planted = {{2, 1, {}}, {3, 2, {}}, {4, 3, {}}, {6, 1, {}}, {7, 2, {}},
                 {8, 3, {}}, {10, 1, {}}, {11, 2, {}}, {13, 2, {}}, {14, 1, {}}};
    return c;
}

SynthPanel generate_panel(const SynthConfig& config) {
    const Resolved res = validate(config);
    const double theta = config.threshold;
    Rng rng(config.seed);

    std::vector<std::string> names;
    std::vector<bool> is_planted;
    const auto new_gene = [&](std::string name, bool planted) {
        names.push_back(std::move(name));
        is_planted.push_back(planted);
        return static_cast<int>(names.size() - 1);
    };
    for (int g = 0; g < res.pool; ++g) new_gene(gene_name("f", static_cast<std::size_t>(g)), false);
    std::vector<int> planted_gene;
    for (std::size_t k = 0; k < config.planted.size(); ++k) planted_gene.push_back(new_gene(gene_name("dom", k + 1), true));
    std::size_t mutations = 0;

    // Carrier schedules are resolved up front so infeasibility fails before generation.
    std::vector<std::vector<std::size_t>> schedule(config.planted.size());
    for (std::size_t k = 0; k < config.planted.size(); ++k) {
        const auto& p = config.planted[k];
        for (int t = p.birth; t <= config.years; ++t) {
            schedule[k].push_back(planted_count(p, theta, t - p.birth, res.per_year[static_cast<std::size_t>(t - 1)], k));
        }
    }

    using Genome = std::vector<int>; // sorted gene ids
    std::vector<std::vector<Genome>> genomes(static_cast<std::size_t>(config.years));

    std::vector<Genome> lineages(static_cast<std::size_t>(res.lineages));
    for (auto& g : lineages) {
        std::vector<int> pool(static_cast<std::size_t>(res.pool));
        for (int i = 0; i < res.pool; ++i) pool[static_cast<std::size_t>(i)] = i;
        rng.shuffle(pool);
        g.assign(pool.begin(), pool.begin() + config.founder_genome);
        std::sort(g.begin(), g.end());
    }
    for (int i = 0; i < res.per_year[0]; ++i) genomes[0].push_back(lineages[static_cast<std::size_t>(i) % lineages.size()]);

    for (int t = 1; t <= config.years; ++t) {
        auto& year = genomes[static_cast<std::size_t>(t - 1)];
        const auto n = static_cast<std::size_t>(res.per_year[static_cast<std::size_t>(t - 1)]);
        std::vector<int> ancestor(n, -1);
        if (t > 1) {
            const auto& prev = genomes[static_cast<std::size_t>(t - 2)];
            std::vector<double> prevalence(names.size(), 0.0);
            std::vector<double> weight(prev.size(), 1.0);
            for (std::size_t a = 0; a < prev.size(); ++a) {
                for (int g : prev[a]) prevalence[static_cast<std::size_t>(g)] += 1.0 / static_cast<double>(prev.size());
                // Early adopters of a rising genotype are favoured as ancestors.
                for (std::size_t k = 0; k < config.planted.size(); ++k) {
                    const int age = t - 1 - config.planted[k].birth;
                    if (age < 0 || age >= std::max(config.planted[k].lead, 1)) continue;
                    if (std::binary_search(prev[a].begin(), prev[a].end(), planted_gene[k])) {
                        weight[a] += config.planted_fitness;
                    }
                }
            }
            year.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t a = rng.weighted(weight);
                ancestor[i] = static_cast<int>(a);
                std::set<int> genes;
                for (int g : prev[a]) {
                    const double keep = config.vertical_inheritance +
                                        (1.0 - config.vertical_inheritance) * prevalence[static_cast<std::size_t>(g)];
                    if (rng.bernoulli(keep)) genes.insert(g);
                }
                if (genes.empty() && !prev[a].empty()) genes.insert(prev[a][rng.index(prev[a].size())]);
                if (prev.size() > 1 && config.hgt_rate > 0.0) {
                    std::size_t donor = rng.index(prev.size() - 1);
                    if (donor >= a) ++donor;
                    for (int g : prev[donor]) {
                        if (rng.bernoulli(config.hgt_rate)) genes.insert(g);
                    }
                }
                const int k = rng.poisson(config.mutation_rate);
                for (int m = 0; m < k; ++m) genes.insert(new_gene(gene_name("m", ++mutations), false));
                year[i].assign(genes.begin(), genes.end());
            }
        }

        // Planted genotypes travel only through their schedules.
        for (auto& g : year) {
            std::erase_if(g, [&](int x) { return is_planted[static_cast<std::size_t>(x)]; });
        }
        for (std::size_t k = 0; k < config.planted.size(); ++k) {
            const auto& p = config.planted[k];
            if (t < p.birth) continue;
            const std::size_t want = schedule[k][static_cast<std::size_t>(t - p.birth)];
            const int gene = planted_gene[k];
            std::vector<std::size_t> inherited, others;
            for (std::size_t i = 0; i < n; ++i) {
                bool carried = false;
                if (ancestor[i] >= 0) {
                    const auto& ag = genomes[static_cast<std::size_t>(t - 2)][static_cast<std::size_t>(ancestor[i])];
                    carried = std::binary_search(ag.begin(), ag.end(), gene);
                }
                (carried ? inherited : others).push_back(i);
            }
            rng.shuffle(inherited);
            rng.shuffle(others);
            inherited.insert(inherited.end(), others.begin(), others.end());
            for (std::size_t c = 0; c < want; ++c) {
                auto& g = year[inherited[c]];
                g.insert(std::upper_bound(g.begin(), g.end(), gene), gene);
            }
        }
        for (auto& g : year) {
            if (g.empty()) g.push_back(new_gene(gene_name("m", ++mutations), false));
        }
    }

    SynthPanel out;
    out.truth.threshold = theta;
    for (std::size_t k = 0; k < planted_gene.size(); ++k) {
        out.truth.planted_names.push_back(names[static_cast<std::size_t>(planted_gene[k])]);
    }

    // Per-year carrier counts straight from the generated genomes.
    std::vector<std::map<int, std::size_t>> counts(names.size());
    for (int t = 1; t <= config.years; ++t) {
        const int year_value = config.first_year + t - 1;
        const auto& year = genomes[static_cast<std::size_t>(t - 1)];
        for (std::size_t i = 0; i < year.size(); ++i) {
            ProductRecord rec;
            char id[32];
            std::snprintf(id, sizeof id, "S%04d-%03zu", year_value, i + 1);
            rec.id = id;
            rec.name = "synthetic " + rec.id;
            rec.year = year_value;
            for (int g : year[i]) {
                rec.attributes.insert(names[static_cast<std::size_t>(g)]);
                ++counts[static_cast<std::size_t>(g)][year_value];
            }
            out.records.push_back(std::move(rec));
        }
    }

    std::vector<std::size_t> order(names.size());
    for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });
    std::map<std::string, int> dominant_birth; // dominant genotype -> birth year
    for (std::size_t g : order) {
        if (counts[g].empty()) continue; // founder-pool genes nobody drew
        TruthGenotype tg;
        tg.genotype = names[g];
        tg.planted = is_planted[g];
        tg.birth_year = counts[g].begin()->first;
        for (int t = 1; t <= config.years; ++t) {
            const int y = config.first_year + t - 1;
            if (y < tg.birth_year) continue;
            const auto it = counts[g].find(y);
            const double c = it == counts[g].end() ? 0.0 : static_cast<double>(it->second);
            const double ratio = c / static_cast<double>(res.per_year[static_cast<std::size_t>(t - 1)]);
            tg.adoption_ratio[y] = ratio;
            if (!tg.dominant && ratio > theta) {
                tg.dominant = true;
                tg.dominance_year = y;
                tg.years_to_dominance = y - tg.birth_year;
            }
        }
        if (tg.dominant) dominant_birth[tg.genotype] = tg.birth_year;
        out.truth.genotypes.push_back(std::move(tg));
    }
    for (const auto& rec : out.records) {
        int label = 0;
        for (const auto& a : rec.attributes) {
            const auto it = dominant_birth.find(a);
            if (it != dominant_birth.end() && it->second == rec.year) label = 1;
        }
        out.truth.labels[rec.id] = label;
    }
    out.records = normalize_products(std::move(out.records));
    return out;
}

ordered_json truth_to_json(const SynthTruth& truth) {
    ordered_json j;
    j["threshold"] = truth.threshold;
    j["planted"] = truth.planted_names;
    ordered_json genotypes = ordered_json::array();
    for (const auto& g : truth.genotypes) {
        ordered_json e;
        e["genotype"] = g.genotype;
        e["planted"] = g.planted;
        e["birth_year"] = g.birth_year;
        ordered_json ratios = ordered_json::object();
        for (const auto& [y, r] : g.adoption_ratio) ratios[std::to_string(y)] = r;
        e["adoption_ratio"] = std::move(ratios);
        e["dominant"] = g.dominant;
        e["dominance_year"] = g.dominance_year ? ordered_json(*g.dominance_year) : ordered_json(nullptr);
        e["years_to_dominance"] = g.years_to_dominance ? ordered_json(*g.years_to_dominance) : ordered_json(nullptr);
        genotypes.push_back(std::move(e));
    }
    j["genotypes"] = std::move(genotypes);
    ordered_json labels = ordered_json::array();
    for (const auto& [id, d] : truth.labels) labels.push_back({{"id", id}, {"dominant", d}});
    j["labels"] = std::move(labels);
    return j;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end()) {
            throw ValidationError("unknown key '" + k + "' in " + where);
        }
    }
}

} // namespace

SynthConfig synth_config_from_json(const json& j) {
    reject_unknown(j,
                   {"years", "first_year", "products_per_year", "founder_genome", "founder_pool", "founder_lineages",
                    "mutation_rate", "vertical_inheritance", "hgt_rate", "planted_fitness", "planted", "threshold",
                    "seed"},
                   "synth config");
    SynthConfig c;
    try {
        c.years = j.value("years", c.years);
        c.first_year = j.value("first_year", c.first_year);
        if (j.contains("products_per_year")) {
            const auto& v = j.at("products_per_year");
            c.products_per_year = v.is_array() ? v.get<std::vector<int>>() : std::vector<int>{v.get<int>()};
        }
        c.founder_genome = j.value("founder_genome", c.founder_genome);
        c.founder_pool = j.value("founder_pool", c.founder_pool);
        c.founder_lineages = j.value("founder_lineages", c.founder_lineages);
        c.mutation_rate = j.value("mutation_rate", c.mutation_rate);
        c.vertical_inheritance = j.value("vertical_inheritance", c.vertical_inheritance);
        c.hgt_rate = j.value("hgt_rate", c.hgt_rate);
        c.planted_fitness = j.value("planted_fitness", c.planted_fitness);
        c.threshold = j.value("threshold", c.threshold);
        c.seed = j.value("seed", c.seed);
        if (j.contains("planted")) {
            c.planted.clear();
            for (const auto& p : j.at("planted")) {
                reject_unknown(p, {"birth", "lead", "schedule"}, "planted entry");
                PlantedDominant d;
                d.birth = p.at("birth").get<int>();
                d.lead = p.value("lead", d.lead);
                if (p.contains("schedule")) d.schedule = p.at("schedule").get<std::vector<double>>();
                c.planted.push_back(std::move(d));
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid synth config: ") + e.what());
    }
    return c;
}

ordered_json synth_config_to_json(const SynthConfig& c) {
    ordered_json j;
    j["years"] = c.years;
    j["first_year"] = c.first_year;
    j["products_per_year"] = c.products_per_year;
    j["founder_genome"] = c.founder_genome;
    j["founder_pool"] = c.founder_pool;
    j["founder_lineages"] = c.founder_lineages;
    j["mutation_rate"] = c.mutation_rate;
    j["vertical_inheritance"] = c.vertical_inheritance;
    j["hgt_rate"] = c.hgt_rate;
    j["planted_fitness"] = c.planted_fitness;
    ordered_json planted = ordered_json::array();
    for (const auto& p : c.planted) {
        ordered_json e{{"birth", p.birth}, {"lead", p.lead}};
        if (!p.schedule.empty()) e["schedule"] = p.schedule;
        planted.push_back(std::move(e));
    }
    j["planted"] = std::move(planted);
    j["threshold"] = c.threshold;
    j["seed"] = c.seed;
    return j;
}

} // namespace phylo
