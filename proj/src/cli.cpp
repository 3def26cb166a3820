#include "phylo/cli.hpp"

#include "phylo/checkpoint.hpp"
#include "phylo/dominance.hpp"
#include "phylo/error.hpp"
#include "phylo/logreg.hpp"
#include "phylo/phylo_graph.hpp"
#include "phylo/util.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

namespace phylo {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kConfigKeys = {
    "input",         "format",       "threshold",    "thresholds",  "tree_threshold",
    "split",         "pca_fraction", "pca_fit",      "hidden",      "pooled",
    "cheb_order",    "generations",  "activation",   "weights",     "learning_rate",
    "beta1",         "beta2",        "adam_epsilon", "max_epochs",  "patience",
    "train_mode",    "class_weighting", "seeds",     "l2",          "baseline_class_weighting",
    "checkpoint",    "predictions",  "mask",         "output_format", "synth",
    "benchmark"};

std::vector<double> parse_double_list(const json& v) {
    if (v.is_array()) return v.get<std::vector<double>>();
    if (v.is_number()) return {v.get<double>()};
    std::vector<double> out;
    for (const auto& part : split(v.get<std::string>(), ',')) {
        try {
            std::size_t used = 0;
            const std::string t = trim(part);
            out.push_back(std::stod(t, &used));
            if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw ValidationError("invalid number list '" + v.get<std::string>() + "'");
        }
    }
    return out;
}

SplitYears split_from_json(const json& v) {
    if (v.is_string()) return parse_split_years(v.get<std::string>());
    const auto a = v.get<std::vector<int>>();
    if (a.size() != 3) throw ValidationError("split must list three year counts");
    return {a[0], a[1], a[2]};
}

std::string seeds_from_json(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_unsigned() || v.is_number_integer()) return std::to_string(v.get<std::uint64_t>());
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : ",") + std::to_string(s.get<std::uint64_t>());
    return out;
}

ObjectiveWeights weights_from_json(const json& v) {
    if (!v.is_object()) throw ValidationError("weights must be an object");
    ObjectiveWeights w;
    for (const auto& [k, x] : v.items()) {
        const double d = x.get<double>();
        if (k == "tpr") w.tpr = d;
        else if (k == "tnr") w.tnr = d;
        else if (k == "ppv") w.ppv = d;
        else if (k == "npv") w.npv = d;
        else if (k == "fper") w.fper = d;
        else if (k == "dr") w.dr = d;
        else throw ValidationError("unknown key '" + k + "' in weights");
    }
    return w;
}

CountMode count_mode_from_string(const std::string& s) {
    if (s == "soft") return CountMode::Soft;
    if (s == "hard") return CountMode::Hard;
    throw ValidationError("train_mode must be 'soft' or 'hard'");
}

PcaFit pca_fit_from_string(const std::string& s) {
    if (s == "all") return PcaFit::AllNodes;
    if (s == "train") return PcaFit::TrainOnly;
    throw ValidationError("pca_fit must be 'all' or 'train'");
}

void check_choice(const std::string& value, std::initializer_list<const char*> allowed, const char* key) {
    for (const char* a : allowed) {
        if (value == a) return;
    }
    throw ValidationError(std::string("invalid value '") + value + "' for " + key);
}

} // namespace

RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("run config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (!kConfigKeys.count(k)) throw ValidationError("unknown config key '" + k + "'");
    }
    RunConfig c;
    auto& t = c.train;
    try {
        c.input = j.value("input", c.input);
        c.format = j.value("format", c.format);
        check_choice(c.format, {"auto", "csv", "jsonl"}, "format");
        t.dominance_threshold = j.value("threshold", t.dominance_threshold);
        if (j.contains("thresholds")) c.thresholds = parse_double_list(j.at("thresholds"));
        c.tree_threshold = j.value("tree_threshold", c.tree_threshold);
        if (j.contains("split")) t.split = split_from_json(j.at("split"));
        t.pca_fraction = j.value("pca_fraction", t.pca_fraction);
        if (j.contains("pca_fit")) t.pca_fit = pca_fit_from_string(j.at("pca_fit").get<std::string>());
        t.hidden = j.value("hidden", t.hidden);
        t.pooled = j.value("pooled", t.pooled);
        t.cheb_order = j.value("cheb_order", t.cheb_order);
        t.generations = j.value("generations", t.generations);
        if (j.contains("activation")) t.activation = activation_from_string(j.at("activation").get<std::string>());
        if (j.contains("weights")) t.weights = weights_from_json(j.at("weights"));
        t.learning_rate = j.value("learning_rate", t.learning_rate);
        t.beta1 = j.value("beta1", t.beta1);
        t.beta2 = j.value("beta2", t.beta2);
        t.adam_epsilon = j.value("adam_epsilon", t.adam_epsilon);
        t.max_epochs = j.value("max_epochs", t.max_epochs);
        t.patience = j.value("patience", t.patience);
        if (j.contains("train_mode")) t.train_mode = count_mode_from_string(j.at("train_mode").get<std::string>());
        t.class_weighting = j.value("class_weighting", t.class_weighting);
        if (j.contains("seeds")) c.seeds = seeds_from_json(j.at("seeds"));
        c.l2 = j.value("l2", c.l2);
        c.baseline_class_weighting = j.value("baseline_class_weighting", c.baseline_class_weighting);
        c.checkpoint = j.value("checkpoint", c.checkpoint);
        c.predictions = j.value("predictions", c.predictions);
        c.mask = j.value("mask", c.mask);
        check_choice(c.mask, {"train", "val", "test", "all"}, "mask");
        c.output_format = j.value("output_format", c.output_format);
        check_choice(c.output_format, {"csv", "jsonl"}, "output_format");
        c.benchmark = j.value("benchmark", c.benchmark);
        if (c.benchmark) c.synth = benchmark_synth_config();
        if (j.contains("synth")) {
            json merged = synth_config_to_json(c.synth);
            for (const auto& [k, v] : j.at("synth").items()) merged[k] = v;
            if (!j.at("synth").is_object()) throw ValidationError("synth must be an object");
            c.synth = synth_config_from_json(merged);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid run config: ") + e.what());
    }
    if (!(t.dominance_threshold > 0.0 && t.dominance_threshold < 1.0)) {
        throw ValidationError("threshold must lie in (0, 1)");
    }
    if (!(t.pca_fraction > 0.0 && t.pca_fraction <= 1.0)) throw ValidationError("pca_fraction must lie in (0, 1]");
    if (!(t.learning_rate > 0.0) || t.max_epochs < 1 || t.patience < 1) {
        throw ValidationError("learning_rate, max_epochs and patience must be positive");
    }
    if (t.hidden < 1 || t.pooled < 1 || t.cheb_order < 0 || t.generations < 1) {
        throw ValidationError("model sizes must be positive");
    }
    parse_seed_list(c.seeds);
    return c;
}

ordered_json run_config_to_json(const RunConfig& c) {
    const auto& t = c.train;
    ordered_json j;
    j["input"] = c.input;
    j["format"] = c.format;
    j["threshold"] = t.dominance_threshold;
    j["thresholds"] = c.thresholds;
    j["tree_threshold"] = c.tree_threshold;
    j["split"] = {t.split.train, t.split.val, t.split.test};
    j["pca_fraction"] = t.pca_fraction;
    j["pca_fit"] = t.pca_fit == PcaFit::AllNodes ? "all" : "train";
    j["hidden"] = t.hidden;
    j["pooled"] = t.pooled;
    j["cheb_order"] = t.cheb_order;
    j["generations"] = t.generations;
    j["activation"] = to_string(t.activation);
    j["weights"] = {{"tpr", t.weights.tpr}, {"tnr", t.weights.tnr}, {"ppv", t.weights.ppv},
                    {"npv", t.weights.npv}, {"fper", t.weights.fper}, {"dr", t.weights.dr}};
    j["learning_rate"] = t.learning_rate;
    j["beta1"] = t.beta1;
    j["beta2"] = t.beta2;
    j["adam_epsilon"] = t.adam_epsilon;
    j["max_epochs"] = t.max_epochs;
    j["patience"] = t.patience;
    j["train_mode"] = t.train_mode == CountMode::Soft ? "soft" : "hard";
    j["class_weighting"] = t.class_weighting;
    j["seeds"] = c.seeds;
    j["l2"] = c.l2;
    j["baseline_class_weighting"] = c.baseline_class_weighting;
    j["checkpoint"] = c.checkpoint;
    j["predictions"] = c.predictions;
    j["mask"] = c.mask;
    j["output_format"] = c.output_format;
    j["benchmark"] = c.benchmark;
    j["synth"] = synth_config_to_json(c.synth);
    return j;
}

namespace {

// Keys whose flag text is always taken verbatim as a string.
const std::set<std::string> kStringKeys = {"input", "format", "pca_fit", "activation", "train_mode", "seeds",
                                           "split", "thresholds", "checkpoint", "predictions", "mask",
                                           "output_format"};

struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
};

const std::vector<FlagSpec> kFlags = {
    {"--input", "input", "product panel (CSV or JSONL)"},
    {"--format", "format", "panel format: auto, csv or jsonl"},
    {"--threshold", "threshold", "dominance threshold"},
    {"--thresholds", "thresholds", "comma-separated thresholds for stats"},
    {"--tree-threshold", "tree_threshold", "minimum similarity for product tree links"},
    {"--years", "split", "train,val,test year counts"},
    {"--pca-fraction", "pca_fraction", "retained variance fraction"},
    {"--pca-fit", "pca_fit", "fit PCA on all nodes or train nodes"},
    {"--hidden", "hidden", "LSTM hidden size"},
    {"--pooled", "pooled", "pooled feature size"},
    {"--cheb-order", "cheb_order", "Chebyshev order"},
    {"--generations", "generations", "dynamic graph sequence length"},
    {"--activation", "activation", "Chebyshev activation: identity, tanh or relu"},
    {"--lr", "learning_rate", "learning rate"},
    {"--epochs", "max_epochs", "maximum epochs"},
    {"--patience", "patience", "early stopping patience"},
    {"--train-mode", "train_mode", "score counts during training: soft or hard"},
    {"--seeds", "seeds", "seed list: 1..5, 1,2,7 or 3"},
    {"--seed", "seeds", "single seed"},
    {"--l2", "l2", "logistic L2 coefficient"},
    {"--checkpoint", "checkpoint", "model checkpoint"},
    {"--predictions", "predictions", "predictions CSV"},
    {"--mask", "mask", "nodes to predict: train, val, test or all"},
    {"--output-format", "output_format", "synthetic panel format: csv or jsonl"},
};

struct Command {
    std::string name;
    std::vector<std::string> flags;
    std::vector<std::string> switches;
};

const std::vector<Command> kCommands = {
    {"ingest", {"--input", "--format", "--output-format"}, {}},
    {"graph", {"--input", "--format", "--tree-threshold"}, {}},
    {"label", {"--input", "--format", "--threshold"}, {}},
    {"stats", {"--input", "--format", "--thresholds", "--pca-fraction"}, {}},
    {"split", {"--input", "--format", "--threshold", "--years"}, {}},
    {"train",
     {"--input", "--format", "--threshold", "--years", "--pca-fraction", "--pca-fit", "--hidden", "--pooled",
      "--cheb-order", "--generations", "--activation", "--lr", "--epochs", "--patience", "--train-mode", "--seeds",
      "--seed"},
     {"--no-class-weighting"}},
    {"predict", {"--input", "--format", "--years", "--checkpoint", "--mask"}, {}},
    {"evaluate", {"--predictions", "--threshold", "--years"}, {}},
    {"baseline", {"--input", "--format", "--threshold", "--years", "--l2"}, {"--no-class-weighting"}},
    {"synth", {"--seed", "--output-format"}, {"--benchmark"}},
};

struct Context {
    std::string command;
    RunConfig config;
    fs::path out;
    std::vector<std::pair<std::string, std::string>> inputs; // path, digest
};

PanelFormat format_for(const RunConfig& c, const std::string& path) {
    if (c.format == "csv") return PanelFormat::Csv;
    if (c.format == "jsonl") return PanelFormat::Jsonl;
    return panel_format_from_path(path);
}

void require(const std::string& value, const char* what) {
    if (value.empty()) throw ValidationError(std::string("missing required ") + what);
}

std::vector<ProductRecord> load_panel(const Context& ctx) {
    require(ctx.config.input, "--input");
    return load_products(ctx.config.input, format_for(ctx.config, ctx.config.input));
}

void write_manifest(Context& ctx) {
    const auto add = [&](const std::string& p) {
        if (!p.empty()) ctx.inputs.emplace_back(p, sha256_file(p));
    };
    const auto& c = ctx.config;
    if (ctx.command == "evaluate") {
        require(c.predictions, "--predictions");
        add(c.predictions);
    } else if (ctx.command != "synth") {
        require(c.input, "--input");
        add(c.input);
    }
    if (ctx.command == "predict") {
        require(c.checkpoint, "--checkpoint");
        add(c.checkpoint);
    }
    ordered_json m;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    m["command"] = ctx.command;
    m["config"] = run_config_to_json(c);
    ordered_json inputs = ordered_json::array();
    for (const auto& [p, d] : ctx.inputs) inputs.push_back({{"path", p}, {"sha256", d}});
    m["inputs"] = std::move(inputs);
    ensure_directory(ctx.out);
    write_file(ctx.out / "manifest.json", m.dump(2) + "\n");
}

void write_json(const fs::path& path, const ordered_json& j) { write_file(path, j.dump(2) + "\n"); }

ordered_json summary_json(const SummaryStats& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"25%", s.q25},
            {"50%", s.q50},     {"75%", s.q75},   {"max", s.max}};
}

ordered_json statistics_json(const DominanceStatistics& s) {
    ordered_json j;
    j["threshold"] = s.threshold;
    j["genotype_count"] = s.genotype_count;
    j["dominant_genotype_count"] = s.dominant_genotype_count;
    j["dominant_product_count"] = s.dominant_product_count;
    j["years_to_dominance"] = summary_json(s.years_to_dominance);
    ordered_json rows = ordered_json::array();
    for (const auto& r : s.per_year) {
        rows.push_back({{"year", r.year},
                        {"dominant_product_count", r.dominant_products},
                        {"total_product_count", r.total_products},
                        {"dominant_product_ratio", r.dominant_ratio},
                        {"dominant_genotype_count", r.dominant_genotypes}});
    }
    j["per_year"] = std::move(rows);
    j["carriers_per_dominant_genotype"] = summary_json(s.carriers_per_dominant_genotype);
    j["genotypes_per_dominant_product"] = summary_json(s.genotypes_per_dominant_product);
    return j;
}

std::string years_span(const ChromosomeMatrix& m) {
    const auto y = m.distinct_years();
    if (y.empty()) return "none";
    return std::to_string(y.front()) + "-" + std::to_string(y.back());
}

std::string cmd_ingest(Context& ctx) {
    const auto records = load_panel(ctx);
    const auto vocab = build_vocabulary(records);
    const auto matrix = encode_chromosomes(records, vocab);
    const bool jsonl = ctx.config.output_format == "jsonl";
    const auto panel_path = ctx.out / (jsonl ? "products.jsonl" : "products.csv");
    save_products(panel_path, records, jsonl ? PanelFormat::Jsonl : PanelFormat::Csv);
    std::ostringstream v;
    v << "genotype_index,attribute\n";
    for (std::size_t i = 0; i < vocab.size(); ++i) v << i << ',' << csv_escape(vocab.attribute(i)) << '\n';
    write_file(ctx.out / "vocabulary.csv", v.str());
    ordered_json s;
    s["products"] = matrix.rows();
    s["genotypes"] = matrix.cols();
    s["nonzeros"] = matrix.nonzeros();
    s["years"] = matrix.distinct_years();
    s["vocabulary_digest"] = vocab.digest();
    write_json(ctx.out / "panel.json", s);
    return "ingest: " + std::to_string(matrix.rows()) + " products, " + std::to_string(matrix.cols()) +
           " genotypes, years " + years_span(matrix);
}

std::string cmd_graph(Context& ctx) {
    const auto records = load_panel(ctx);
    const auto matrix = encode_chromosomes(records, build_vocabulary(records));
    const auto fcpn = build_fcpn(matrix);
    const auto tree = build_product_tree(matrix, ctx.config.tree_threshold);
    export_graph(fcpn, ctx.out / "fcpn");
    export_graph(tree, ctx.out / "tree");
    return "graph: " + std::to_string(fcpn.node_count()) + " nodes, " + std::to_string(fcpn.edges.size()) +
           " FCPN edges, " + std::to_string(tree.edges.size()) + " tree edges";
}

std::string cmd_label(Context& ctx) {
    const auto records = load_panel(ctx);
    const auto vocab = build_vocabulary(records);
    const auto matrix = encode_chromosomes(records, vocab);
    const double theta = ctx.config.train.dominance_threshold;
    const auto dossiers = detect_dominant_genotypes(matrix, theta);
    const auto labels = label_dominant_products(matrix, dossiers);

    std::ostringstream g;
    g << "genotype_index,attribute,birth_year,dominant,dominance_year,years_to_dominance\n";
    for (const auto& d : dossiers) {
        g << d.genotype << ',' << csv_escape(vocab.attribute(d.genotype)) << ',' << d.birth_year << ','
          << (d.dominant ? 1 : 0) << ',' << (d.dominance_year ? std::to_string(*d.dominance_year) : "") << ','
          << (d.years_to_dominance ? std::to_string(*d.years_to_dominance) : "") << '\n';
    }
    write_file(ctx.out / "genotypes.csv", g.str());
    std::ostringstream l;
    l << "node_id,product_id,year,label\n";
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        l << r << ',' << csv_escape(matrix.product_id(r)) << ',' << matrix.year(r) << ',' << labels.d[r] << '\n';
    }
    write_file(ctx.out / "labels.csv", l.str());
    const auto stats = dominance_statistics(dossiers, labels, matrix, theta);
    write_json(ctx.out / "stats.json", statistics_json(stats));
    return "label: " + std::to_string(stats.dominant_genotype_count) + " dominant genotypes, " +
           std::to_string(stats.dominant_product_count) + " dominant products of " + std::to_string(matrix.rows()) +
           " at threshold " + format_fixed(theta, 3);
}

std::string cmd_stats(Context& ctx) {
    const auto records = load_panel(ctx);
    const auto matrix = encode_chromosomes(records, build_vocabulary(records));
    ordered_json j;
    j["products"] = matrix.rows();
    j["genotypes"] = matrix.cols();
    ordered_json per = ordered_json::array();
    std::string brief;
    for (double theta : ctx.config.thresholds) {
        const auto dossiers = detect_dominant_genotypes(matrix, theta);
        const auto labels = label_dominant_products(matrix, dossiers);
        const auto s = dominance_statistics(dossiers, labels, matrix, theta);
        brief += (brief.empty() ? "" : ", ") + format_fixed(theta, 2) + ": " +
                 std::to_string(s.dominant_genotype_count) + "/" + std::to_string(s.dominant_product_count);
        per.push_back(statistics_json(s));
    }
    j["thresholds"] = std::move(per);
    const auto pca = fit_pca(matrix, ctx.config.train.pca_fraction);
    j["pca"] = {{"retained_fraction", ctx.config.train.pca_fraction},
                {"components", pca.output_dim()},
                {"explained_variance_ratio_sum", pca.explained_variance_ratio.sum()}};
    write_json(ctx.out / "stats.json", j);
    return "stats: " + std::to_string(matrix.rows()) + " products, " + std::to_string(matrix.cols()) +
           " genotypes, dominant genotypes/products " + brief + ", PCA k=" + std::to_string(pca.output_dim());
}

std::string cmd_split(Context& ctx) {
    const auto records = load_panel(ctx);
    const auto matrix = encode_chromosomes(records, build_vocabulary(records));
    const auto masks = make_split_masks(matrix, ctx.config.train.split);
    const auto dossiers = detect_dominant_genotypes(matrix, ctx.config.train.dominance_threshold);
    const auto labels = label_dominant_products(matrix, dossiers);
    std::ostringstream m;
    m << "node_id,split\n";
    for (std::size_t r = 0; r < matrix.rows(); ++r) m << r << ',' << split_name(masks.split_of(r)) << '\n';
    write_file(ctx.out / "masks.csv", m.str());

    ordered_json j;
    j["threshold"] = ctx.config.train.dominance_threshold;
    const auto& sy = ctx.config.train.split;
    j["years"] = {sy.train, sy.val, sy.test};
    std::string brief;
    for (Split s : {Split::Train, Split::Val, Split::Test}) {
        const auto& mask = masks.mask(s);
        const auto& yrs = s == Split::Train ? masks.train_years : s == Split::Val ? masks.val_years : masks.test_years;
        std::size_t pos = 0, neg = 0, gdom = 0, gnon = 0;
        for (std::size_t r = 0; r < matrix.rows(); ++r) {
            if (mask[r]) (labels.d[r] ? pos : neg)++;
        }
        for (const auto& d : dossiers) {
            if (std::find(yrs.begin(), yrs.end(), d.birth_year) != yrs.end()) (d.dominant ? gdom : gnon)++;
        }
        j[split_name(s)] = {{"years", yrs},
                            {"dominant_products", pos},
                            {"non_dominant_products", neg},
                            {"dominant_genotypes", gdom},
                            {"non_dominant_genotypes", gnon}};
        brief += std::string(brief.empty() ? "" : ", ") + split_name(s) + " " + std::to_string(mask_count(mask)) +
                 " (" + std::to_string(pos) + " dominant)";
    }
    write_json(ctx.out / "split.json", j);
    return "split: " + brief;
}

std::string cmd_train(Context& ctx) {
    const auto records = load_panel(ctx);
    const auto& cfg = ctx.config.train;
    const auto seeds = parse_seed_list(ctx.config.seeds);
    const auto inputs = prepare_inputs(records, cfg);
    const auto report = run_multi_seed(inputs, cfg, seeds);
    if (report.runs.empty()) throw TrainingError("every seed failed");

    ordered_json runs = metrics_to_json(report);
    write_json(ctx.out / "metrics.json", runs);
    runs["features"] = inputs.features.cols();
    runs["lambda_max"] = inputs.laplacian.lambda_max;
    write_json(ctx.out / "runs.json", runs);
    ensure_directory(ctx.out / "checkpoints");
    ensure_directory(ctx.out / "predictions");
    for (std::size_t k = 0; k < report.outcomes.size(); ++k) {
        const auto& o = report.outcomes[k];
        const std::string stem = "seed_" + std::to_string(o.record.seed);
        Checkpoint ckpt{o.model, inputs.pca, cfg.pca_fraction, cfg.dominance_threshold, o.record.seed,
                        inputs.vocabulary_digest};
        save_checkpoint(ctx.out / "checkpoints" / (stem + ".json"), ckpt);
        const std::string csv = predictions_csv(o.test_predictions, inputs);
        write_file(ctx.out / "predictions" / (stem + ".csv"), csv);
        if (k == 0) write_file(ctx.out / "predictions.csv", csv);
    }
    const auto& a = report.averages;
    return "train: " + std::to_string(report.runs.size()) + "/" + std::to_string(seeds.size()) + " seeds, F=" +
           std::to_string(inputs.features.cols()) + ", mean test TP " + format_fixed(a.tp, 1) + " FN " +
           format_fixed(a.fn, 1) + " TPR " + format_fixed(a.tpr, 3) + " accuracy " + format_fixed(a.accuracy, 3);
}

std::vector<bool> mask_by_name(const SplitMasks& masks, const std::string& name) {
    if (name == "train") return masks.train;
    if (name == "val") return masks.val;
    if (name == "test") return masks.test;
    return {};
}

std::string cmd_predict(Context& ctx) {
    const auto records = load_panel(ctx);
    const auto ckpt = load_checkpoint(ctx.config.checkpoint);
    TrainConfig cfg = ctx.config.train;
    cfg.dominance_threshold = ckpt.dominance_threshold;
    cfg.pca_fraction = ckpt.pca_fraction;
    const auto inputs = prepare_inputs(records, cfg, ckpt.pca);
    if (inputs.vocabulary_digest != ckpt.vocabulary_digest) {
        throw ValidationError("panel vocabulary does not match the checkpoint");
    }
    const auto rows = predict(ckpt.model, inputs, mask_by_name(inputs.masks, ctx.config.mask));
    write_file(ctx.out / "predictions.csv", predictions_csv(rows, inputs));
    std::size_t pos = 0;
    for (const auto& r : rows) pos += static_cast<std::size_t>(r.predicted);
    return "predict: " + std::to_string(rows.size()) + " " + ctx.config.mask + " products, " + std::to_string(pos) +
           " predicted dominant";
}

std::string cmd_evaluate(Context& ctx) {
    const std::string text = read_file(ctx.config.predictions);
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> fields;
    std::vector<int> actual, predicted;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!parse_csv_line(line, fields) || fields.size() != 6) {
            throw FormatError(ctx.config.predictions, lineno, "expected 6 CSV fields");
        }
        if (lineno == 1) {
            if (fields[0] != "node_id" || fields[4] != "predicted" || fields[5] != "actual") {
                throw FormatError(ctx.config.predictions, lineno, "unexpected predictions header");
            }
            continue;
        }
        const auto bit = [&](const std::string& s) {
            if (s != "0" && s != "1") throw FormatError(ctx.config.predictions, lineno, "labels must be 0 or 1");
            return s == "1" ? 1 : 0;
        };
        predicted.push_back(bit(fields[4]));
        actual.push_back(bit(fields[5]));
    }
    if (actual.empty()) throw ValidationError("predictions file has no rows");
    RunRecord r;
    r.threshold = ctx.config.train.dominance_threshold;
    r.split = ctx.config.train.split;
    r.evaluation = evaluate_hard_labels(actual, predicted, ctx.config.train.weights);
    r.train_evaluation = r.evaluation;
    MetricsReport report;
    report.runs.push_back(r);
    report.averages = average_runs(report.runs);
    auto j = metrics_to_json(report);
    j["runs"][0].erase("train");
    j["runs"][0].erase("best_epoch");
    j["runs"][0].erase("epochs_run");
    write_json(ctx.out / "metrics.json", j);
    const auto& e = r.evaluation;
    return "evaluate: " + std::to_string(actual.size()) + " rows, TP " + format_fixed(e.counts.tp, 0) + " FP " +
           format_fixed(e.counts.fp, 0) + " TN " + format_fixed(e.counts.tn, 0) + " FN " +
           format_fixed(e.counts.fn, 0) + ", accuracy " + format_fixed(e.accuracy, 3) + " TPR " +
           format_fixed(e.ratios.tpr, 3);
}

std::string cmd_baseline(Context& ctx) {
    const auto records = load_panel(ctx);
    const auto matrix = encode_chromosomes(records, build_vocabulary(records));
    const auto& cfg = ctx.config.train;
    const auto masks = make_split_masks(matrix, cfg.split);
    const auto dossiers = detect_dominant_genotypes(matrix, cfg.dominance_threshold);
    const auto labels = label_dominant_products(matrix, dossiers).d;
    LogRegOptions opt;
    opt.l2 = ctx.config.l2;
    opt.class_weighting = ctx.config.baseline_class_weighting;
    const auto model = train_logreg(matrix, labels, masks.train, opt);
    const Eigen::VectorXd p = logreg_probabilities(model, matrix);

    RunRecord r;
    r.threshold = cfg.dominance_threshold;
    r.split = cfg.split;
    r.evaluation = evaluate_predictions(labels, p, masks.test, cfg.weights);
    r.train_evaluation = evaluate_predictions(labels, p, masks.train, cfg.weights);
    r.epochs_run = model.iterations;
    MetricsReport report;
    report.runs.push_back(r);
    report.averages = average_runs(report.runs);
    write_json(ctx.out / "metrics.json", metrics_to_json(report));

    std::ostringstream csv;
    csv << "node_id,product_id,year,probability,predicted,actual\n";
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        if (!masks.test[i]) continue;
        const double pi = p(static_cast<Eigen::Index>(i));
        csv << i << ',' << csv_escape(matrix.product_id(i)) << ',' << matrix.year(i) << ',' << format_fixed(pi, 9)
            << ',' << (pi >= kDecisionThreshold ? 1 : 0) << ',' << labels[i] << '\n';
    }
    write_file(ctx.out / "predictions.csv", csv.str());
    const auto& e = r.evaluation;
    return "baseline: logistic regression, " + std::to_string(model.iterations) + " iterations, test TP " +
           format_fixed(e.counts.tp, 0) + " FP " + format_fixed(e.counts.fp, 0) + " accuracy " +
           format_fixed(e.accuracy, 3) + " TPR " + format_fixed(e.ratios.tpr, 3);
}

std::string cmd_synth(Context& ctx) {
    const auto panel = generate_panel(ctx.config.synth);
    const bool jsonl = ctx.config.output_format == "jsonl";
    save_products(ctx.out / (jsonl ? "products.jsonl" : "products.csv"), panel.records,
                  jsonl ? PanelFormat::Jsonl : PanelFormat::Csv);
    write_json(ctx.out / "truth.json", truth_to_json(panel.truth));
    std::size_t dom = 0, pos = 0;
    for (const auto& g : panel.truth.genotypes) dom += g.dominant ? 1 : 0;
    for (const auto& [id, d] : panel.truth.labels) pos += static_cast<std::size_t>(d);
    return "synth: " + std::to_string(panel.records.size()) + " products, " +
           std::to_string(panel.truth.genotypes.size()) + " genotypes, " + std::to_string(dom) +
           " dominant genotypes, " + std::to_string(pos) + " dominant products";
}

std::string dispatch(Context& ctx) {
    const auto& c = ctx.command;
    if (c == "ingest") return cmd_ingest(ctx);
    if (c == "graph") return cmd_graph(ctx);
    if (c == "label") return cmd_label(ctx);
    if (c == "stats") return cmd_stats(ctx);
    if (c == "split") return cmd_split(ctx);
    if (c == "train") return cmd_train(ctx);
    if (c == "predict") return cmd_predict(ctx);
    if (c == "evaluate") return cmd_evaluate(ctx);
    if (c == "baseline") return cmd_baseline(ctx);
    return cmd_synth(ctx);
}

json flag_value(const std::string& key, const std::string& text) {
    if (kStringKeys.count(key)) return text;
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        throw ValidationError("invalid value '" + text + "' for " + key);
    }
}

} // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"Dominant design forecasting on product phylogenetic networks", kToolName};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);

    struct Bound {
        std::string value;
        CLI::Option* option = nullptr;
        std::string key;
    };
    struct Sub {
        CLI::App* app = nullptr;
        std::string config_path;
        std::string out;
        std::vector<std::unique_ptr<Bound>> flags;
        std::vector<std::pair<std::string, CLI::Option*>> switches;
    };
    std::vector<Sub> subs(kCommands.size());
    for (std::size_t i = 0; i < kCommands.size(); ++i) {
        const auto& cmd = kCommands[i];
        auto& s = subs[i];
        s.app = app.add_subcommand(cmd.name);
        s.app->add_option("--config", s.config_path, "run config JSON");
        s.app->add_option("--out", s.out, "output directory")->required();
        for (const auto& f : cmd.flags) {
            const auto spec = std::find_if(kFlags.begin(), kFlags.end(), [&](const FlagSpec& x) { return f == x.flag; });
            auto b = std::make_unique<Bound>();
            b->key = spec->key;
            b->option = s.app->add_option(spec->flag, b->value, spec->help);
            s.flags.push_back(std::move(b));
        }
        for (const auto& sw : cmd.switches) {
            const std::string help = sw == "--benchmark" ? "use the benchmark generator settings" : "disable class weighting";
            s.switches.emplace_back(sw, s.app->add_flag(sw, help));
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back(); // program name
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    for (std::size_t i = 0; i < kCommands.size(); ++i) {
        auto& s = subs[i];
        if (!s.app->parsed()) continue;
        Context ctx;
        ctx.command = kCommands[i].name;
        ctx.out = s.out;
        try {
            json raw = json::object();
            if (!s.config_path.empty()) {
                try {
                    raw = json::parse(read_file(s.config_path));
                } catch (const json::exception& e) {
                    throw FormatError(s.config_path, 0, e.what());
                }
                if (!raw.is_object()) throw ValidationError("run config must be a JSON object");
            }
            for (const auto& [sw, opt] : s.switches) {
                if (!opt->count()) continue;
                if (sw == "--benchmark") {
                    raw["benchmark"] = true;
                } else {
                    raw[ctx.command == "baseline" ? "baseline_class_weighting" : "class_weighting"] = false;
                }
            }
            for (const auto& b : s.flags) {
                if (!b->option->count()) continue;
                if (ctx.command == "synth" && b->key == "seeds") {
                    if (!raw.contains("synth")) raw["synth"] = json::object();
                    raw["synth"]["seed"] = flag_value("seed", b->value);
                } else {
                    raw[b->key] = flag_value(b->key, b->value);
                }
            }
            ctx.config = run_config_from_json(raw);
            write_manifest(ctx);
            std::cout << dispatch(ctx) << std::endl;
            return 0;
        } catch (const IoError& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 1;
        }
    }
    return 1;
}

int run_command(int argc, char** argv) { return run_command(std::vector<std::string>(argv, argv + argc)); }

} // namespace phylo
