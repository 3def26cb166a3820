#include "phylo/checkpoint.hpp"

#include "phylo/error.hpp"
#include "phylo/util.hpp"

namespace phylo {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

template <class T>
ordered_json tensor_json(const T& t) {
    ordered_json j;
    j["shape"] = {t.rows(), t.cols()};
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
    j["data"] = std::move(data);
    return j;
}

template <class T>
void tensor_from_json(const json& j, T& t, const std::string& name) {
    const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
        data.size() != static_cast<std::size_t>(t.size())) {
        throw ValidationError("checkpoint tensor '" + name + "' has an unexpected shape");
    }
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = data[i++];
}

Eigen::VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

ordered_json checkpoint_to_json(const Checkpoint& ckpt) {
    const auto& cfg = ckpt.model.config;
    ordered_json j;
    j["format_version"] = kFormatVersion;
    j["config"] = {{"features", cfg.features},       {"hidden", cfg.hidden},
                   {"pooled", cfg.pooled},           {"cheb_order", cfg.cheb_order},
                   {"generations", cfg.generations}, {"activation", to_string(cfg.activation)},
                   {"pca_fraction", ckpt.pca_fraction}, {"dominance_threshold", ckpt.dominance_threshold},
                   {"seed", ckpt.seed}};
    j["vocabulary_digest"] = ckpt.vocabulary_digest;
    ordered_json pca;
    pca["retained_fraction"] = ckpt.pca.retained_fraction;
    pca["mean"] = to_std(ckpt.pca.mean);
    pca["components"] = tensor_json(ckpt.pca.components);
    pca["explained_variance"] = to_std(ckpt.pca.explained_variance);
    pca["explained_variance_ratio"] = to_std(ckpt.pca.explained_variance_ratio);
    j["pca"] = std::move(pca);
    ordered_json params = ordered_json::array();
    ckpt.model.params.for_each_tensor([&](const std::string& name, const auto& t) {
        ordered_json p;
        p["name"] = name;
        auto tj = tensor_json(t);
        p["shape"] = tj["shape"];
        p["data"] = tj["data"];
        params.push_back(std::move(p));
    });
    j["parameters"] = std::move(params);
    return j;
}

Checkpoint checkpoint_from_json(const json& j) {
    try {
        if (j.at("format_version").get<int>() != kFormatVersion) {
            throw ValidationError("unsupported checkpoint format version");
        }
        Checkpoint ckpt;
        const auto& c = j.at("config");
        ModelConfig cfg;
        cfg.features = c.at("features").get<int>();
        cfg.hidden = c.at("hidden").get<int>();
        cfg.pooled = c.at("pooled").get<int>();
        cfg.cheb_order = c.at("cheb_order").get<int>();
        cfg.generations = c.at("generations").get<int>();
        cfg.activation = activation_from_string(c.at("activation").get<std::string>());
        ckpt.pca_fraction = c.at("pca_fraction").get<double>();
        ckpt.dominance_threshold = c.at("dominance_threshold").get<double>();
        ckpt.seed = c.at("seed").get<std::uint64_t>();
        ckpt.vocabulary_digest = j.at("vocabulary_digest").get<std::string>();

        const auto& p = j.at("pca");
        ckpt.pca.retained_fraction = p.at("retained_fraction").get<double>();
        ckpt.pca.mean = vector_from_json(p.at("mean"));
        const auto shape = p.at("components").at("shape").get<std::vector<Eigen::Index>>();
        if (shape.size() != 2 || shape[1] != ckpt.pca.mean.size() || shape[0] != cfg.features) {
            throw ValidationError("checkpoint PCA shape does not match the model");
        }
        ckpt.pca.components.resize(shape[0], shape[1]);
        tensor_from_json(p.at("components"), ckpt.pca.components, "pca.components");
        ckpt.pca.explained_variance = vector_from_json(p.at("explained_variance"));
        ckpt.pca.explained_variance_ratio = vector_from_json(p.at("explained_variance_ratio"));

        ckpt.model = make_zero_model(cfg);
        const auto& params = j.at("parameters");
        std::size_t idx = 0;
        ckpt.model.params.for_each_tensor([&](const std::string& name, auto& t) {
            if (idx >= params.size()) throw ValidationError("checkpoint is missing parameter '" + name + "'");
            const auto& e = params[idx++];
            if (e.at("name").get<std::string>() != name) {
                throw ValidationError("checkpoint parameter order mismatch at '" + name + "'");
            }
            tensor_from_json(e, t, name);
        });
        if (idx != params.size()) throw ValidationError("checkpoint has unexpected extra parameters");
        if (!ckpt.model.params.all_finite()) throw ValidationError("checkpoint contains non-finite parameters");
        return ckpt;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file(path, checkpoint_to_json(ckpt).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(path.string(), 0, e.what());
    }
    return checkpoint_from_json(j);
}

ordered_json evaluation_to_json(const EvaluationRecord& e) {
    ordered_json j;
    j["TN"] = e.counts.tn;
    j["TP"] = e.counts.tp;
    j["FP"] = e.counts.fp;
    j["FN"] = e.counts.fn;
    j["accuracy"] = e.accuracy;
    j["TPR"] = e.ratios.tpr;
    j["TNR"] = e.ratios.tnr;
    j["PPV"] = e.ratios.ppv;
    j["NPV"] = e.ratios.npv;
    j["FPER"] = e.ratios.fper;
    j["DR"] = e.ratios.dr;
    j["S_w"] = e.ows;
    return j;
}

ordered_json run_record_to_json(const RunRecord& r) {
    ordered_json j;
    j["threshold"] = r.threshold;
    j["train_years"] = r.split.train;
    j["val_years"] = r.split.val;
    j["test_years"] = r.split.test;
    j["seed"] = r.seed;
    const ordered_json eval = evaluation_to_json(r.evaluation);
    for (const auto& [k, v] : eval.items()) j[k] = v;
    j["best_epoch"] = r.best_epoch;
    j["epochs_run"] = r.epochs_run;
    j["train"] = evaluation_to_json(r.train_evaluation);
    return j;
}

ordered_json averages_to_json(const AveragedMetrics& a) {
    return ordered_json{{"runs", a.runs}, {"TN", a.tn},   {"TP", a.tp},   {"FP", a.fp},     {"FN", a.fn},
                        {"accuracy", a.accuracy},        {"TPR", a.tpr}, {"TNR", a.tnr}, {"PPV", a.ppv},
                        {"NPV", a.npv},                  {"FPER", a.fper}, {"DR", a.dr}, {"S_w", a.ows}};
}

ordered_json metrics_to_json(const MetricsReport& report) {
    ordered_json j;
    ordered_json runs = ordered_json::array();
    for (const auto& r : report.runs) runs.push_back(run_record_to_json(r));
    j["runs"] = std::move(runs);
    j["averages"] = averages_to_json(report.averages);
    if (!report.failed_seeds.empty()) {
        ordered_json failed = ordered_json::array();
        for (std::size_t i = 0; i < report.failed_seeds.size(); ++i) {
            failed.push_back({{"seed", report.failed_seeds[i]}, {"error", report.failure_messages[i]}});
        }
        j["failed_seeds"] = std::move(failed);
    }
    return j;
}

} // namespace phylo
