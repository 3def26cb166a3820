#include "phylo/trainer.hpp"

#include "phylo/error.hpp"
#include "phylo/util.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <span>
#include <sstream>

namespace phylo {

namespace {

std::vector<std::span<double>> tensor_spans(FcpGnnParams& p) {
    std::vector<std::span<double>> out;
    p.for_each_tensor([&](const std::string&, auto& t) {
        out.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
    });
    return out;
}

class Adam {
public:
    Adam(const FcpGnnModel& model, const TrainConfig& cfg)
        : cfg_(cfg), m_(make_zero_model(model.config).params), v_(make_zero_model(model.config).params) {}

    void step(FcpGnnParams& params, FcpGnnParams& grad) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        auto ps = tensor_spans(params);
        auto gs = tensor_spans(grad);
        auto ms = tensor_spans(m_);
        auto vs = tensor_spans(v_);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            for (std::size_t i = 0; i < ps[k].size(); ++i) {
                const double g = gs[k][i];
                ms[k][i] = cfg_.beta1 * ms[k][i] + (1.0 - cfg_.beta1) * g;
                vs[k][i] = cfg_.beta2 * vs[k][i] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = ms[k][i] / bc1;
                const double vhat = vs[k][i] / bc2;
                ps[k][i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_epsilon);
            }
        }
    }

private:
    const TrainConfig& cfg_;
    FcpGnnParams m_, v_;
    int t_ = 0;
};

void require_two_classes(const std::vector<int>& labels, const std::vector<bool>& mask) {
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!mask[i]) continue;
        (labels[i] == 1 ? pos : neg) = true;
    }
    if (!pos || !neg) throw ValidationError("training mask must contain both dominant and non-dominant products");
}

Eigen::VectorXd class_weights_for(const TrainingInputs& in, const TrainConfig& cfg) {
    if (!cfg.class_weighting) return {};
    return inverse_class_weights(in.labels, in.masks.train);
}

TrainingInputs prepare_common(const std::vector<ProductRecord>& records, const TrainConfig& config,
                              const PcaModel* pca) {
    TrainingInputs in;
    const auto vocab = build_vocabulary(records);
    const auto matrix = encode_chromosomes(records, vocab);
    in.product_ids = matrix.product_ids();
    in.years = matrix.years();
    in.vocabulary_digest = vocab.digest();
    in.laplacian = build_laplacian(build_fcpn(matrix));
    in.dossiers = detect_dominant_genotypes(matrix, config.dominance_threshold);
    in.product_labels = label_dominant_products(matrix, in.dossiers);
    in.labels = in.product_labels.d;
    in.masks = make_split_masks(matrix, config.split);
    if (pca) {
        in.pca = *pca;
    } else if (config.pca_fit == PcaFit::TrainOnly) {
        in.pca = fit_pca(matrix, config.pca_fraction, in.masks.train);
    } else {
        in.pca = fit_pca(matrix, config.pca_fraction);
    }
    in.features = transform_pca(in.pca, matrix);
    return in;
}

} // namespace

TrainingInputs prepare_inputs(const std::vector<ProductRecord>& records, const TrainConfig& config) {
    return prepare_common(records, config, nullptr);
}

TrainingInputs prepare_inputs(const std::vector<ProductRecord>& records, const TrainConfig& config,
                              const PcaModel& pca) {
    return prepare_common(records, config, &pca);
}

ModelConfig model_config_for(const TrainConfig& config, int features) {
    ModelConfig m;
    m.features = features;
    m.hidden = config.hidden;
    m.pooled = config.pooled;
    m.cheb_order = config.cheb_order;
    m.generations = config.generations;
    m.activation = config.activation;
    return m;
}

LossAndGradient training_loss_and_gradient(const FcpGnnModel& model, const TrainingInputs& inputs,
                                           const TrainConfig& config) {
    const auto cw = class_weights_for(inputs, config);
    const auto trace = model_forward_trace(model, inputs.features, inputs.laplacian.scaled);
    LossAndGradient out;
    out.loss = total_loss(inputs.labels, trace.probability, inputs.masks.train, config.weights, cw, config.train_mode);
    out.gradient = model_backward(model, inputs.laplacian.scaled, trace, out.loss.grad_probability);
    return out;
}

TrainResult train_model(const TrainingInputs& inputs, const TrainConfig& config) {
    if (!(config.learning_rate > 0.0) || config.max_epochs < 1 || config.patience < 1) {
        throw ValidationError("learning rate, epoch budget and patience must be positive");
    }
    require_two_classes(inputs.labels, inputs.masks.train);
    const auto cw = class_weights_for(inputs, config);
    const ModelConfig mcfg = model_config_for(config, static_cast<int>(inputs.features.cols()));

    TrainResult result;
    result.model = init_model(mcfg, config.seed);
    FcpGnnParams best = result.model.params;
    Adam adam(result.model, config);
    auto& hist = result.history;
    hist.best_val_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto trace = model_forward_trace(result.model, inputs.features, inputs.laplacian.scaled);
        const auto train = total_loss(inputs.labels, trace.probability, inputs.masks.train, config.weights, cw,
                                      config.train_mode);
        const auto val = total_loss(inputs.labels, trace.probability, inputs.masks.val, config.weights, cw,
                                    config.train_mode);
        if (!std::isfinite(train.total) || !std::isfinite(val.total)) {
            std::ostringstream msg;
            msg << "non-finite loss at epoch " << epoch << " (seed " << config.seed << "): train bce=" << train.bce
                << " ows=" << train.ows << ", val total=" << val.total;
            throw TrainingError(msg.str());
        }
        hist.train_loss.push_back(train.total);
        hist.train_bce.push_back(train.bce);
        hist.val_loss.push_back(val.total);
        hist.epochs_run = epoch + 1;
        if (val.total < hist.best_val_loss) {
            hist.best_val_loss = val.total;
            hist.best_epoch = epoch;
            best = result.model.params;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
        auto grad = model_backward(result.model, inputs.laplacian.scaled, trace, train.grad_probability);
        adam.step(result.model.params, grad);
        if (!result.model.params.all_finite()) {
            throw TrainingError("non-finite parameters after epoch " + std::to_string(epoch));
        }
    }
    result.model.params = std::move(best);
    return result;
}

std::vector<PredictionRow> predict(const FcpGnnModel& model, const TrainingInputs& inputs,
                                   const std::vector<bool>& mask) {
    if (model.config.features != inputs.features.cols()) {
        throw ValidationError("model expects " + std::to_string(model.config.features) + " features, inputs have " +
                              std::to_string(inputs.features.cols()));
    }
    if (!mask.empty() && mask.size() != inputs.node_count()) throw ValidationError("mask length mismatch");
    const Eigen::VectorXd p = model_forward(model, inputs.features, inputs.laplacian.scaled);
    std::vector<PredictionRow> rows;
    for (std::size_t i = 0; i < inputs.node_count(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        const double pi = p(static_cast<Eigen::Index>(i));
        rows.push_back({i, pi, pi >= kDecisionThreshold ? 1 : 0, inputs.labels[i]});
    }
    return rows;
}

std::string predictions_csv(const std::vector<PredictionRow>& rows, const TrainingInputs& inputs) {
    std::ostringstream out;
    out << "node_id,product_id,year,probability,predicted,actual\n";
    for (const auto& r : rows) {
        out << r.node << ',' << csv_escape(inputs.product_ids[r.node]) << ',' << inputs.years[r.node] << ','
            << format_fixed(r.probability, 9) << ',' << r.predicted << ',' << r.actual << '\n';
    }
    return out.str();
}

AveragedMetrics average_runs(const std::vector<RunRecord>& runs) {
    AveragedMetrics a;
    a.runs = runs.size();
    if (runs.empty()) return a;
    for (const auto& r : runs) {
        const auto& e = r.evaluation;
        a.tn += e.counts.tn;
        a.tp += e.counts.tp;
        a.fp += e.counts.fp;
        a.fn += e.counts.fn;
        a.accuracy += e.accuracy;
        a.tpr += e.ratios.tpr;
        a.tnr += e.ratios.tnr;
        a.ppv += e.ratios.ppv;
        a.npv += e.ratios.npv;
        a.fper += e.ratios.fper;
        a.dr += e.ratios.dr;
        a.ows += e.ows;
    }
    const double n = static_cast<double>(runs.size());
    for (double* v : {&a.tn, &a.tp, &a.fp, &a.fn, &a.accuracy, &a.tpr, &a.tnr, &a.ppv, &a.npv, &a.fper, &a.dr, &a.ows}) {
        *v /= n;
    }
    return a;
}

MetricsReport run_multi_seed(const TrainingInputs& inputs, const TrainConfig& config,
                             const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    require_two_classes(inputs.labels, inputs.masks.train);

    struct Slot {
        std::optional<SeedOutcome> outcome;
        std::string error;
    };
    std::vector<Slot> slots(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t k) {
        TrainConfig cfg = config;
        cfg.seed = seeds[k];
        try {
            auto trained = train_model(inputs, cfg);
            const Eigen::VectorXd p = model_forward(trained.model, inputs.features, inputs.laplacian.scaled);
            SeedOutcome out;
            out.record.seed = seeds[k];
            out.record.threshold = cfg.dominance_threshold;
            out.record.split = cfg.split;
            out.record.evaluation = evaluate_predictions(inputs.labels, p, inputs.masks.test, cfg.weights);
            out.record.train_evaluation = evaluate_predictions(inputs.labels, p, inputs.masks.train, cfg.weights);
            out.record.best_epoch = trained.history.best_epoch;
            out.record.epochs_run = trained.history.epochs_run;
            out.test_predictions = predict(trained.model, inputs, inputs.masks.test);
            out.model = std::move(trained.model);
            slots[k].outcome = std::move(out);
        } catch (const TrainingError& e) {
            slots[k].error = e.what();
        }
    });

    MetricsReport report;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        if (slots[k].outcome) {
            report.runs.push_back(slots[k].outcome->record);
            report.outcomes.push_back(std::move(*slots[k].outcome));
        } else {
            std::cerr << "warning: seed " << seeds[k] << " failed and is excluded from averages: " << slots[k].error
                      << '\n';
            report.failed_seeds.push_back(seeds[k]);
            report.failure_messages.push_back(slots[k].error);
        }
    }
    report.averages = average_runs(report.runs);
    return report;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    const auto parse_one = [&](const std::string& s) -> std::uint64_t {
        const std::string t = trim(s);
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (t.empty() || used != t.size()) throw ValidationError("invalid seed list '" + text + "'");
        return v;
    };
    std::vector<std::uint64_t> out;
    const auto range = text.find("..");
    if (range != std::string::npos) {
        const auto lo = parse_one(text.substr(0, range));
        const auto hi = parse_one(text.substr(range + 2));
        if (hi < lo || hi - lo > 100000) throw ValidationError("invalid seed range '" + text + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
        return out;
    }
    for (const auto& part : split(text, ',')) out.push_back(parse_one(part));
    return out;
}

} // namespace phylo
