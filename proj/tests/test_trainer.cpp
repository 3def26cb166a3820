#include "doctest.h"
#include "oracles.hpp"

#include "phylo/checkpoint.hpp"
#include "phylo/error.hpp"
#include "phylo/evo_synth.hpp"
#include "phylo/trainer.hpp"

using namespace phylo;

namespace {

std::vector<ProductRecord> small_panel(std::uint64_t seed, int years = 6, int per_year = 5) {
    SynthConfig c;
    c.years = years;
    c.products_per_year = {per_year};
    c.founder_genome = 6;
    c.mutation_rate = 1.0;
    c.planted = {{2, 1, {}}};
    c.seed = seed;
    return generate_panel(c).records;
}

TrainConfig small_config() {
    TrainConfig c;
    c.split = {4, 1, 1};
    c.hidden = 4;
    c.pooled = 3;
    c.max_epochs = 40;
    c.patience = 40;
    c.pca_fraction = 0.9;
    return c;
}

std::vector<double> flatten(const FcpGnnParams& p) {
    std::vector<double> out;
    p.for_each_tensor([&](const std::string&, const auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) out.push_back(t.data()[i]);
    });
    return out;
}

const TrainingInputs& shared_inputs() {
    static const TrainingInputs inputs = prepare_inputs(small_panel(3), small_config());
    return inputs;
}

} // namespace

TEST_CASE("inputs are consistent with the panel") {
    const auto& in = shared_inputs();
    CHECK(in.node_count() == 30);
    CHECK(in.features.rows() == 30);
    CHECK(in.features.cols() == static_cast<Eigen::Index>(in.pca.output_dim()));
    CHECK(mask_count(in.masks.train) == 20);
    CHECK(mask_count(in.masks.val) == 5);
    CHECK(mask_count(in.masks.test) == 5);
    CHECK(in.vocabulary_digest.size() == 64);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto& in = shared_inputs();
    auto cfg = small_config();
    cfg.seed = 11;
    const auto a = train_model(in, cfg);
    const auto b = train_model(in, cfg);
    CHECK(flatten(a.model.params) == flatten(b.model.params));
    CHECK(a.history.train_loss == b.history.train_loss);
    CHECK(a.history.best_epoch == b.history.best_epoch);
    cfg.seed = 12;
    const auto c = train_model(in, cfg);
    CHECK(flatten(a.model.params) != flatten(c.model.params));
}

TEST_CASE("parameter gradient matches central differences") {
    const auto& in = shared_inputs();
    for (Activation act : {Activation::Identity, Activation::Tanh}) {
        auto cfg = small_config();
        cfg.activation = act;
        auto model = init_model(model_config_for(cfg, static_cast<int>(in.features.cols())), 5);
        const auto lg = training_loss_and_gradient(model, in, cfg);
        const auto analytic = flatten(lg.gradient);
        std::vector<double*> slots;
        model.params.for_each_tensor([&](const std::string&, auto& t) {
            for (Eigen::Index i = 0; i < t.size(); ++i) slots.push_back(t.data() + i);
        });
        REQUIRE(slots.size() == analytic.size());
        const double h = 1e-4;
        double worst = 0.0;
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const double saved = *slots[i];
            *slots[i] = saved + h;
            const double up = training_loss_and_gradient(model, in, cfg).loss.total;
            *slots[i] = saved - h;
            const double down = training_loss_and_gradient(model, in, cfg).loss.total;
            *slots[i] = saved;
            worst = std::max(worst, oracle::rel_error((up - down) / (2 * h), analytic[i]));
        }
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("zero model predicts one half and class one everywhere") {
    const auto& in = shared_inputs();
    const auto model = make_zero_model(model_config_for(small_config(), static_cast<int>(in.features.cols())));
    const auto rows = predict(model, in, {});
    REQUIRE(rows.size() == in.node_count());
    for (const auto& r : rows) {
        CHECK(r.probability == 0.5);
        CHECK(r.predicted == 1);
    }
    CHECK(predict(model, in, in.masks.test).size() == 5);
    auto bad = model;
    bad.config.features += 1;
    CHECK_THROWS_AS(predict(bad, in, {}), ValidationError);
}

TEST_CASE("epoch-zero loss equals BCE with zero weights") {
    const auto& in = shared_inputs();
    auto cfg = small_config();
    cfg.weights = ObjectiveWeights::zeros();
    cfg.class_weighting = false;
    const auto model = init_model(model_config_for(cfg, static_cast<int>(in.features.cols())), 1);
    const auto lg = training_loss_and_gradient(model, in, cfg);
    CHECK(lg.loss.total == doctest::Approx(lg.loss.bce).epsilon(1e-12));
    const auto zero = make_zero_model(model.config);
    CHECK(training_loss_and_gradient(zero, in, cfg).loss.total == doctest::Approx(std::log(2.0)));
}

TEST_CASE("separable training set is fit perfectly without early stopping") {
    const auto records = small_panel(9, 4, 5);
    auto cfg = small_config();
    cfg.split = {2, 1, 1};
    cfg.max_epochs = 400;
    cfg.patience = 400;
    cfg.hidden = 8;
    cfg.pooled = 8;
    cfg.pca_fraction = 1.0;
    auto in = prepare_inputs(records, cfg);
    in.masks.val = in.masks.train;
    const auto result = train_model(in, cfg);
    const auto rows = predict(result.model, in, in.masks.train);
    int tp = 0, pos = 0;
    for (const auto& r : rows) {
        pos += r.actual;
        tp += r.actual && r.predicted;
    }
    REQUIRE(pos > 0);
    CHECK(tp == pos);
}

TEST_CASE("multi-seed runs and averages") {
    const auto& in = shared_inputs();
    auto cfg = small_config();
    cfg.max_epochs = 5;
    const auto seeds = parse_seed_list("1..10");
    const auto report = run_multi_seed(in, cfg, seeds);
    CHECK(report.runs.size() + report.failed_seeds.size() == 10);
    CHECK(report.runs.size() == 10);
    CHECK(report.averages.runs == 10);
    double tpr = 0.0;
    for (const auto& r : report.runs) tpr += r.evaluation.ratios.tpr;
    CHECK(report.averages.tpr == doctest::Approx(tpr / 10.0));

    RunRecord r;
    r.evaluation.counts = {1, 2, 3, 4};
    r.evaluation.accuracy = 0.4;
    const auto avg = average_runs({r, r, r});
    CHECK(avg.tp == 1);
    CHECK(avg.fn == 4);
    CHECK(avg.accuracy == doctest::Approx(0.4));
}

TEST_CASE("single-class training mask is rejected") {
    auto in = shared_inputs();
    std::fill(in.labels.begin(), in.labels.end(), 0);
    CHECK_THROWS_AS(train_model(in, small_config()), ValidationError);
    CHECK_THROWS_AS(run_multi_seed(in, small_config(), {1}), ValidationError);
}

TEST_CASE("seed list parsing") {
    CHECK(parse_seed_list("1..5") == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(parse_seed_list("3,1,7") == std::vector<std::uint64_t>{3, 1, 7});
    CHECK(parse_seed_list("42") == std::vector<std::uint64_t>{42});
    CHECK_THROWS_AS(parse_seed_list("5..1"), ValidationError);
    CHECK_THROWS_AS(parse_seed_list("x"), ValidationError);
    CHECK_THROWS_AS(parse_seed_list(""), ValidationError);
}

TEST_CASE("checkpoint round trip preserves predictions") {
    const auto& in = shared_inputs();
    auto cfg = small_config();
    cfg.max_epochs = 3;
    const auto result = train_model(in, cfg);
    Checkpoint ck{result.model, in.pca, cfg.pca_fraction, cfg.dominance_threshold, cfg.seed, in.vocabulary_digest};
    oracle::TempDir dir("ckpt");
    save_checkpoint(dir.path / "ck.json", ck);
    const auto back = load_checkpoint(dir.path / "ck.json");
    CHECK(back.model.config == ck.model.config);
    CHECK(flatten(back.model.params) == flatten(ck.model.params));
    CHECK(back.vocabulary_digest == ck.vocabulary_digest);
    const auto again = prepare_inputs(small_panel(3), cfg, back.pca);
    const auto p1 = predict(result.model, in, {});
    const auto p2 = predict(back.model, again, {});
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].probability == p2[i].probability);

    auto j = checkpoint_to_json(ck);
    j["parameters"][0]["shape"][0] = 99;
    CHECK_THROWS_AS(checkpoint_from_json(nlohmann::json::parse(j.dump())), ValidationError);
}

TEST_CASE("predictions csv layout") {
    const auto& in = shared_inputs();
    const auto model = make_zero_model(model_config_for(small_config(), static_cast<int>(in.features.cols())));
    const auto csv = predictions_csv(predict(model, in, in.masks.test), in);
    CHECK(csv.rfind("node_id,product_id,year,probability,predicted,actual\n", 0) == 0);
    CHECK(csv.find(",0.500000000,1,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}
