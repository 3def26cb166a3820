#include "doctest.h"
#include "oracles.hpp"

#include "phylo/error.hpp"
#include "phylo/logreg.hpp"

using namespace phylo;

namespace {

struct Toy {
    std::vector<ProductRecord> records;
    ChromosomeMatrix matrix;
    std::vector<int> labels;
};

Toy make_toy(const std::vector<std::pair<std::set<std::string>, int>>& rows) {
    Toy t;
    int i = 0;
    for (const auto& [attrs, label] : rows) {
        t.records.push_back(oracle::record("p" + std::to_string(i++), 2000, attrs));
        t.labels.push_back(label);
    }
    t.records = normalize_products(t.records);
    const auto vocab = build_vocabulary(t.records);
    t.matrix = encode_chromosomes(t.records, vocab);
    // normalize_products may reorder; realign labels by id
    std::vector<int> aligned;
    for (const auto& r : t.records) aligned.push_back(t.labels[std::stoul(r.id.substr(1))]);
    t.labels = aligned;
    return t;
}

std::vector<bool> all(std::size_t n) { return std::vector<bool>(n, true); }

} // namespace

TEST_CASE("one-dimensional separable set is classified perfectly") {
    const auto t = make_toy({{{"a"}, 1}, {{"a"}, 1}, {{"b"}, 0}, {{"b"}, 0}, {{"b"}, 0}});
    const auto model = train_logreg(t.matrix, t.labels, all(t.labels.size()));
    const auto pred = predict_logreg(model, t.matrix, {});
    REQUIRE(pred.predicted.size() == t.labels.size());
    for (std::size_t i = 0; i < t.labels.size(); ++i) CHECK(pred.predicted[i] == t.labels[i]);
}

TEST_CASE("loss gradient matches central differences") {
    std::mt19937_64 rng(3);
    const auto t = make_toy({{{"a", "b"}, 1}, {{"b", "c"}, 0}, {{"a", "c", "d"}, 1}, {{"d"}, 0}, {{"b"}, 1}});
    const auto n = static_cast<Eigen::Index>(t.matrix.cols());
    const Eigen::VectorXd w = oracle::random_matrix(rng, n, 1);
    const double b = 0.3;
    Eigen::VectorXd nw(5);
    nw << 1.0, 2.0, 0.5, 1.0, 1.5;
    const auto mask = std::vector<bool>{true, true, false, true, true};
    const auto loss = logreg_loss(t.matrix, t.labels, mask, nw, w, b, 0.1);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd up = w, down = w;
        up(j) += h;
        down(j) -= h;
        const double fd = (logreg_loss(t.matrix, t.labels, mask, nw, up, b, 0.1).value -
                           logreg_loss(t.matrix, t.labels, mask, nw, down, b, 0.1).value) /
                          (2 * h);
        CHECK(oracle::rel_error(fd, loss.grad_w(j)) <= 1e-5);
    }
    const double fdb = (logreg_loss(t.matrix, t.labels, mask, nw, w, b + h, 0.1).value -
                        logreg_loss(t.matrix, t.labels, mask, nw, w, b - h, 0.1).value) /
                       (2 * h);
    CHECK(oracle::rel_error(fdb, loss.grad_b) <= 1e-5);
}

TEST_CASE("imbalanced set without class weighting predicts all negative") {
    std::vector<std::pair<std::set<std::string>, int>> rows;
    for (int i = 0; i < 40; ++i) rows.push_back({{"common", "x" + std::to_string(i % 3)}, 0});
    rows.push_back({{"common", "x0"}, 1});
    rows.push_back({{"common", "x1"}, 1});
    const auto t = make_toy(rows);
    LogRegOptions opt;
    opt.l2 = 1.0;
    const auto model = train_logreg(t.matrix, t.labels, all(t.labels.size()), opt);
    const auto pred = predict_logreg(model, t.matrix, {});
    int positives = 0;
    for (int p : pred.predicted) positives += p;
    CHECK(positives == 0);
    opt.class_weighting = true;
    const auto weighted = train_logreg(t.matrix, t.labels, all(t.labels.size()), opt);
    CHECK(weighted.bias > model.bias);
}

TEST_CASE("zero model predicts one half") {
    const auto t = make_toy({{{"a"}, 1}, {{"b"}, 0}});
    LogRegModel m;
    m.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.matrix.cols()));
    const auto p = logreg_probabilities(m, t.matrix);
    CHECK(p(0) == 0.5);
    CHECK(p(1) == 0.5);
    m.weights = Eigen::VectorXd::Zero(7);
    CHECK_THROWS_AS(logreg_probabilities(m, t.matrix), ValidationError);
}

TEST_CASE("more iterations never increase the loss and runs are deterministic") {
    const auto t = make_toy({{{"a", "b"}, 1}, {{"b", "c"}, 0}, {{"a", "c"}, 1}, {{"c"}, 0}, {{"b"}, 0}, {{"a"}, 1}});
    const auto mask = all(t.labels.size());
    const Eigen::VectorXd unit = Eigen::VectorXd::Ones(6);
    double prev = std::numeric_limits<double>::infinity();
    for (int it : {1, 2, 4, 8, 16, 32, 64}) {
        LogRegOptions opt;
        opt.max_iterations = it;
        opt.tolerance = 0.0;
        const auto m = train_logreg(t.matrix, t.labels, mask, opt);
        const double v = logreg_loss(t.matrix, t.labels, mask, unit, m.weights, m.bias, opt.l2).value;
        CHECK(v <= prev + 1e-15);
        prev = v;
    }
    const auto a = train_logreg(t.matrix, t.labels, mask);
    const auto b = train_logreg(t.matrix, t.labels, mask);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
}

TEST_CASE("single-class mask is rejected") {
    const auto t = make_toy({{{"a"}, 1}, {{"b"}, 0}});
    CHECK_THROWS_AS(train_logreg(t.matrix, t.labels, {true, false}), ValidationError);
}
