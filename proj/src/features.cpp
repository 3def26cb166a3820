#include "phylo/features.hpp"

#include "phylo/error.hpp"
#include "phylo/util.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace phylo {

namespace {

constexpr std::size_t kDenseBlockCols = 1024;

// Dense copy of columns [c0, c1) of the selected rows.
Eigen::MatrixXd dense_block(const ChromosomeMatrix& m, const std::vector<std::size_t>& rows,
                           std::size_t c0, std::size_t c1) {
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                                  static_cast<Eigen::Index>(c1 - c0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto view = m.row(rows[i]);
        for (auto it = std::lower_bound(view.begin(), view.end(), static_cast<std::uint32_t>(c0));
             it != view.end() && *it < c1; ++it) {
            block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*it - c0)) = 1.0;
        }
    }
    return block;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
}

} // namespace

PcaModel fit_pca(const ChromosomeMatrix& matrix, double retained,
                 const std::optional<std::vector<bool>>& fit_rows) {
    if (!(retained > 0.0 && retained <= 1.0)) {
        throw ValidationError("PCA retained fraction must lie in (0, 1]");
    }
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        if (!fit_rows || (*fit_rows).at(r)) rows.push_back(r);
    }
    if (rows.size() < 2) throw ValidationError("PCA needs at least two rows");
    const auto m = static_cast<Eigen::Index>(rows.size());
    const auto n = static_cast<Eigen::Index>(matrix.cols());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (auto r : rows) {
        for (auto c : matrix.row(r)) mean(c) += 1.0;
    }
    mean /= static_cast<double>(m);

    // Scatter-matrix eigenvalues (descending). For wide data the eigenvectors
    // live in row space (m x m Gram matrix) and are mapped back afterwards.
    Eigen::VectorXd scatter_values;
    Eigen::MatrixXd basis;
    const bool wide = n > m;
    if (wide) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t c0 = 0; c0 < matrix.cols(); c0 += kDenseBlockCols) {
            const auto c1 = std::min<std::size_t>(matrix.cols(), c0 + kDenseBlockCols);
            const Eigen::MatrixXd block = dense_block(matrix, rows, c0, c1);
            gram.selfadjointView<Eigen::Lower>().rankUpdate(block);
        }
        gram = gram.selfadjointView<Eigen::Lower>();
        const Eigen::VectorXd row_mean = gram.rowwise().mean();
        const double all_mean = row_mean.mean();
        gram.colwise() -= row_mean;
        gram.rowwise() -= row_mean.transpose();
        gram.array() += all_mean;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.info() != Eigen::Success) throw ValidationError("Gram eigendecomposition failed");
        scatter_values = es.eigenvalues().reverse().cwiseMax(0.0);
        basis = es.eigenvectors().rowwise().reverse();
    } else {
        Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(n, n);
        for (auto r : rows) {
            const auto view = matrix.row(r);
            for (auto a : view) {
                for (auto b : view) scatter(a, b) += 1.0;
            }
        }
        scatter -= static_cast<double>(m) * mean * mean.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
        if (es.info() != Eigen::Success) throw ValidationError("covariance eigendecomposition failed");
        scatter_values = es.eigenvalues().reverse().cwiseMax(0.0);
        basis = es.eigenvectors().rowwise().reverse();
    }

    const double total = scatter_values.sum();
    const double top = scatter_values.size() > 0 ? scatter_values(0) : 0.0;
    if (!(top > 0.0)) throw ValidationError("PCA input has rank 0 (all rows identical)");
    const double cutoff = top * 1e-12 * static_cast<double>(std::max(m, n));
    Eigen::Index rank = 0;
    while (rank < scatter_values.size() && scatter_values(rank) > cutoff) ++rank;

    Eigen::Index k = 0;
    double cumulative = 0.0;
    while (k < rank) {
        cumulative += scatter_values(k) / total;
        ++k;
        if (cumulative >= retained - 1e-12) break;
    }

    Eigen::MatrixXd vectors;
    if (wide) {
        // v_j = Xc^T u_j / sqrt(lambda_j)
        const Eigen::MatrixXd u = basis.leftCols(k);
        Eigen::MatrixXd vt = Eigen::MatrixXd::Zero(k, n);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (auto c : matrix.row(rows[static_cast<std::size_t>(i)])) vt.col(c) += u.row(i).transpose();
        }
        vt -= u.colwise().sum().transpose() * mean.transpose();
        vectors = vt.transpose();
    } else {
        vectors = basis.leftCols(k);
    }

    PcaModel model;
    model.mean = mean;
    model.retained_fraction = retained;
    model.components.resize(k, n);
    model.explained_variance.resize(k);
    model.explained_variance_ratio.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::VectorXd v = vectors.col(j);
        v.normalize();
        fix_sign(v);
        model.components.row(j) = v.transpose();
        model.explained_variance(j) = scatter_values(j) / static_cast<double>(m - 1);
        model.explained_variance_ratio(j) = scatter_values(j) / total;
    }
    return model;
}

Eigen::MatrixXd transform_pca(const PcaModel& model, const ChromosomeMatrix& matrix) {
    if (matrix.cols() != model.input_dim()) {
        throw ValidationError("PCA expects " + std::to_string(model.input_dim()) + " genotype columns, got " +
                              std::to_string(matrix.cols()));
    }
    const auto k = model.components.rows();
    const Eigen::VectorXd offset = model.components * model.mean;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(matrix.rows()), k);
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        Eigen::VectorXd f = -offset;
        for (auto c : matrix.row(r)) f += model.components.col(c);
        out.row(static_cast<Eigen::Index>(r)) = f.transpose();
    }
    return out;
}

Eigen::MatrixXd reconstruct_pca(const PcaModel& model, const Eigen::MatrixXd& features) {
    if (features.cols() != model.components.rows()) throw ValidationError("feature width mismatch");
    Eigen::MatrixXd out = features * model.components;
    out.rowwise() += model.mean.transpose();
    return out;
}

SplitYears parse_split_years(const std::string& text) {
    const auto parts = split(text, ',');
    if (parts.size() != 3) throw ValidationError("split years must look like a,b,c");
    int v[3];
    for (int i = 0; i < 3; ++i) {
        try {
            std::size_t used = 0;
            const std::string t = trim(parts[static_cast<std::size_t>(i)]);
            v[i] = std::stoi(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw ValidationError("invalid split years '" + text + "'");
        }
    }
    return {v[0], v[1], v[2]};
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

const std::vector<bool>& SplitMasks::mask(Split s) const {
    switch (s) {
        case Split::Train: return train;
        case Split::Val: return val;
        case Split::Test: return test;
    }
    throw ValidationError("bad split");
}

Split SplitMasks::split_of(std::size_t node) const {
    if (train.at(node)) return Split::Train;
    if (val.at(node)) return Split::Val;
    return Split::Test;
}

SplitMasks make_split_masks(const ChromosomeMatrix& matrix, SplitYears years) {
    const auto distinct = matrix.distinct_years();
    if (years.train < 1 || years.val < 1 || years.test < 1) {
        throw ValidationError("each split needs at least one year");
    }
    const int sum = years.train + years.val + years.test;
    if (sum != static_cast<int>(distinct.size())) {
        throw ValidationError("split years " + std::to_string(years.train) + "," + std::to_string(years.val) + "," +
                              std::to_string(years.test) + " sum to " + std::to_string(sum) + " but the data has " +
                              std::to_string(distinct.size()) + " distinct years");
    }
    SplitMasks masks;
    masks.years = years;
    const auto a = static_cast<std::size_t>(years.train);
    const auto b = static_cast<std::size_t>(years.val);
    masks.train_years.assign(distinct.begin(), distinct.begin() + static_cast<std::ptrdiff_t>(a));
    masks.val_years.assign(distinct.begin() + static_cast<std::ptrdiff_t>(a),
                           distinct.begin() + static_cast<std::ptrdiff_t>(a + b));
    masks.test_years.assign(distinct.begin() + static_cast<std::ptrdiff_t>(a + b), distinct.end());
    const int last_train = masks.train_years.back();
    const int last_val = masks.val_years.back();
    const std::size_t n = matrix.rows();
    masks.train.assign(n, false);
    masks.val.assign(n, false);
    masks.test.assign(n, false);
    for (std::size_t r = 0; r < n; ++r) {
        const int y = matrix.year(r);
        if (y <= last_train) {
            masks.train[r] = true;
        } else if (y <= last_val) {
            masks.val[r] = true;
        } else {
            masks.test[r] = true;
        }
    }
    return masks;
}

std::size_t mask_count(const std::vector<bool>& mask) {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

} // namespace phylo
