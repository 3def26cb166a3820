#include "phylo/dominance.hpp"

#include "phylo/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace phylo {

std::size_t ProductLabels::dominant_count() const {
    return static_cast<std::size_t>(std::count(d.begin(), d.end(), 1));
}

std::vector<int> genotype_birth_years(const ChromosomeMatrix& matrix) {
    if (matrix.rows() == 0) throw ValidationError("empty chromosome matrix");
    std::vector<int> birth(matrix.cols(), std::numeric_limits<int>::max());
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (auto c : matrix.row(r)) birth[c] = std::min(birth[c], matrix.year(r));
    }
    return birth;
}

std::vector<GenotypeDossier> detect_dominant_genotypes(const ChromosomeMatrix& matrix, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ValidationError("dominance threshold must lie in (0, 1)");
    }
    const auto birth = genotype_birth_years(matrix);
    const auto years = matrix.distinct_years();

    std::map<int, std::size_t> year_slot;
    for (std::size_t i = 0; i < years.size(); ++i) year_slot[years[i]] = i;
    std::vector<std::size_t> totals(years.size(), 0);
    // carriers[genotype][year slot]
    std::vector<std::vector<std::size_t>> carriers(matrix.cols(), std::vector<std::size_t>(years.size(), 0));
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        const std::size_t y = year_slot[matrix.year(r)];
        ++totals[y];
        for (auto c : matrix.row(r)) ++carriers[c][y];
    }

    std::vector<GenotypeDossier> out(matrix.cols());
    for (std::uint32_t g = 0; g < matrix.cols(); ++g) {
        auto& dossier = out[g];
        dossier.genotype = g;
        dossier.birth_year = birth[g];
        for (std::size_t y = year_slot[birth[g]]; y < years.size(); ++y) {
            const double ratio = static_cast<double>(carriers[g][y]) / static_cast<double>(totals[y]);
            dossier.adoption_ratio[years[y]] = ratio;
            if (!dossier.dominant && ratio > threshold) {
                dossier.dominant = true;
                dossier.dominance_year = years[y];
                dossier.years_to_dominance = years[y] - birth[g];
            }
        }
    }
    return out;
}

ProductLabels label_dominant_products(const ChromosomeMatrix& matrix,
                                      const std::vector<GenotypeDossier>& dossiers) {
    if (dossiers.size() != matrix.cols()) {
        throw ValidationError("dossier count does not match genotype count");
    }
    ProductLabels labels;
    labels.d.assign(matrix.rows(), 0);
    labels.introduced.assign(matrix.rows(), {});
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (auto c : matrix.row(r)) {
            const auto& dossier = dossiers[c];
            if (dossier.dominant && dossier.birth_year == matrix.year(r)) {
                labels.introduced[r].push_back(c);
                ++labels.birth_carriers[c];
            }
        }
        labels.d[r] = labels.introduced[r].empty() ? 0 : 1;
    }
    return labels;
}

double quantile_linear(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

SummaryStats summarize(std::vector<double> values) {
    SummaryStats s;
    s.count = values.size();
    if (values.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        s.mean = s.std = s.min = s.q25 = s.q50 = s.q75 = s.max = nan;
        return s;
    }
    std::sort(values.begin(), values.end());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    s.min = values.front();
    s.max = values.back();
    s.q25 = quantile_linear(values, 0.25);
    s.q50 = quantile_linear(values, 0.50);
    s.q75 = quantile_linear(values, 0.75);
    return s;
}

DominanceStatistics dominance_statistics(const std::vector<GenotypeDossier>& dossiers,
                                         const ProductLabels& labels, const ChromosomeMatrix& matrix,
                                         double threshold) {
    DominanceStatistics st;
    st.threshold = threshold;
    st.genotype_count = dossiers.size();

    std::vector<double> ytd;
    std::map<int, YearRow> rows;
    for (int y : matrix.distinct_years()) rows[y].year = y;
    for (const auto& d : dossiers) {
        if (!d.dominant) continue;
        ++st.dominant_genotype_count;
        ytd.push_back(static_cast<double>(*d.years_to_dominance));
        ++rows[d.birth_year].dominant_genotypes;
    }
    std::vector<double> per_product;
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        auto& row = rows[matrix.year(r)];
        ++row.total_products;
        if (labels.d[r] == 1) {
            ++row.dominant_products;
            ++st.dominant_product_count;
            per_product.push_back(static_cast<double>(labels.introduced[r].size()));
        }
    }
    for (auto& [year, row] : rows) {
        row.dominant_ratio = row.total_products == 0
                                 ? 0.0
                                 : static_cast<double>(row.dominant_products) / static_cast<double>(row.total_products);
        st.per_year.push_back(row);
    }
    std::vector<double> carriers;
    for (const auto& [g, n] : labels.birth_carriers) carriers.push_back(static_cast<double>(n));

    st.years_to_dominance = summarize(std::move(ytd));
    st.carriers_per_dominant_genotype = summarize(std::move(carriers));
    st.genotypes_per_dominant_product = summarize(std::move(per_product));
    return st;
}

} // namespace phylo
