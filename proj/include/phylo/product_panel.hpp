#pragma once
// Product records, the genotype vocabulary and binary chromosome encoding.
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace phylo {

struct ProductRecord {
    std::string id;
    std::string name;
    int year = 0;
    std::set<std::string> attributes; // third-level attributes, trimmed, non-empty
};

enum class PanelFormat { Csv, Jsonl };

PanelFormat panel_format_from_path(const std::filesystem::path& path);

// Loads and validates a product file. Records come back sorted by (year, id).
// Parse failures raise FormatError with the 1-based line; duplicate ids and
// empty attribute sets raise ValidationError.
std::vector<ProductRecord> load_products(const std::filesystem::path& path, PanelFormat format);

// Validates and sorts an in-memory record list under the same rules as load_products.
std::vector<ProductRecord> normalize_products(std::vector<ProductRecord> records);

// Rejects records whose year falls outside [first_year, last_year].
void check_year_range(const std::vector<ProductRecord>& records, int first_year, int last_year);

void save_products(const std::filesystem::path& path, const std::vector<ProductRecord>& records,
                   PanelFormat format);

// Lexicographically ordered bijection attribute -> column.
class GenotypeVocabulary {
public:
    GenotypeVocabulary() = default;
    explicit GenotypeVocabulary(std::vector<std::string> sorted_unique);

    std::size_t size() const { return attributes_.size(); }
    const std::string& attribute(std::size_t index) const { return attributes_.at(index); }
    const std::vector<std::string>& attributes() const { return attributes_; }
    // -1 when absent.
    std::int64_t index_of(const std::string& attribute) const;
    // SHA-256 over the newline-joined attribute list.
    std::string digest() const;

private:
    std::vector<std::string> attributes_;
    std::map<std::string, std::uint32_t> index_;
};

GenotypeVocabulary build_vocabulary(const std::vector<ProductRecord>& records);

// N x n binary matrix, rows in (year, id) order, stored as sorted column lists (CSR).
class ChromosomeMatrix {
public:
    ChromosomeMatrix() = default;
    ChromosomeMatrix(std::vector<std::string> product_ids, std::vector<int> years,
                     std::vector<std::size_t> row_offsets, std::vector<std::uint32_t> columns,
                     std::size_t genotype_count);

    std::size_t rows() const { return years_.size(); }
    std::size_t cols() const { return genotype_count_; }
    std::size_t nonzeros() const { return columns_.size(); }

    int year(std::size_t row) const { return years_[row]; }
    const std::vector<int>& years() const { return years_; }
    const std::string& product_id(std::size_t row) const { return product_ids_[row]; }
    const std::vector<std::string>& product_ids() const { return product_ids_; }

    // Sorted genotype columns set to 1 in this row.
    struct RowView {
        const std::uint32_t* first;
        const std::uint32_t* last;
        const std::uint32_t* begin() const { return first; }
        const std::uint32_t* end() const { return last; }
        std::size_t size() const { return static_cast<std::size_t>(last - first); }
    };
    RowView row(std::size_t r) const {
        return {columns_.data() + row_offsets_[r], columns_.data() + row_offsets_[r + 1]};
    }
    bool at(std::size_t r, std::uint32_t col) const;

    // Distinct years in ascending order.
    std::vector<int> distinct_years() const;

    // Raw CSR arrays, for hashing and bulk math.
    const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
    const std::vector<std::uint32_t>& columns() const { return columns_; }

private:
    std::vector<std::string> product_ids_;
    std::vector<int> years_;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<std::uint32_t> columns_;
    std::size_t genotype_count_ = 0;
};

// records must already be in (year, id) order (as returned by load_products).
ChromosomeMatrix encode_chromosomes(const std::vector<ProductRecord>& records,
                                    const GenotypeVocabulary& vocab);

// Inverse of encode for one row.
std::set<std::string> decode_chromosome(const ChromosomeMatrix& matrix, std::size_t row,
                                        const GenotypeVocabulary& vocab);

} // namespace phylo
