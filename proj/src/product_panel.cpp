#include "phylo/product_panel.hpp"

#include "phylo/error.hpp"
#include "phylo/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace phylo {

namespace {

int parse_year(const std::string& text, const std::string& path, std::size_t line) {
    const std::string t = trim(text);
    int year = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), year);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        throw FormatError(path, line, "invalid year '" + t + "'");
    }
    return year;
}

void add_attribute(ProductRecord& rec, const std::string& raw) {
    std::string a = trim(raw);
    if (!a.empty()) rec.attributes.insert(std::move(a));
}

std::vector<ProductRecord> parse_csv(std::istream& in, const std::string& path) {
    std::vector<ProductRecord> out;
    std::string line;
    std::vector<std::string> fields;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        if (!parse_csv_line(line, fields)) throw FormatError(path, lineno, "unterminated quoted field");
        if (!header_seen) {
            std::vector<std::string> names;
            for (const auto& f : fields) names.push_back(trim(f));
            if (names != std::vector<std::string>{"id", "name", "year", "attributes"}) {
                throw FormatError(path, lineno, "expected header id,name,year,attributes");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 4) {
            throw FormatError(path, lineno,
                              "expected 4 fields, found " + std::to_string(fields.size()));
        }
        ProductRecord rec;
        rec.id = trim(fields[0]);
        if (rec.id.empty()) throw FormatError(path, lineno, "empty id");
        rec.name = trim(fields[1]);
        rec.year = parse_year(fields[2], path, lineno);
        for (const auto& a : split(fields[3], '|')) add_attribute(rec, a);
        out.push_back(std::move(rec));
    }
    if (!header_seen) throw FormatError(path, std::max<std::size_t>(lineno, 1), "missing header");
    return out;
}

std::vector<ProductRecord> parse_jsonl(std::istream& in, const std::string& path) {
    std::vector<ProductRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(path, lineno, e.what());
        }
        try {
            ProductRecord rec;
            const auto& id = j.at("id");
            rec.id = trim(id.is_string() ? id.get<std::string>() : id.dump());
            if (rec.id.empty()) throw FormatError(path, lineno, "empty id");
            rec.name = j.contains("name") && j["name"].is_string() ? trim(j["name"].get<std::string>()) : "";
            const auto& y = j.at("year");
            rec.year = y.is_string() ? parse_year(y.get<std::string>(), path, lineno) : y.get<int>();
            for (const auto& a : j.at("attributes")) add_attribute(rec, a.get<std::string>());
            out.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path, lineno, e.what());
        }
    }
    return out;
}

} // namespace

PanelFormat panel_format_from_path(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    return (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") ? PanelFormat::Jsonl : PanelFormat::Csv;
}

std::vector<ProductRecord> normalize_products(std::vector<ProductRecord> records) {
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) throw ValidationError("duplicate product id '" + r.id + "'");
        if (r.attributes.empty()) throw ValidationError("product '" + r.id + "' has no attributes");
    }
    std::sort(records.begin(), records.end(), [](const ProductRecord& a, const ProductRecord& b) {
        return a.year != b.year ? a.year < b.year : a.id < b.id;
    });
    return records;
}

std::vector<ProductRecord> load_products(const std::filesystem::path& path, PanelFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    auto records = format == PanelFormat::Csv ? parse_csv(in, path.string()) : parse_jsonl(in, path.string());
    return normalize_products(std::move(records));
}

void check_year_range(const std::vector<ProductRecord>& records, int first_year, int last_year) {
    for (const auto& r : records) {
        if (r.year < first_year || r.year > last_year) {
            throw ValidationError("product '" + r.id + "' year " + std::to_string(r.year) +
                                  " outside declared range " + std::to_string(first_year) + "-" +
                                  std::to_string(last_year));
        }
    }
}

void save_products(const std::filesystem::path& path, const std::vector<ProductRecord>& records,
                   PanelFormat format) {
    std::ostringstream out;
    if (format == PanelFormat::Csv) {
        out << "id,name,year,attributes\n";
        for (const auto& r : records) {
            std::string attrs;
            for (const auto& a : r.attributes) {
                if (!attrs.empty()) attrs.push_back('|');
                attrs += a;
            }
            out << csv_escape(r.id) << ',' << csv_escape(r.name) << ',' << r.year << ','
                << csv_escape(attrs) << '\n';
        }
    } else {
        for (const auto& r : records) {
            nlohmann::ordered_json j;
            j["id"] = r.id;
            j["name"] = r.name;
            j["year"] = r.year;
            j["attributes"] = std::vector<std::string>(r.attributes.begin(), r.attributes.end());
            out << j.dump() << '\n';
        }
    }
    write_file(path, out.str());
}

GenotypeVocabulary::GenotypeVocabulary(std::vector<std::string> sorted_unique)
    : attributes_(std::move(sorted_unique)) {
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
        if (i > 0 && !(attributes_[i - 1] < attributes_[i])) {
            throw ValidationError("vocabulary must be strictly sorted");
        }
        index_.emplace(attributes_[i], static_cast<std::uint32_t>(i));
    }
}

std::int64_t GenotypeVocabulary::index_of(const std::string& attribute) const {
    const auto it = index_.find(attribute);
    return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::string GenotypeVocabulary::digest() const {
    std::string joined;
    for (const auto& a : attributes_) {
        joined += a;
        joined.push_back('\n');
    }
    return sha256_hex(joined);
}

GenotypeVocabulary build_vocabulary(const std::vector<ProductRecord>& records) {
    if (records.empty()) throw ValidationError("cannot build a vocabulary from zero records");
    std::set<std::string> all;
    for (const auto& r : records) all.insert(r.attributes.begin(), r.attributes.end());
    return GenotypeVocabulary(std::vector<std::string>(all.begin(), all.end()));
}

ChromosomeMatrix::ChromosomeMatrix(std::vector<std::string> product_ids, std::vector<int> years,
                                   std::vector<std::size_t> row_offsets,
                                   std::vector<std::uint32_t> columns, std::size_t genotype_count)
    : product_ids_(std::move(product_ids)),
      years_(std::move(years)),
      row_offsets_(std::move(row_offsets)),
      columns_(std::move(columns)),
      genotype_count_(genotype_count) {
    if (product_ids_.size() != years_.size() || row_offsets_.size() != years_.size() + 1 ||
        row_offsets_.back() != columns_.size()) {
        throw ValidationError("inconsistent chromosome matrix arrays");
    }
}

bool ChromosomeMatrix::at(std::size_t r, std::uint32_t col) const {
    const auto view = row(r);
    return std::binary_search(view.begin(), view.end(), col);
}

std::vector<int> ChromosomeMatrix::distinct_years() const {
    std::vector<int> ys = years_;
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    return ys;
}

ChromosomeMatrix encode_chromosomes(const std::vector<ProductRecord>& records,
                                    const GenotypeVocabulary& vocab) {
    std::vector<std::string> ids;
    std::vector<int> years;
    std::vector<std::size_t> offsets{0};
    std::vector<std::uint32_t> cols;
    ids.reserve(records.size());
    years.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (i > 0) {
            const auto& p = records[i - 1];
            if (p.year > r.year || (p.year == r.year && !(p.id < r.id))) {
                throw ValidationError("records must be sorted by (year, id) and unique");
            }
        }
        // std::set iterates lexicographically, matching vocabulary order.
        for (const auto& a : r.attributes) {
            const auto idx = vocab.index_of(a);
            if (idx < 0) {
                throw ValidationError("unknown attribute '" + a + "' in product '" + r.id + "'");
            }
            cols.push_back(static_cast<std::uint32_t>(idx));
        }
        offsets.push_back(cols.size());
        ids.push_back(r.id);
        years.push_back(r.year);
    }
    return ChromosomeMatrix(std::move(ids), std::move(years), std::move(offsets), std::move(cols),
                            vocab.size());
}

std::set<std::string> decode_chromosome(const ChromosomeMatrix& matrix, std::size_t row,
                                        const GenotypeVocabulary& vocab) {
    std::set<std::string> out;
    for (auto c : matrix.row(row)) out.insert(vocab.attribute(c));
    return out;
}

} // namespace phylo
