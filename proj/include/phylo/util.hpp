#pragma once
// Small shared helpers: CSV fields, fixed-point formatting, digests, threading.
#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace phylo {

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// RFC 4180 style: fields may be double-quoted, "" escapes a quote.
// Returns false when a quoted field is left unterminated.
bool parse_csv_line(std::string_view line, std::vector<std::string>& fields);
std::string csv_escape(std::string_view field);

// printf("%.*f") without locale surprises.
std::string format_fixed(double value, int decimals);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
void ensure_directory(const std::filesystem::path& dir);

// Worker cap from PHYLO_FORECAST_THREADS (default: hardware concurrency, min 1).
unsigned worker_threads();

// Runs body(i) for i in [0, n) on up to worker_threads() threads.
// Callers write results into pre-sized slots so output order never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace phylo
