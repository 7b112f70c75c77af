#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace molcomm {

/// A bound that does not exist (singular Fisher matrix).
struct Unbounded {
    bool operator==(const Unbounded&) const = default;
};

/// No value, e.g. an MSE with zero valid trials.
struct Absent {
    bool operator==(const Absent&) const = default;
};

using Cell = std::variant<Absent, Unbounded, double, std::int64_t, std::string>;

inline constexpr std::string_view kUnboundedToken = "unbounded";

struct ResultTable {
    std::vector<std::string> columns;
    /// SI unit per column, "1" for dimensionless and "" for labels.
    std::vector<std::string> units;
    std::vector<std::vector<Cell>> rows;
    /// Run metadata in insertion order.
    std::vector<std::pair<std::string, std::string>> metadata;

    void add_column(std::string name, std::string unit);
    /// Throws UsageError when the row width does not match the columns.
    void add_row(std::vector<Cell> row);

    bool operator==(const ResultTable&) const = default;
};

enum class OutputFormat { Csv, Json };

/// Throws ConfigError for anything but "csv" or "json".
OutputFormat parse_format(std::string_view name);

/// Shortest decimal text that reads back as the same double.
std::string format_number(double value);

/// '#'-prefixed metadata lines, a header row, a unit row, then the data.
/// Absent cells are empty fields.
std::string to_csv(const ResultTable& table);
std::string to_json(const ResultTable& table);
/// Throws ConfigError on malformed input.
ResultTable table_from_json(std::string_view text);

/// Writes the table, or to stdout for the path "-". Throws IoError naming the
/// path on failure.
void emit_results(const ResultTable& table, OutputFormat format, const std::filesystem::path& path);
ResultTable load_results_json(const std::filesystem::path& path);

} // namespace molcomm
