#include "molcomm/results.hpp"

#include "molcomm/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace molcomm {

using Json = nlohmann::ordered_json;

void ResultTable::add_column(std::string name, std::string unit) {
    columns.push_back(std::move(name));
    units.push_back(std::move(unit));
}

void ResultTable::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
        throw UsageError("row has " + std::to_string(row.size()) + " cells, table has " +
                         std::to_string(columns.size()) + " columns");
    }
    rows.push_back(std::move(row));
}

OutputFormat parse_format(std::string_view name) {
    if (name == "csv") return OutputFormat::Csv;
    if (name == "json") return OutputFormat::Json;
    throw ConfigError("unknown output format '" + std::string(name) + "' (expected csv or json)");
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string cell_text(const Cell& c) {
    struct Visitor {
        std::string operator()(const Absent&) const { return ""; }
        std::string operator()(const Unbounded&) const { return std::string(kUnboundedToken); }
        std::string operator()(double v) const { return format_number(v); }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(const std::string& s) const { return csv_field(s); }
    };
    return std::visit(Visitor{}, c);
}

void write_line(std::ostringstream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << fields[i];
    }
    os << '\n';
}

Json cell_json(const Cell& c) {
    struct Visitor {
        Json operator()(const Absent&) const { return nullptr; }
        Json operator()(const Unbounded&) const { return std::string(kUnboundedToken); }
        Json operator()(double v) const {
            // JSON has no infinities; keep them as tagged strings.
            if (!std::isfinite(v)) return Json{{"number", format_number(v)}};
            return v;
        }
        Json operator()(std::int64_t v) const { return v; }
        Json operator()(const std::string& s) const { return s; }
    };
    return std::visit(Visitor{}, c);
}

Cell cell_from_json(const Json& j) {
    if (j.is_null()) return Absent{};
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == kUnboundedToken) return Unbounded{};
        return s;
    }
    if (j.is_object() && j.contains("number")) {
        const auto s = j.at("number").get<std::string>();
        if (s == "nan") return std::nan("");
        if (s == "inf") return HUGE_VAL;
        if (s == "-inf") return -HUGE_VAL;
    }
    throw ConfigError("unsupported cell in results JSON: " + j.dump());
}

void write_text(const std::string& text, const std::filesystem::path& path) {
    if (path == "-") {
        std::cout << text;
        std::cout.flush();
        if (!std::cout) throw IoError("failed to write results to stdout");
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.close();
    if (!out) throw IoError("failed to write '" + path.string() + "'");
}

} // namespace

std::string to_csv(const ResultTable& table) {
    std::ostringstream os;
    for (const auto& [key, value] : table.metadata) os << "# " << key << ": " << value << '\n';
    std::vector<std::string> header, units;
    for (const auto& c : table.columns) header.push_back(csv_field(c));
    for (const auto& u : table.units) units.push_back(csv_field(u));
    write_line(os, header);
    write_line(os, units);
    for (const auto& row : table.rows) {
        std::vector<std::string> fields;
        fields.reserve(row.size());
        for (const auto& c : row) fields.push_back(cell_text(c));
        write_line(os, fields);
    }
    return os.str();
}

std::string to_json(const ResultTable& table) {
    Json doc;
    Json meta = Json::object();
    for (const auto& [key, value] : table.metadata) meta[key] = value;
    doc["metadata"] = meta;
    doc["columns"] = table.columns;
    doc["units"] = table.units;
    Json rows = Json::array();
    for (const auto& row : table.rows) {
        Json r = Json::array();
        for (const auto& c : row) r.push_back(cell_json(c));
        rows.push_back(std::move(r));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

ResultTable table_from_json(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed results JSON: ") + e.what());
    }
    ResultTable table;
    try {
        for (const auto& [key, value] : doc.at("metadata").items()) {
            table.metadata.emplace_back(key, value.get<std::string>());
        }
        table.columns = doc.at("columns").get<std::vector<std::string>>();
        table.units = doc.at("units").get<std::vector<std::string>>();
        for (const auto& r : doc.at("rows")) {
            std::vector<Cell> row;
            for (const auto& c : r) row.push_back(cell_from_json(c));
            table.add_row(std::move(row));
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("results JSON has the wrong shape: ") + e.what());
    } catch (const UsageError& e) {
        throw ConfigError(e.what());
    }
    return table;
}

void emit_results(const ResultTable& table, OutputFormat format, const std::filesystem::path& path) {
    write_text(format == OutputFormat::Csv ? to_csv(table) : to_json(table), path);
}

ResultTable load_results_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("failed to read '" + path.string() + "'");
    return table_from_json(buf.str());
}

} // namespace molcomm
