#include "oclb/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "oclb/errors.hpp"

namespace oclb {

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw DataError("csv: missing column '" + std::string(name) + "'");
}

std::string to_csv(const CsvTable& table) {
    std::string out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i].find_first_of(",\n") != std::string::npos) {
                throw DataError("csv: field contains a separator: " + row[i]);
            }
            if (i > 0) out += ',';
            out += row[i];
        }
        out += '\n';
    };
    emit(table.header);
    for (const auto& r : table.rows) {
        if (r.size() != table.header.size()) {
            throw DataError("csv: row width does not match header");
        }
        emit(r);
    }
    return out;
}

CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t s = 0;
        for (;;) {
            const auto c = line.find(',', s);
            fields.emplace_back(line.substr(s, c == std::string_view::npos ? line.npos : c - s));
            if (c == std::string_view::npos) break;
            s = c + 1;
        }
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            if (fields.size() != t.header.size()) {
                throw DataError("csv: row width does not match header");
            }
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    write_text(path, to_csv(table));
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

std::string fmt4(std::optional<double> v) {
    if (!v) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    std::string s(buf);
    if (s == "-0.0000") s = "0.0000";
    return s;
}

}  // namespace oclb
