#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace oclb {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws DataError if missing.
    std::size_t column(std::string_view name) const;
};

/// Comma-separated, LF line endings, no quoting (fields must not contain ',' or '\n').
std::string to_csv(const CsvTable& table);
CsvTable parse_csv(std::string_view text);

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view text);

/// Fixed 4-decimal rendering; "NA" when absent. Negative zero prints as 0.0000.
std::string fmt4(std::optional<double> v);

}  // namespace oclb
