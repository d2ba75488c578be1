#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gbmflow {

/// Shortest-safe round-trip text for a double: 17 significant digits, "nan"/"inf" for non-finite.
std::string format_double(double v);

/// Column-oriented CSV with a header row, comma separators and LF line endings.
class CsvTable {
public:
    void add_column(std::string name, std::vector<double> values);
    std::size_t rows() const noexcept { return columns_.empty() ? 0 : columns_.front().size(); }
    const std::vector<std::string>& header() const noexcept { return header_; }
    std::string render() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> columns_;
};

/// Writes through a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// "runs/a.csv" + ".manifest.json" -> "runs/a.manifest.json".
std::filesystem::path sibling_path(const std::filesystem::path& out, const std::string& suffix);

}  // namespace gbmflow
