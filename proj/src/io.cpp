#include "gbmflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <system_error>
#include <unistd.h>

#include "gbmflow/model.hpp"

namespace gbmflow {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvTable::add_column(std::string name, std::vector<double> values) {
    if (!columns_.empty() && values.size() != columns_.front().size())
        throw ParameterError("CSV column '" + name + "' has a different length");
    header_.push_back(std::move(name));
    columns_.push_back(std::move(values));
}

std::string CsvTable::render() const {
    std::string out;
    for (std::size_t j = 0; j < header_.size(); ++j) {
        if (j) out += ',';
        out += header_[j];
    }
    out += '\n';
    for (std::size_t i = 0; i < rows(); ++i) {
        for (std::size_t j = 0; j < columns_.size(); ++j) {
            if (j) out += ',';
            out += format_double(columns_[j][i]);
        }
        out += '\n';
    }
    return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    if (!std::filesystem::exists(dir)) std::filesystem::create_directories(dir);
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f << contents;
        f.flush();
        if (!f) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error("cannot move output into place at " + path.string() + ": " + ec.message());
    }
}

std::filesystem::path sibling_path(const std::filesystem::path& out, const std::string& suffix) {
    auto p = out;
    p.replace_extension();
    p += suffix;
    return p;
}

}  // namespace gbmflow
