#ifndef CAVFB_IO_SPECTRUM_FILE_HPP
#define CAVFB_IO_SPECTRUM_FILE_HPP

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cavfb/error.hpp"
#include "cavfb/spectrum.hpp"
#include "cavfb/units.hpp"

namespace cavfb::io
{
inline constexpr std::string_view tool_version = "0.1.0";

using Metadata = std::vector<std::pair<std::string, std::string>>;

// Plain numeric CSV: '#'-prefixed "key: value" comment lines, one header row,
// then rows of numbers. Spectrum files have freq_hz as the first column and
// optional sigma_<label> columns; series tables have n_c first.
struct Table
{
    Metadata metadata;
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }

    const std::string* meta(std::string_view key) const
    {
        for (const auto& [k, v] : metadata)
            if (k == key) return &v;
        return nullptr;
    }

    std::ptrdiff_t find(std::string_view name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
        return -1;
    }

    const std::vector<double>& column(std::string_view name) const
    {
        const auto i = find(name);
        if (i < 0) fail(ErrorCategory::io, "table has no column '" + std::string(name) + "'");
        return columns[static_cast<std::size_t>(i)];
    }
};

// Shortest representation that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, const std::string& where)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        fail(ErrorCategory::io, where + ": cannot parse '" + std::string(s) + "' as a number");
    return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto p = line.find(',', start);
        out.push_back(line.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

inline std::string write_table_text(const Table& t, bool with_metadata = true)
{
    for (const auto& c : t.columns)
        require(c.size() == t.rows(), "all table columns must have the same length");
    require(t.header.size() == t.columns.size(), "one header entry per column is required");
    std::string out;
    if (with_metadata)
        for (const auto& [k, v] : t.metadata) out += "# " + k + ": " + v + "\n";
    for (std::size_t j = 0; j < t.header.size(); ++j) out += (j ? "," : "") + t.header[j];
    out += "\n";
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.columns.size(); ++j) {
            if (j) out += ',';
            out += format_double(t.columns[j][i]);
        }
        out += '\n';
    }
    return out;
}

inline Table read_table_text(const std::string& text, const std::string& name = "<table>")
{
    Table t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        if (line.front() == '#') {
            std::string_view body(line);
            body.remove_prefix(1);
            if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
            const auto colon = body.find(": ");
            if (colon == std::string_view::npos) t.metadata.emplace_back(std::string(body), "");
            else t.metadata.emplace_back(std::string(body.substr(0, colon)), std::string(body.substr(colon + 2)));
            continue;
        }
        const auto cells = split_commas(line);
        if (!have_header) {
            for (auto c : cells) {
                while (!c.empty() && c.front() == ' ') c.remove_prefix(1);
                while (!c.empty() && c.back() == ' ') c.remove_suffix(1);
                if (c.empty()) fail(ErrorCategory::io, where + ": empty column name");
                t.header.emplace_back(c);
            }
            t.columns.resize(t.header.size());
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            fail(ErrorCategory::io, where + ": expected " + std::to_string(t.header.size()) + " values, found " +
                                        std::to_string(cells.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) t.columns[j].push_back(parse_double(cells[j], where));
    }
    if (!have_header) fail(ErrorCategory::io, name + ": no header row");
    return t;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write '" + path + "'");
    out << text;
    if (!out) fail(ErrorCategory::io, "write to '" + path + "' failed");
}

inline Table read_table(const std::string& path) { return read_table_text(read_file(path), path); }

inline Table spectrum_to_table(const Spectrum& s, Metadata metadata = {})
{
    s.validate();
    Table t;
    t.metadata = std::move(metadata);
    for (const auto& w : s.warnings) t.metadata.emplace_back("warning", w);
    t.header.push_back("freq_hz");
    std::vector<double> f;
    f.reserve(s.size());
    for (double w : s.omega) f.push_back(rad_to_hz(w));
    t.columns.push_back(std::move(f));
    for (const auto& c : s.channels) {
        t.header.push_back(c.label);
        t.columns.push_back(c.values);
        if (!c.sigma.empty()) {
            t.header.push_back("sigma_" + c.label);
            t.columns.push_back(c.sigma);
        }
    }
    return t;
}

// A sigma_<label> column attaches to <label> when that channel exists.
inline Spectrum table_to_spectrum(const Table& t, const std::string& name = "<spectrum>")
{
    if (t.header.empty() || t.header.front() != "freq_hz")
        fail(ErrorCategory::io, name + ": first column must be freq_hz");
    Spectrum s;
    for (double f : t.columns.front()) s.omega.push_back(hz_to_rad(f));
    for (std::size_t i = 1; i < s.omega.size(); ++i)
        if (!(t.columns.front()[i] > t.columns.front()[i - 1]))
            fail(ErrorCategory::io, name + ": freq_hz must be strictly increasing");
    for (std::size_t j = 1; j < t.header.size(); ++j) {
        const auto& h = t.header[j];
        if (h.rfind("sigma_", 0) == 0 && t.find(h.substr(6)) > 0) continue;
        s.add_channel(h, t.columns[j]);
    }
    for (std::size_t j = 1; j < t.header.size(); ++j) {
        const auto& h = t.header[j];
        if (h.rfind("sigma_", 0) != 0) continue;
        const std::string label = h.substr(6);
        if (t.find(label) <= 0) continue;
        for (auto& c : s.channels)
            if (c.label == label) c.sigma = t.columns[j];
    }
    for (const auto& [k, v] : t.metadata)
        if (k == "warning") s.warnings.push_back(v);
    return s;
}

inline Spectrum read_spectrum(const std::string& path) { return table_to_spectrum(read_table(path), path); }

}  // namespace cavfb::io

#endif  // CAVFB_IO_SPECTRUM_FILE_HPP
