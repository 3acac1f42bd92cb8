#pragma once

// Minimal CSV tables. Numbers are written in shortest round-trip form, so
// reading a file back and writing it again reproduces it byte for byte.
// Text cells may not contain commas, quotes or line breaks.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "inak/error.hpp"
#include "inak/ode.hpp"

namespace inak {

using CsvCell = std::variant<double, std::string>;

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<CsvCell>> rows;

    void add_row(std::vector<CsvCell> row)
    {
        if (row.size() != header.size())
            throw Error(ErrorKind::ConfigInvalid, "CSV row has " + std::to_string(row.size()) + " cells, header has " +
                                                      std::to_string(header.size()));
        rows.push_back(std::move(row));
    }
};

[[nodiscard]] inline std::string format_number(double x)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

/// Replaces characters that cannot appear in a text cell.
[[nodiscard]] inline std::string csv_safe(std::string s)
{
    for (char& ch : s) {
        if (ch == ',') ch = ';';
        else if (ch == '"') ch = '\'';
        else if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

[[nodiscard]] inline std::string to_csv(const CsvTable& t)
{
    std::string out;
    auto text = [&](const std::string& s) {
        if (s.find_first_of(",\"\n\r") != std::string::npos)
            throw Error(ErrorKind::ConfigInvalid, "CSV text cell contains a delimiter: " + s);
        out += s;
    };
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (i) out += ',';
        text(t.header[i]);
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            if (const auto* d = std::get_if<double>(&row[i])) out += format_number(*d);
            else text(std::get<std::string>(row[i]));
        }
        out += '\n';
    }
    return out;
}

namespace detail {

inline CsvCell parse_cell(std::string_view s)
{
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (!s.empty() && res.ec == std::errc{} && res.ptr == s.data() + s.size() && format_number(x) == s) return x;
    return std::string(s);
}

inline std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) return out;
        start = comma + 1;
    }
}

} // namespace detail

/// Cells that print back identically as numbers are read as numbers; all
/// others stay text.
[[nodiscard]] inline CsvTable parse_csv(std::string_view text)
{
    CsvTable t;
    bool first = true;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        const auto cells = detail::split(line);
        if (first) {
            for (const auto c : cells) t.header.emplace_back(c);
            first = false;
            continue;
        }
        std::vector<CsvCell> row;
        for (const auto c : cells) row.push_back(detail::parse_cell(c));
        t.add_row(std::move(row));
    }
    return t;
}

inline void write_text_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ConfigInvalid, "cannot write '" + path + "'");
    out << content;
    if (!out) throw Error(ErrorKind::ConfigInvalid, "write to '" + path + "' failed");
}

[[nodiscard]] inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// One row per stored sample, columns t followed by the state names.
template <int N>
[[nodiscard]] CsvTable trajectory_table(const Trajectory<N>& tr, const std::vector<std::string>& names)
{
    CsvTable t;
    t.header.push_back("t");
    t.header.insert(t.header.end(), names.begin(), names.end());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        std::vector<CsvCell> row{tr.times[i]};
        for (int k = 0; k < N; ++k) row.emplace_back(tr.states[i][k]);
        t.add_row(std::move(row));
    }
    return t;
}

template <int N>
[[nodiscard]] CsvTable events_table(const Trajectory<N>& tr, const std::vector<std::string>& names)
{
    CsvTable t;
    t.header = {"t", "label"};
    t.header.insert(t.header.end(), names.begin(), names.end());
    for (const auto& e : tr.events) {
        std::vector<CsvCell> row{e.t, e.label};
        for (int k = 0; k < N; ++k) row.emplace_back(e.state[k]);
        t.add_row(std::move(row));
    }
    return t;
}

} // namespace inak
