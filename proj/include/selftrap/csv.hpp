#pragma once

// Plot-ready CSV interchange: column-major tables of doubles with a single
// header row.  Values are written with 9 significant digits, LF line ends,
// no quoting (column names must not contain commas).

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace selftrap {

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // data[column][row]

    std::size_t n_rows() const { return data.empty() ? 0 : data[0].size(); }

    void validate() const {
        if (columns.size() != data.size())
            throw std::invalid_argument("csv: header and column counts differ");
        for (const auto& col : data)
            if (col.size() != n_rows())
                throw std::invalid_argument("csv: ragged columns");
        for (const auto& name : columns)
            if (name.empty() || name.find(',') != std::string::npos ||
                name.find('\n') != std::string::npos)
                throw std::invalid_argument("csv: bad column name '" + name + "'");
    }

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return data[i];
        throw std::out_of_range("csv: no column named '" + name + "'");
    }

    bool has_column(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }
};

inline void write_csv(const std::string& path, const CsvTable& table) {
    table.validate();
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f)
        throw std::runtime_error("csv: cannot open '" + path + "' for writing: " +
                                 std::strerror(errno));
    bool ok = true;
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        ok = ok && std::fprintf(f, "%s%s", c ? "," : "", table.columns[c].c_str()) >= 0;
    ok = ok && std::fputc('\n', f) != EOF;
    const std::size_t rows = table.n_rows();
    for (std::size_t r = 0; r < rows && ok; ++r) {
        for (std::size_t c = 0; c < table.data.size() && ok; ++c)
            ok = std::fprintf(f, "%s%.9g", c ? "," : "", table.data[c][r]) >= 0;
        ok = ok && std::fputc('\n', f) != EOF;
    }
    ok = std::fclose(f) == 0 && ok;
    if (!ok) throw std::runtime_error("csv: write to '" + path + "' failed");
}

inline CsvTable read_csv(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f)
        throw std::runtime_error("csv: cannot open '" + path + "': " + std::strerror(errno));

    CsvTable table;
    std::string line;
    int line_no = 0;
    char buffer[1 << 16];
    auto fail = [&](const std::string& what) {
        std::fclose(f);
        throw std::runtime_error("csv: " + path + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::fgets(buffer, sizeof buffer, f)) {
        ++line_no;
        line.assign(buffer);
        while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
        if (line.empty()) continue;

        std::vector<std::string> cells;
        std::size_t begin = 0;
        while (true) {
            const std::size_t comma = line.find(',', begin);
            cells.push_back(line.substr(begin, comma - begin));
            if (comma == std::string::npos) break;
            begin = comma + 1;
        }
        if (line_no == 1) {
            table.columns = cells;
            table.data.assign(cells.size(), {});
            continue;
        }
        if (cells.size() != table.columns.size()) fail("wrong number of fields");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(cells[c].c_str(), &end);
            if (end == cells[c].c_str() || *end != '\0' || errno == ERANGE)
                fail("cannot parse value '" + cells[c] + "'");
            table.data[c].push_back(v);
        }
    }
    std::fclose(f);
    if (line_no == 0) throw std::runtime_error("csv: " + path + " is empty");
    return table;
}

}  // namespace selftrap
