#include "portalchoice/csv.hpp"

#include "portalchoice/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>

namespace portalchoice::csv {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

Table read_table(std::istream& in, const std::string& what) {
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    if (first) throw data_error(what + ": empty file (missing header)");
    return t;
}

Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    return read_table(in, path);
}

std::size_t column_index(const Table& t, const std::string& name, const std::string& what) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end())
        throw data_error(what + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - t.header.begin());
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& what) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw data_error(what + ": bad number '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, const std::string& what) {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw data_error(what + ": bad integer '" + s + "'");
    return v;
}

} // namespace portalchoice::csv
