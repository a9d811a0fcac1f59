#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace portalchoice::csv {

// Minimal CSV splitting: comma separated, no quoting (none of the file
// formats here embed commas). Trailing \r is stripped.
std::vector<std::string> split_line(const std::string& line);

// Reads all non-empty lines from a stream; first line is the header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
Table read_table(std::istream& in, const std::string& what);
Table read_table_file(const std::string& path);

// Column lookup; throws data_error naming the missing column.
std::size_t column_index(const Table& t, const std::string& name,
                         const std::string& what);

// Shortest round-trip decimal rendering (std::to_chars). Used everywhere a
// double lands in an output file so reruns are byte-identical.
std::string format_double(double v);

double parse_double(const std::string& s, const std::string& what);
std::int64_t parse_int(const std::string& s, const std::string& what);

} // namespace portalchoice::csv
