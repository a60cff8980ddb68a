#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sdhnn {

/// Shortest representation that round-trips a double.
std::string format_real(double v);

/// Joins already formatted fields with commas and a trailing newline.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Splits one CSV line (no quoting support; the formats here never need it).
std::vector<std::string> split_csv_line(std::string_view line);

double parse_real(std::string_view field);

} // namespace sdhnn
