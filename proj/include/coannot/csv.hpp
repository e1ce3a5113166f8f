#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace coannot {

/// Quotes a field when it contains a delimiter, quote or newline.
std::string csv_field(std::string_view value);

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line, char delimiter = ',');

std::string format_fixed(double value, int precision);

}  // namespace coannot
