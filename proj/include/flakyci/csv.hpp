#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace flakyci::csv {

using row = std::vector<std::string>;

/// Reads RFC 4180 records (quoted fields may contain commas, quotes and
/// newlines). Returns false at end of input. Throws input_error on an
/// unterminated quoted field.
bool read_row(std::istream& in, row& out);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const row& fields);

}  // namespace flakyci::csv
