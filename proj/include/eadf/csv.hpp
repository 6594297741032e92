#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace eadf::csv {

struct Row {
    std::size_t line = 0;  // 1-based line where the record starts
    std::vector<std::string> fields;
};

/// Parses RFC-4180 text: comma separated, optional double-quoted fields with
/// "" escapes and embedded line breaks, CRLF or LF record ends. Blank lines
/// are skipped. Throws ParseError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes a field when it contains a comma, quote or line break.
std::string escape(std::string_view field);

}  // namespace eadf::csv
