#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rationale::csv {

/// One parsed record together with the physical line it started on.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Streaming RFC 4180 reader: quoted fields may contain separators, doubled
/// quotes and line breaks. Throws ParseError on an unterminated quote.
class Reader {
 public:
  Reader(std::istream& in, std::string source_name);

  std::optional<Row> next();

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_ = 0;
};

/// Reads the header row and checks it equals `expected` exactly.
void expect_header(Reader& reader, const std::vector<std::string>& expected,
                   const std::string& source_name);

std::string quote(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace rationale::csv
