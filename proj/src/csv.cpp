#include "rationale/csv.hpp"

#include "rationale/error.hpp"

namespace rationale::csv {

Reader::Reader(std::istream& in, std::string source_name)
    : in_(in), source_(std::move(source_name)) {}

std::optional<Row> Reader::next() {
  std::string line;
  // Skip blank physical lines between records.
  do {
    if (!std::getline(in_, line)) return std::nullopt;
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  } while (line.empty());

  Row row;
  row.line = line_;
  std::string field;
  bool in_quotes = false;
  std::size_t i = 0;
  while (true) {
    if (i == line.size()) {
      if (!in_quotes) break;
      // Quoted field spans a line break.
      std::string more;
      if (!std::getline(in_, more)) {
        throw ParseError(source_, row.line, "unterminated quoted field");
      }
      ++line_;
      if (!more.empty() && more.back() == '\r') more.pop_back();
      field.push_back('\n');
      line = std::move(more);
      i = 0;
      continue;
    }
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  row.fields.push_back(std::move(field));
  return row;
}

void expect_header(Reader& reader, const std::vector<std::string>& expected,
                   const std::string& source_name) {
  auto header = reader.next();
  if (!header) throw ParseError(source_name, 1, "missing header row");
  if (header->fields != expected) {
    std::string want;
    for (const auto& f : expected) want += (want.empty() ? "" : ",") + f;
    std::string got;
    for (const auto& f : header->fields) got += (got.empty() ? "" : ",") + f;
    throw ParseError(source_name, header->line,
                     "header mismatch: expected '" + want + "', got '" + got + "'");
  }
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

}  // namespace rationale::csv
