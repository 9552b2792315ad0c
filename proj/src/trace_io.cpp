#include "opi/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "opi/errors.hpp"

namespace opi {
namespace {

constexpr const char* kColumns =
    "step,proportion,lower,upper,raw_lower,raw_upper,y,winkler,reward,crossed,epsilon,warmup";
constexpr std::size_t kColumnCount = 12;

double parse_field(const std::string& text, std::size_t line) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("bad numeric field '" + text + "'", line);
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_trace(std::ostream& out, const Trace& trace, const TraceHeader& header) {
  for (const auto& [key, value] : header) out << "# " << key << " = " << value << '\n';
  out << kColumns << '\n';
  for (const auto& r : trace) {
    out << r.step << ',' << format_double(r.proportion) << ',' << format_double(r.lower) << ','
        << format_double(r.upper) << ',' << format_double(r.raw_lower) << ',' << format_double(r.raw_upper) << ','
        << format_double(r.y) << ',' << format_double(r.winkler) << ',' << format_double(r.reward) << ','
        << (r.crossed ? 1 : 0) << ',' << format_double(r.epsilon) << ',' << (r.warmup ? 1 : 0) << '\n';
  }
}

void write_trace(const std::filesystem::path& path, const Trace& trace, const TraceHeader& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trace " + path.string());
  write_trace(out, trace, header);
}

LoadedTrace read_trace(std::istream& in) {
  LoadedTrace loaded;
  std::string line;
  std::size_t line_no = 0;
  bool have_columns = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos && line.size() > 2) {
        loaded.header.emplace_back(line.substr(2, eq - 2), line.substr(eq + 3));
      }
      continue;
    }
    if (!have_columns) {
      if (line != kColumns) throw ParseError("unexpected trace column header", line_no);
      have_columns = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != kColumnCount) throw ParseError("expected 12 trace columns", line_no);
    StepRecord r;
    r.step = static_cast<std::size_t>(parse_field(fields[0], line_no));
    r.proportion = parse_field(fields[1], line_no);
    r.lower = parse_field(fields[2], line_no);
    r.upper = parse_field(fields[3], line_no);
    r.raw_lower = parse_field(fields[4], line_no);
    r.raw_upper = parse_field(fields[5], line_no);
    r.y = parse_field(fields[6], line_no);
    r.winkler = parse_field(fields[7], line_no);
    r.reward = parse_field(fields[8], line_no);
    r.crossed = parse_field(fields[9], line_no) != 0.0;
    r.epsilon = parse_field(fields[10], line_no);
    r.warmup = parse_field(fields[11], line_no) != 0.0;
    loaded.records.push_back(r);
  }
  if (!have_columns) throw ParseError("trace has no column header", line_no);
  return loaded;
}

LoadedTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open trace " + path.string());
  return read_trace(in);
}

}  // namespace opi
