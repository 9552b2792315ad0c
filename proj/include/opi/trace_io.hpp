#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "opi/step_record.hpp"

namespace opi {

/// Comment lines written as "# key = value" above the column header.
using TraceHeader = std::vector<std::pair<std::string, std::string>>;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Comma-separated, one record per line, header row naming every StepRecord field.
void write_trace(std::ostream& out, const Trace& trace, const TraceHeader& header = {});
void write_trace(const std::filesystem::path& path, const Trace& trace, const TraceHeader& header = {});

struct LoadedTrace {
  TraceHeader header;
  Trace records;
};

LoadedTrace read_trace(std::istream& in);
LoadedTrace read_trace(const std::filesystem::path& path);

}  // namespace opi
