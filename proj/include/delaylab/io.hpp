#pragma once

#include <functional>
#include <iosfwd>
#include <string>

namespace delaylab {

/// Writes through a temporary file and renames into place, so failures never
/// leave a partial output behind.
void write_file_atomic(const std::string& path,
                       const std::function<void(std::ostream&)>& writer);

std::string read_file(const std::string& path);

/// Shortest exact decimal form of a double for CSV output (round-trips).
std::string format_double(double value);

}  // namespace delaylab
