#pragma once

// Deterministic text output helpers shared by the CLI and the spectrum plot.

#include <string>
#include <vector>

namespace ragmi {

/// Shortest "%.*g" rendering at `precision` significant digits; -0 prints as
/// 0 and non-finite values as nan/inf/-inf.
std::string format_number(double v, int precision = 10);

/// Fixed-point rendering with `decimals` digits after the point.
std::string format_fixed(double v, int decimals);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);
std::string csv_row(const std::vector<std::string>& fields);

std::string xml_escape(const std::string& s);

/// Writes `content` to `path`, creating parent directories. Throws Error.
void write_file(const std::string& path, const std::string& content);

}  // namespace ragmi
