#pragma once

#include <string>

namespace sampa {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

/// Parses a full string as a double; returns false on any trailing garbage.
bool parse_double(const std::string& text, double& out);

}  // namespace sampa
