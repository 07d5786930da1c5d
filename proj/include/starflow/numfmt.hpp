#pragma once

#include <string>
#include <string_view>

namespace starflow {

/// 17 significant digits; non-finite values become "inf", "-inf" or "nan".
std::string format_double(double v);

/// Inverse of format_double. Throws Error(kParseError) on malformed input.
double parse_double(std::string_view s);

}  // namespace starflow
