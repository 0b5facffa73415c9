#pragma once

#include <string>

namespace viedl {

/// Shortest decimal text that reads back to exactly `v`.
std::string format_double(double v);

}  // namespace viedl
