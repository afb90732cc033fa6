#pragma once

#include <string_view>

namespace benchsynth {

// Text assets compiled in from assets/ (prompt templates, topic bank).
// Throws std::out_of_range for an unknown name.
std::string_view asset(std::string_view name);

}  // namespace benchsynth
