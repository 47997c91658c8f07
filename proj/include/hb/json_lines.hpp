#pragma once

// Maps JSON pointers ("/measure/atoms/0/mass") to the 1-based source line
// where that value starts, so schema errors can name a line.

#include <cstddef>
#include <map>
#include <string>

namespace hb::json_lines {

/// Best effort: text that fails to scan yields whatever was mapped so far.
std::map<std::string, int> pointer_lines(const std::string& text);

/// 1-based line containing byte offset `byte` (clamped to the text).
int line_of_offset(const std::string& text, std::size_t byte);

}  // namespace hb::json_lines
