#pragma once

#include <string>
#include <vector>

namespace ltr {

// Writes via a temp file in the same directory, then renames into place.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

void append_line(const std::string& path, const std::string& line);

}  // namespace ltr
