#pragma once

#include <string>

#include "jtens/errors.hpp"

// Small shared file utilities: crash-safe text output (write to a temp file,
// then rename into place) and whole-file reads, plus the double formatter
// used by every text artifact (17 significant digits round-trip exactly).

namespace jtens {

void write_text_atomic(const std::string& path, const std::string& text);

std::string read_text_file(const std::string& path);

std::string format_g17(double value);

}  // namespace jtens
