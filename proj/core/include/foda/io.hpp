#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace foda {

/// Reads a whole file; throws NotFound if it does not exist.
std::string read_text_file(const std::filesystem::path& path);
/// Writes `text`, appending a trailing newline if missing. Parent
/// directories are created.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Emits a one-line warning on stderr unless FODA_QUIET is set.
void log_warning(std::string_view message);

}  // namespace foda
