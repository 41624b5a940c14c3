#include "foda/io.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "foda/error.hpp"

namespace foda {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NotFound("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

void log_warning(std::string_view message) {
  if (std::getenv("FODA_QUIET") != nullptr) return;
  std::cerr << "warning: " << message << '\n';
}

}  // namespace foda
