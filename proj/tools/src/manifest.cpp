#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

#include "app.hpp"
#include "foda/error.hpp"
#include "foda/graph.hpp"
#include "foda/io.hpp"
#include "foda/params.hpp"

namespace foda::app {

std::string content_digest(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw Error("digest", "sha256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string file_digest(const fs::path& path) { return content_digest(read_text_file(path)); }

void write_manifest(const fs::path& dir, const std::string& command, const Pipeline& p,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    double seconds) {
  auto entries = [&](const std::vector<fs::path>& files) {
    json list = json::array();
    for (const auto& f : files) {
      list.push_back({{"path", fs::relative(f, p.out_dir).generic_string()}, {"sha256", file_digest(f)}});
    }
    return list;
  };
  json m = {
      {"command", command},
      {"config_hash", p.hash()},
      {"seed", p.seed},
      {"versions",
       {{"foda", kVersion}, {"graph_format", kGraphVersion}, {"checkpoint_format", kCheckpointVersion}}},
      {"inputs", entries(inputs)},
      {"outputs", entries(outputs)},
  };
  write_text_file(dir / "manifest.json", m.dump(2));
  json timing = {{"command", command}, {"wall_clock_seconds", seconds}};
  write_text_file(dir / "run_timing.json", timing.dump(2));
}

int exit_code_for(const std::string& code) {
  if (code == "not_found") return 2;
  if (code == "config") return 3;
  if (code == "diverged") return 4;
  return 1;
}

}  // namespace foda::app
