#include "foda/params.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "foda/error.hpp"
#include "foda/io.hpp"

namespace foda {

using nlohmann::json;

Param& ParamStore::add(const std::string& name, Matrix value) {
  if (contains(name)) throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
  Matrix grad(value.rows(), value.cols());
  auto [it, _] = params_.emplace(name, Param{std::move(value), std::move(grad)});
  return it->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw NotFound("ParamStore: no parameter '" + name + "'");
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw NotFound("ParamStore: no parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) std::fill(p.grad.data().begin(), p.grad.data().end(), 0.0);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::string serialize_checkpoint(const ParamStore& store) {
  json params = json::object();
  for (const auto& [name, p] : store) {
    json data = json::array();
    for (double x : p.value.data()) data.push_back(x);
    params[name] = {{"shape", {p.value.rows(), p.value.cols()}}, {"data", std::move(data)}};
  }
  json doc = {{"version", kCheckpointVersion}, {"params", std::move(params)}};
  return doc.dump() + "\n";
}

ParamStore parse_checkpoint(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("version")) throw LoadError("checkpoint: missing version");
  if (doc["version"] != kCheckpointVersion) {
    throw LoadError("checkpoint: unsupported version " + doc["version"].dump());
  }
  ParamStore store;
  try {
    for (const auto& [name, entry] : doc.at("params").items()) {
      const auto rows = entry.at("shape").at(0).get<std::size_t>();
      const auto cols = entry.at("shape").at(1).get<std::size_t>();
      auto data = entry.at("data").get<std::vector<double>>();
      if (data.size() != rows * cols) {
        throw LoadError("checkpoint: parameter '" + name + "' has wrong data length");
      }
      store.add(name, Matrix(rows, cols, std::move(data)));
    }
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint: bad structure: ") + e.what());
  }
  return store;
}

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  write_text_file(path, serialize_checkpoint(store));
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_text_file(path));
}

}  // namespace foda
