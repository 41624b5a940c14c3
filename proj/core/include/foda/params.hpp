#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "foda/matrix.hpp"

namespace foda {

struct Param {
  Matrix value;
  Matrix grad;
};

/// Named trainable parameters with paired gradient slots. Iteration order
/// is sorted by name.
class ParamStore {
 public:
  /// Adds a parameter; throws ConfigError if the name is taken.
  Param& add(const std::string& name, Matrix value);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  const Matrix& value(const std::string& name) const { return at(name).value; }

  void zero_grad();
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, Param> params_;
};

inline constexpr int kCheckpointVersion = 1;

/// Checkpoint JSON: {"version": 1, "params": {name: {"shape": [r, c], "data": [...]}}}.
/// Doubles are written in shortest round-trip form, so load(save(p)) is exact.
std::string serialize_checkpoint(const ParamStore& store);
ParamStore parse_checkpoint(const std::string& text);
void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace foda
