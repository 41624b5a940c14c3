#pragma once

#include <stdexcept>
#include <string>

namespace foda {

/// Base class for every error raised by the library. `code()` is a stable
/// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define FODA_DEFINE_ERROR(Name, Tag)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(Tag, what) {}       \
  };

FODA_DEFINE_ERROR(ShapeError, "shape")
FODA_DEFINE_ERROR(NumericError, "numeric")
FODA_DEFINE_ERROR(ConfigError, "config")
FODA_DEFINE_ERROR(LoadError, "load")
FODA_DEFINE_ERROR(EmptyReport, "empty_report")
FODA_DEFINE_ERROR(EmptyCorpus, "empty_corpus")
FODA_DEFINE_ERROR(NotFound, "not_found")
FODA_DEFINE_ERROR(EmptyBatch, "empty_batch")
FODA_DEFINE_ERROR(DivergedError, "diverged")
FODA_DEFINE_ERROR(CheckError, "check")
FODA_DEFINE_ERROR(SingularDegree, "singular_degree")

#undef FODA_DEFINE_ERROR

}  // namespace foda
