#pragma once

#include <stdexcept>
#include <string>

namespace reluhead {

/// Base of every error raised by the library. `kind()` names the failure
/// class so callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    Shape,
    State,
    Config,
    Input,
    Numeric,
    Format,
    Consistency,
    Parse,
    Io,
    Version,
    Corrupt,
    Network,
    Integrity,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

#define RELUHEAD_DEFINE_ERROR(Name)                                   \
  class Name##Error : public Error {                                  \
   public:                                                            \
    explicit Name##Error(const std::string& what) : Error(Kind::Name, what) {} \
  };

RELUHEAD_DEFINE_ERROR(Shape)
RELUHEAD_DEFINE_ERROR(State)
RELUHEAD_DEFINE_ERROR(Config)
RELUHEAD_DEFINE_ERROR(Input)
RELUHEAD_DEFINE_ERROR(Numeric)
RELUHEAD_DEFINE_ERROR(Format)
RELUHEAD_DEFINE_ERROR(Consistency)
RELUHEAD_DEFINE_ERROR(Parse)
RELUHEAD_DEFINE_ERROR(Io)
RELUHEAD_DEFINE_ERROR(Version)
RELUHEAD_DEFINE_ERROR(Corrupt)
RELUHEAD_DEFINE_ERROR(Network)
RELUHEAD_DEFINE_ERROR(Integrity)

#undef RELUHEAD_DEFINE_ERROR

}  // namespace reluhead
