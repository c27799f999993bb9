#pragma once

#include <stdexcept>
#include <string>

namespace cinegen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raw text could not be segmented into scenes.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A pluggable client (LLM endpoint, embedder, upscaler) failed.
class ClientError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training-stage ordering or legality violation.
class StageError : public Error {
 public:
  using Error::Error;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

template <class E>
inline void check_as(bool cond, const std::string& msg) {
  if (!cond) throw E(msg);
}

}  // namespace cinegen
