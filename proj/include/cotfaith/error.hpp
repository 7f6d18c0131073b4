#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cotfaith {

// Every fault raised by the library derives from Error. The CLI maps the
// class to an exit code: UsageError -> 1, DataFault family -> 2,
// TransportFault -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset records, invalid manifests, bad CSV input.
class DataFault : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public DataFault {
 public:
  using DataFault::DataFault;
};

class ConditionUnsatisfiable : public DataFault {
 public:
  using DataFault::DataFault;
};

class AmbiguityError : public DataFault {
 public:
  using DataFault::DataFault;
};

/// A metric whose effective denominator is empty.
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

class DegenerateNormalizer : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

/// Retries exhausted against an endpoint.
class TransportFault : public Error {
 public:
  TransportFault(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// Non-retryable 4xx response.
class ConfigFault : public Error {
 public:
  ConfigFault(const std::string& what, int status)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// Response body that does not follow the completion schema.
class ProtocolFault : public Error {
 public:
  ProtocolFault(const std::string& field, const std::string& what)
      : Error("protocol fault at '" + field + "': " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ScriptedGap : public Error {
 public:
  using Error::Error;
};

/// Completion result that cannot be read as an answer at all (distinct from
/// an abstention, which is a value).
class ExtractionFault : public Error {
 public:
  using Error::Error;
};

}  // namespace cotfaith
