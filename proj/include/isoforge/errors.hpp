#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace isoforge {

// Root of every error the library throws. Hypervisor-interface failures are
// never thrown; they are status codes in CallRecord.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpec : public Error {
 public:
  explicit InvalidSpec(const std::string& what) : Error("invalid system spec: " + what) {}
};

class UnknownDefect : public Error {
 public:
  explicit UnknownDefect(const std::string& name) : Error("unknown defect '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class SpecFrozen : public Error {
 public:
  SpecFrozen() : Error("defects are fixed at boot; the running system cannot be re-seeded") {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& reason)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + reason),
        line_(line),
        column_(column),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string reason_;
};

class PlanTargetsRegularPartition : public Error {
 public:
  explicit PlanTargetsRegularPartition(const std::string& partition)
      : Error("fault plans may only target test partitions, got '" + partition + "'") {}
};

class UnknownProfile : public Error {
 public:
  explicit UnknownProfile(const std::string& name) : Error("unknown workload profile '" + name + "'") {}
};

class SpecHasDefects : public Error {
 public:
  SpecHasDefects() : Error("baseline capture requires a defect-free spec") {}
};

class OutOfOrderEvent : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class UnknownSfr : public Error {
 public:
  explicit UnknownSfr(const std::string& ref) : Error("unknown SFR '" + ref + "'") {}
};

class UnknownSar : public Error {
 public:
  explicit UnknownSar(const std::string& ref) : Error("unknown SAR '" + ref + "'") {}
};

class UnknownStandard : public Error {
 public:
  explicit UnknownStandard(const std::string& what) : Error("unknown standard reference: " + what) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& reason)
      : Error(path + ": " + reason), path_(path), reason_(reason) {}

  const std::string& path() const noexcept { return path_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

}  // namespace isoforge
