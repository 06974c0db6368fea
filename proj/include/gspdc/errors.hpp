#pragma once

#include <stdexcept>
#include <string>

namespace gspdc {

/// Invalid parameters or an inconsistent run configuration (CLI exit code 2).
class config_error : public std::invalid_argument {
public:
  explicit config_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Failure while reading or writing files (CLI exit code 3).
class io_error : public std::runtime_error {
public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Analysis failure, e.g. negative probability mass beyond tolerance
/// or a non-invertible correction channel (CLI exit code 4).
class analysis_error : public std::runtime_error {
public:
  explicit analysis_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gspdc
