#pragma once

#include <stdexcept>
#include <string>

namespace raman {

// Invalid or inconsistent configuration (bad keys, unresolvable grids, ...).
class config_error : public std::runtime_error {
public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// File format / IO failures.
class io_error : public std::runtime_error {
public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Estimator cannot produce a meaningful value (dead pixel, unresolvable peak).
class estimator_error : public std::runtime_error {
public:
  explicit estimator_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace raman
