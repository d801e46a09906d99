#pragma once

#include <stdexcept>
#include <string>

namespace svie {

/// Thrown when a solver or factorization produces non-finite values.
/// The message carries the node index (or (t,s) index pair) where the
/// failure was detected.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by calibrate_constant when no finite constant dominates the ensemble.
class calibration_error : public std::runtime_error {
public:
  explicit calibration_error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown by density estimation when the sample cloud has no spread.
class degenerate_input : public std::runtime_error {
public:
  explicit degenerate_input(const std::string& what) : std::runtime_error(what) {}
};

} // namespace svie
