#pragma once

#include <stdexcept>
#include <string>

namespace dqjl {

// Caller broke an operation precondition (bad shape, bad argument, call order).
struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};

// A configuration value is outside its documented range.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A request cannot be satisfied at the configured sizes (too many vehicles,
// infeasible placement density).
struct capacity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file content; the message carries the offending line number.
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File carries an unsupported format version.
struct version_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem read/write failure.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dqjl
