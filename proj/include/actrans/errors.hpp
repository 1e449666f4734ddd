#pragma once

#include <stdexcept>
#include <string>

namespace actrans {

// Malformed file contents (bad magic, bad header fields).
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Header promises more payload than the file contains.
struct truncation_error : format_error {
  using format_error::format_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation applied to an object in the wrong state (e.g. normalizing twice).
struct state_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dimension_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inputs are structurally valid but unusable (empty mask, too few slices, ...).
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace actrans
