#pragma once

#include <stdexcept>
#include <string>

namespace coopsteer {

// Base class for everything thrown by this library. The CLI maps each
// subclass to a distinct exit code (see tools/coopsteer.cpp).
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid shapes, incompatible layer wiring, bad flag values.
struct config_error : error {
  using error::error;
};

// Malformed input files (CSV header/fields, checkpoint magic).
struct format_error : error {
  using error::error;
};

// Referenced data could not be read (missing or undecodable images).
struct ingestion_error : error {
  using error::error;
};

// NaN/Inf encountered where finite values are required.
struct numeric_error : error {
  using error::error;
};

// API misuse: backward on a non-scalar, evaluate on no windows, ...
struct usage_error : error {
  using error::error;
};

// Filesystem failures on output paths.
struct io_error : error {
  using error::error;
};

}  // namespace coopsteer
