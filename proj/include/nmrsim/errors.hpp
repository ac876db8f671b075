#pragma once

#include <stdexcept>
#include <string>

namespace nmrsim {

// Error taxonomy mirrors the CLI exit codes: config 2, numeric 3, dimension 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

} // namespace nmrsim
