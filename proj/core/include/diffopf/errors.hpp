#pragma once

#include <stdexcept>
#include <string>

namespace diffopf {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file (carries file/field context in the message).
struct ParseError : Error {
    using Error::Error;
};

/// A domain invariant does not hold; the message names the invariant
/// and the offending element.
struct ValidationError : Error {
    using Error::Error;
};

/// Bad run configuration (ranges, missing options, inconsistent params).
struct ConfigError : Error {
    using Error::Error;
};

/// Non-finite values or a numerical routine that cannot proceed.
struct NumericError : Error {
    using Error::Error;
};

/// A required input artifact (checkpoint, dataset, case file) is absent.
struct MissingArtifactError : Error {
    using Error::Error;
};

}  // namespace diffopf
