#pragma once

#include <stdexcept>
#include <string>

namespace tbe {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct HeadNotFoundError : Error {
    using Error::Error;
};

struct StaleTraceError : Error {
    using Error::Error;
};

struct InvalidUnitError : Error {
    using Error::Error;
};

struct AlreadyRestoredError : Error {
    using Error::Error;
};

struct MonotonicityError : Error {
    using Error::Error;
};

struct IncompleteFreezeStateError : Error {
    using Error::Error;
};

struct DegenerateDenominatorError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace tbe
