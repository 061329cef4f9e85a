#pragma once

#include <stdexcept>
#include <string>

namespace hullgan {

/// Base of every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateParams : Error { using Error::Error; };
struct DegenerateHull : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct NumericalError : Error { using Error::Error; };
struct QuadratureNonConverged : Error { using Error::Error; };
struct DegenerateStats : Error { using Error::Error; };
struct DivisionByZero : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct EmptyEvaluation : Error { using Error::Error; };
struct IOError : Error { using Error::Error; };

} // namespace hullgan
