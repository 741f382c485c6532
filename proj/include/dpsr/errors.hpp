#pragma once

#include <stdexcept>
#include <string>

namespace dpsr {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidWeightError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class EmptyStructureError : public Error { using Error::Error; };
class CapacityError : public Error { using Error::Error; };
class SlotError : public Error { using Error::Error; };
class StateError : public Error { using Error::Error; };
class SizeError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class TokenError : public Error { using Error::Error; };
class EpisodeFinishedError : public Error { using Error::Error; };
class RecycleFailedError : public Error { using Error::Error; };
class ReportError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

/// Configuration problem. `line()` is 0 when the error is not tied to a
/// specific line of a spec file.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace dpsr
