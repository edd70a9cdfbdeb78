#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ppgauth {

/// Base of every domain error raised by the library. The message is prefixed
/// with the module that rejected the call, e.g. "signal: ...".
class Error : public std::runtime_error {
public:
    Error(const std::string& module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(module) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

#define PPGAUTH_DEFINE_ERROR(Name)                                    \
    class Name : public Error {                                       \
    public:                                                           \
        using Error::Error;                                           \
    }

PPGAUTH_DEFINE_ERROR(ParameterError);
PPGAUTH_DEFINE_ERROR(InsufficientDataError);
PPGAUTH_DEFINE_ERROR(DegenerateRangeError);
PPGAUTH_DEFINE_ERROR(ShapeError);
PPGAUTH_DEFINE_ERROR(ConfigError);
PPGAUTH_DEFINE_ERROR(TrainingError);
PPGAUTH_DEFINE_ERROR(ConflictError);
PPGAUTH_DEFINE_ERROR(NotEnrolledError);
PPGAUTH_DEFINE_ERROR(VersionError);

#undef PPGAUTH_DEFINE_ERROR

/// Raised when a persisted file cannot be decoded. Carries the byte offset at
/// which decoding stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& module, const std::string& what, std::uint64_t offset)
        : Error(module, what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace ppgauth
