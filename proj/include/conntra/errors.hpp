#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace conntra {

enum class ErrorKind {
    invalid_argument,
    domain,
    format,
    io,
    training_diverged,
    not_positive_definite,
    capacity,
    invalid_state,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base of every error raised by the library. `kind()` is stable and is
/// what the CLI maps onto exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define CONNTRA_DEFINE_ERROR(Name, Kind)                                     \
    class Name : public Error {                                              \
    public:                                                                  \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
    };

CONNTRA_DEFINE_ERROR(InvalidArgument, invalid_argument)
CONNTRA_DEFINE_ERROR(DomainError, domain)
CONNTRA_DEFINE_ERROR(FormatError, format)
CONNTRA_DEFINE_ERROR(IoError, io)
CONNTRA_DEFINE_ERROR(TrainingDiverged, training_diverged)
CONNTRA_DEFINE_ERROR(NotPositiveDefinite, not_positive_definite)
CONNTRA_DEFINE_ERROR(CapacityError, capacity)
CONNTRA_DEFINE_ERROR(InvalidState, invalid_state)

#undef CONNTRA_DEFINE_ERROR

inline std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::domain: return "domain";
    case ErrorKind::format: return "format";
    case ErrorKind::io: return "io";
    case ErrorKind::training_diverged: return "training_diverged";
    case ErrorKind::not_positive_definite: return "not_positive_definite";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::invalid_state: return "invalid_state";
    }
    return "unknown";
}

} // namespace conntra
