#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stmeta {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model parameters or a query outside the model's domain.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Integration or root finding could not meet its tolerance or budget.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A measurement found nothing to measure (e.g. no threshold crossing).
class MeasurementError : public Error {
public:
    using Error::Error;
};

struct TimeInterval {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::string reason;
};

/// A requested output or approach violates the amplifier range or the input rate cap.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, std::vector<TimeInterval> intervals = {})
        : Error(what), intervals_(std::move(intervals)) {}

    [[nodiscard]] const std::vector<TimeInterval>& intervals() const { return intervals_; }

private:
    std::vector<TimeInterval> intervals_;
};

}  // namespace stmeta
