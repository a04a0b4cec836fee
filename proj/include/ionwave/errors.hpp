#pragma once

#include <stdexcept>
#include <string>

namespace ionwave {

// Exit-code categories used by the CLI:
//   2 = configuration / input error
//   3 = numerical / convergence error
//   4 = physics-infeasible request (topology, bounds, escapes)
enum class ErrorKind { config = 2, numerical = 3, infeasible = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error(ErrorKind::config, m) {}
};

struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& m) : Error(ErrorKind::numerical, m) {}
};
struct FitError : Error {
    explicit FitError(const std::string& m) : Error(ErrorKind::numerical, m) {}
};
struct QuadratureError : Error {
    explicit QuadratureError(const std::string& m) : Error(ErrorKind::numerical, m) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct NoWellError : Error {
    explicit NoWellError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct SynthError : Error {
    explicit SynthError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct BoundError : Error {
    explicit BoundError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct TopologyError : Error {
    explicit TopologyError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct DurationError : Error {
    explicit DurationError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct EscapeError : Error {
    explicit EscapeError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct CollisionError : Error {
    explicit CollisionError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct InstabilityError : Error {
    explicit InstabilityError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};
struct RangeError : Error {
    explicit RangeError(const std::string& m) : Error(ErrorKind::infeasible, m) {}
};

} // namespace ionwave
