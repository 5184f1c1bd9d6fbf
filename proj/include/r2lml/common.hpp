#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace r2lml {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Error hierarchy. Everything thrown by the library derives from Error so
// callers (the CLI in particular) can map failures to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

/// Raised when an objective value becomes NaN or infinite during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

class VersionError : public Error {
public:
    using Error::Error;
};

/// Invalid user-supplied configuration (hyperparameters, flags, fractions).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Derives an independent 64-bit seed for a named random sub-stream
/// (e.g. "init", "synth", "split", "restart-3") from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v);

} // namespace r2lml
