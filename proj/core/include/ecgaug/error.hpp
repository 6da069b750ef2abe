#pragma once

#include <stdexcept>
#include <string>

namespace ecgaug {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension/geometry violations in tensor ops and network construction.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Malformed input files (WFDB headers, signal/annotation bytes, CSV, config).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Non-finite losses/gradients and similar mid-training aborts.
class TrainError : public Error {
public:
    explicit TrainError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace ecgaug
