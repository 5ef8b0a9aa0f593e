#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ergodiff {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Undefined arithmetic during expression evaluation (1/0, 0^negative,
// negative base of a real power). Carries the path of the offending node
// from the expression root, e.g. "mul[1].div".
class DomainError : public Error {
public:
    DomainError(const std::string& what, std::string node_path)
        : Error(what + " at node " + node_path), node_path_(std::move(node_path)) {}
    const std::string& node_path() const noexcept { return node_path_; }

private:
    std::string node_path_;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// Linear solve or time-stepping failure in the PDE module.
class SolverError : public Error {
public:
    using Error::Error;
};

// A series or quadrature did not reach its certified tolerance.
class PrecisionError : public Error {
public:
    using Error::Error;
};

// Config file problems; message is anchored to the offending line.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite state produced while simulating a path.
class BlowupError : public Error {
public:
    BlowupError(const std::string& what, long path_index, double time, std::vector<double> state)
        : Error(what), path_index_(path_index), time_(time), state_(std::move(state)) {}
    long path_index() const noexcept { return path_index_; }
    double time() const noexcept { return time_; }
    const std::vector<double>& state() const noexcept { return state_; }

private:
    long path_index_;
    double time_;
    std::vector<double> state_;
};

} // namespace ergodiff
