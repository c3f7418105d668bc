#pragma once

#include <stdexcept>
#include <string>

namespace rotquant {

// Every error carries the process exit code the CLI reports for it.
class Error : public std::runtime_error {
public:
    Error(const std::string& what, int exit_code) : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error(what, 2) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, 2) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what, 3) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what, 3) {}
};

class SizeError : public Error {
public:
    explicit SizeError(const std::string& what) : Error(what, 3) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what, 3) {}
};

class UnsupportedOrderError : public Error {
public:
    explicit UnsupportedOrderError(const std::string& what) : Error(what, 4) {}
};

class ConstructionError : public Error {
public:
    explicit ConstructionError(const std::string& what) : Error(what, 4) {}
};

class IntegrityError : public Error {
public:
    explicit IntegrityError(const std::string& what) : Error(what, 5) {}
};

}  // namespace rotquant
