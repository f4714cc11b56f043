#pragma once

#include <stdexcept>
#include <string>

namespace centaur {

// Base for all engine failures. Subclasses name the failure class; the CLI
// maps them onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ParadigmError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class RenderError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class IntegrityError : public Error {
public:
    using Error::Error;
};

// Numerical failure inside the optimizer (non-finite objective, etc.).
class OptimizerError : public Error {
public:
    using Error::Error;
};

} // namespace centaur
