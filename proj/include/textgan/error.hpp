#pragma once

#include <stdexcept>
#include <string>

namespace textgan {

// Base for all library failures. Subclasses map to CLI exit codes:
// ConfigError -> 2, NumericError -> 3, everything else -> 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched tensor dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// Out-of-range index (token id, row, ...).
class IndexError : public Error {
public:
    using Error::Error;
};

// Malformed external file (corpus, embeddings, checkpoint).
class FormatError : public Error {
public:
    using Error::Error;
};

// Bad or inconsistent run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite value detected during computation.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace textgan
