#pragma once

#include <stdexcept>
#include <string>

namespace denoise_ad {

// Error taxonomy; the CLI maps these onto distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or usage (bad flags, out-of-range parameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Matrix / model shape mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Bad or insufficient input data.
class DataError : public Error {
public:
    using Error::Error;
};

// CSV ingestion failure; message carries the offending line number.
class CsvError : public DataError {
public:
    using DataError::DataError;
};

// Evaluation precondition failure (missing labels, no positives, ...).
class EvalError : public DataError {
public:
    using DataError::DataError;
};

// Model file (de)serialization failure; message names the bad field.
class ModelIoError : public DataError {
public:
    using DataError::DataError;
};

// Non-finite loss during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Finite-difference oracle hit a non-finite evaluation.
class OracleError : public Error {
public:
    using Error::Error;
};

} // namespace denoise_ad
