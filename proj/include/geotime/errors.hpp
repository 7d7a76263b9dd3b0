#pragma once

#include <stdexcept>
#include <string>

namespace geotime {

// Root of the library's error hierarchy.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- normalization / evaluation errors -------------------------------------

class NormalizationFailed : public Error {
public:
    explicit NormalizationFailed(const std::string& what) : Error(what) {}
};

class BadGoldLabel : public Error {
public:
    explicit BadGoldLabel(const std::string& what) : Error(what) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

class LengthMismatch : public Error {
public:
    explicit LengthMismatch(const std::string& what) : Error(what) {}
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& what) : Error(what) {}
};

class UnknownCountry : public Error {
public:
    explicit UnknownCountry(const std::string& what) : Error(what) {}
};

// --- backend errors ---------------------------------------------------------

class BackendError : public Error {
public:
    explicit BackendError(const std::string& what) : Error(what) {}
};

class Timeout : public BackendError {
public:
    explicit Timeout(const std::string& what) : BackendError(what) {}
};

class RateLimited : public BackendError {
public:
    explicit RateLimited(const std::string& what) : BackendError(what) {}
};

class MalformedResponse : public BackendError {
public:
    explicit MalformedResponse(const std::string& what) : BackendError(what) {}
};

class InputUnreadable : public BackendError {
public:
    explicit InputUnreadable(const std::string& what) : BackendError(what) {}
};

class EmptyQuery : public BackendError {
public:
    explicit EmptyQuery(const std::string& what) : BackendError(what) {}
};

class QuotaExceeded : public BackendError {
public:
    explicit QuotaExceeded(const std::string& what) : BackendError(what) {}
};

class GeocodeUnavailable : public BackendError {
public:
    explicit GeocodeUnavailable(const std::string& what) : BackendError(what) {}
};

// Raised by the replay provider when a request has no recorded response.
class ReplayMiss : public BackendError {
public:
    explicit ReplayMiss(const std::string& what) : BackendError(what) {}
};

// --- pipeline errors ---------------------------------------------------------

class TaskFailed : public Error {
public:
    explicit TaskFailed(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

class DatasetError : public Error {
public:
    explicit DatasetError(const std::string& what) : Error(what) {}
};

}  // namespace geotime
