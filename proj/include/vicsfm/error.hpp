#pragma once

#include <stdexcept>
#include <string>

namespace vicsfm {

/// Base class for pipeline-stage failures that should abort a run.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

class TranslationError : public Error {
public:
    explicit TranslationError(const std::string& msg) : Error(msg) {}
};

class ReconstructionError : public Error {
public:
    explicit ReconstructionError(const std::string& msg) : Error(msg) {}
};

class MeshingError : public Error {
public:
    explicit MeshingError(const std::string& msg) : Error(msg) {}
};

class TexturingError : public Error {
public:
    explicit TexturingError(const std::string& msg) : Error(msg) {}
};

class LocalizationError : public Error {
public:
    explicit LocalizationError(const std::string& msg) : Error(msg) {}
};

/// Non-finite values encountered during optimization. Carries the id of the
/// observation whose residual went bad, or -1 when unknown.
class NumericalError : public Error {
public:
    NumericalError(const std::string& msg, long long observation_id = -1)
        : Error(msg), observation_id(observation_id) {}
    long long observation_id;
};

}  // namespace vicsfm
