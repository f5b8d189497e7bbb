#pragma once

#include <stdexcept>
#include <string>

namespace vnsemcom {

/// Shape/length mismatch between tensors or layers.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid configuration value, unknown key, or broken precondition.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Training diverged (non-finite loss) or failed a stated floor.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

/// Judge (or other calibrated component) missed its accuracy floor.
class CalibrationError : public std::runtime_error {
public:
    explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

/// Channel gain collapsed below the equalization threshold twice in a row.
class DeepFadeError : public std::runtime_error {
public:
    explicit DeepFadeError(const std::string& what) : std::runtime_error(what) {}
};

/// Two ledger events share a key but disagree on content.
class EquivocationError : public std::runtime_error {
public:
    explicit EquivocationError(const std::string& what) : std::runtime_error(what) {}
};

/// Trust-weighted aggregation excluded every client.
class QuorumError : public std::runtime_error {
public:
    explicit QuorumError(const std::string& what) : std::runtime_error(what) {}
};

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace vnsemcom
