#pragma once

#include <stdexcept>
#include <string>

namespace melm {

// Error categories double as CLI exit codes: usage=1, data=2, training=3.
enum class ErrorCategory { usage = 1, data = 2, training = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& m) : Error(ErrorCategory::usage, m) {}
};
struct DataError : Error {
    explicit DataError(const std::string& m) : Error(ErrorCategory::data, m) {}
};
struct TrainingError : Error {
    explicit TrainingError(const std::string& m) : Error(ErrorCategory::training, m) {}
};

// Narrow kinds so call sites can catch exactly what they expect.
struct ParseError : DataError { using DataError::DataError; };
struct FormatError : DataError { using DataError::DataError; };
struct SizeError : DataError { using DataError::DataError; };
struct StructureError : DataError { using DataError::DataError; };
struct LengthError : DataError { using DataError::DataError; };
struct GenerationError : DataError { using DataError::DataError; };
struct SubstitutionError : DataError { using DataError::DataError; };
struct EvalError : DataError { using DataError::DataError; };
struct ConfigError : UsageError { using UsageError::UsageError; };
struct CheckpointError : TrainingError { using TrainingError::TrainingError; };

}  // namespace melm
