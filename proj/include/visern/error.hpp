#pragma once

#include <stdexcept>
#include <string>

namespace visern {

/// Coarse error categories. The CLI maps each one onto a process exit code.
enum class ErrorKind {
  kShape,
  kEmptyInput,
  kDegenerateInput,
  kEvaluation,
  kFormat,
  kLength,
  kData,
  kConfig,
  kVocabulary,
  kSingularDegree,
  kSymmetry,
  kState,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define VISERN_DEFINE_ERROR(Name, Kind)                                     \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

VISERN_DEFINE_ERROR(ShapeError, kShape)
VISERN_DEFINE_ERROR(EmptyInputError, kEmptyInput)
VISERN_DEFINE_ERROR(DegenerateInputError, kDegenerateInput)
VISERN_DEFINE_ERROR(EvaluationError, kEvaluation)
VISERN_DEFINE_ERROR(FormatError, kFormat)
VISERN_DEFINE_ERROR(LengthError, kLength)
VISERN_DEFINE_ERROR(DataError, kData)
VISERN_DEFINE_ERROR(ConfigError, kConfig)
VISERN_DEFINE_ERROR(VocabularyError, kVocabulary)
VISERN_DEFINE_ERROR(SingularDegreeError, kSingularDegree)
VISERN_DEFINE_ERROR(SymmetryError, kSymmetry)
VISERN_DEFINE_ERROR(StateError, kState)
VISERN_DEFINE_ERROR(IoError, kIo)

#undef VISERN_DEFINE_ERROR

}  // namespace visern
