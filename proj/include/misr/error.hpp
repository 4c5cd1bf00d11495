#pragma once

#include <stdexcept>
#include <string>

namespace misr {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MISR_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

MISR_DEFINE_ERROR(DecodeError);
MISR_DEFINE_ERROR(BoundsError);
MISR_DEFINE_ERROR(DimensionError);
MISR_DEFINE_ERROR(DomainError);
MISR_DEFINE_ERROR(EmptyClearError);
MISR_DEFINE_ERROR(StructuralError);
MISR_DEFINE_ERROR(ConfigError);
MISR_DEFINE_ERROR(GenerationError);
MISR_DEFINE_ERROR(ShapeError);
MISR_DEFINE_ERROR(FormatError);
MISR_DEFINE_ERROR(IoError);

#undef MISR_DEFINE_ERROR

/// Raised when training produces a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace misr
