#pragma once

#include <stdexcept>
#include <string>

namespace cads {

// Root of every error the library throws. `kind()` names the failure class
// (ParseError, ShapeError, ...) so the CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define CADS_DEFINE_ERROR(Name)                                          \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(#Name, what) {}       \
  };

// signal_io
CADS_DEFINE_ERROR(ParseError)
CADS_DEFINE_ERROR(UnsupportedFormat)
CADS_DEFINE_ERROR(IoError)
// synth
CADS_DEFINE_ERROR(InvalidParams)
// rpeak
CADS_DEFINE_ERROR(TooShort)
// rrif
CADS_DEFINE_ERROR(NotEnoughPeaks)
CADS_DEFINE_ERROR(FrameTooShort)
// model
CADS_DEFINE_ERROR(ConfigError)
CADS_DEFINE_ERROR(ShapeError)
CADS_DEFINE_ERROR(EmptyBatch)
CADS_DEFINE_ERROR(EmptyDataset)
CADS_DEFINE_ERROR(FormatError)
// eval
CADS_DEFINE_ERROR(TooFewFrames)
CADS_DEFINE_ERROR(TooFewSubjects)
CADS_DEFINE_ERROR(EmptyMatrix)
CADS_DEFINE_ERROR(EmptyRecord)

#undef CADS_DEFINE_ERROR

// Training produced a non-finite loss.
class Diverged : public Error {
 public:
  Diverged(int epoch, const std::string& what)
      : Error("Diverged", "epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace cads
