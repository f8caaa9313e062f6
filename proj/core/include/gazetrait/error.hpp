#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gazetrait {

enum class ErrorCode {
  InvalidArgument,
  // ingest
  SchemaMismatch,
  MalformedRow,
  NonMonotonicTimestamps,
  IrregularSampling,
  TooShort,
  OutOfRangeResponse,
  KeyMismatch,
  InsufficientParticipants,
  // featurize
  NoObservedSamples,
  StatisticalVariantNotSequential,
  StatsProvenance,
  // split
  TooShortForSegmentation,
  ClassTooSmall,
  TooFewParticipants,
  UnsupportedProtocol,
  // model / train
  ShapeMismatch,
  NonFiniteActivation,
  NonFiniteGradient,
  NonFiniteUpdate,
  EmptyTrainingSet,
  DivergedTraining,
  LeakageViolation,
  // baseline
  SingleClassTrainingSet,
  // eval
  EmptyEvaluation,
  TooFewFolds,
  IoFailure,
  // synth / cli
  InvalidSpec,
  ConfigError,
  HashMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gazetrait
