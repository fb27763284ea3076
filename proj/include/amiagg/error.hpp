#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace amiagg {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidConfig,
  kMalformedFrame,
  // key_mgmt
  kStaleTimestamp,
  kBadSignature,
  kUnknownSender,
  kReplayedRequest,
  kConfirmationMismatch,
  kScheduleExhausted,
  // consumption_vector
  kConsumptionOverflow,
  kValueOutOfRange,
  kFieldOverflow,
  // masked_aggregation
  kDuplicateContributor,
  kIntegrityFailure,
  kStaleReport,
  kModeMismatch,
  kRoundMismatch,
  kMissingSchedule,
  kDLRecoveryFailure,
  kNotFound,
  // paillier_baseline
  kPlaintextOutOfRange,
  kMalformedCiphertext,
  // load_control
  kInsufficientControllableLoad,
  // simnet
  kPreconditionViolation,
  kGroundTruthMismatch,
};

std::string_view ToString(ErrorCode code);

// Every module reports failures through this one exception type so callers
// (the simulator, the CLI) can map them onto diagnostics and exit codes.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ToString(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace amiagg
