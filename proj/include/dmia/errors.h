#ifndef DMIA_ERRORS_H_
#define DMIA_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dmia {

// Violated precondition: bad shapes, out-of-range hyperparameters, pools too
// small for the requested batch.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss, degenerate mixture fits that survive every restart.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataErrorCode {
  kIo,
  kMalformedHeader,
  kRaggedRow,
  kBadNumber,
  kMagicMismatch,
  kUnsupportedVersion,
  kTruncated,
  kSchema,
};

std::string_view to_string(DataErrorCode code);

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  DataErrorCode code() const { return code_; }

 private:
  DataErrorCode code_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace dmia

#endif  // DMIA_ERRORS_H_
