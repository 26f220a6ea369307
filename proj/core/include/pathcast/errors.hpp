#pragma once

#include <stdexcept>
#include <string>

namespace pathcast {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// ingest
struct MalformedRow : Error {
  explicit MalformedRow(int line, const std::string& what)
      : Error("malformed row at line " + std::to_string(line) + ": " + what), line(line) {}
  int line;
};
struct DuplicateKey : Error { using Error::Error; };
struct NonMonotoneTimestamps : Error { using Error::Error; };

// feature construction
struct InsufficientHistory : Error { using Error::Error; };
struct LeakageViolation : Error { using Error::Error; };
struct SchemaMismatch : Error { using Error::Error; };

// estimation
struct DegenerateColumn : Error { using Error::Error; };
struct NonFinite : Error { using Error::Error; };
struct EmptyGrid : Error { using Error::Error; };
struct Degenerate : Error { using Error::Error; };
struct InsufficientWindow : Error { using Error::Error; };
struct EmptyPool : Error { using Error::Error; };
struct SingleSample : Error { using Error::Error; };
struct SingularCovariance : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteLoss : Error {
  explicit NonFiniteLoss(int batchIndex)
      : Error("non-finite loss in batch " + std::to_string(batchIndex)), batchIndex(batchIndex) {}
  int batchIndex;
};
struct UntrainedMember : Error { using Error::Error; };

// trading / reports
struct MissingSubperiod : Error { using Error::Error; };
struct DegenerateBounds : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace pathcast
