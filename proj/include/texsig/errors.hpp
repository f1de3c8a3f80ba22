#pragma once

#include <stdexcept>
#include <string>

namespace texsig {

// Tensor/layer shape contract violations.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed files: volume/mask headers, manifests, patch sets, checkpoints.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or unknown config keys.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate inputs: constant masked region, fewer distinct points than
// clusters, single-class labels.
struct DegenerateDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Patch extraction ran out of acceptable candidates.
class ExtractionError : public std::runtime_error {
public:
  ExtractionError(const std::string& msg, long long achieved)
      : std::runtime_error(msg), achieved_(achieved) {}
  long long achieved() const { return achieved_; }

private:
  long long achieved_;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(const std::string& msg, int epoch, double learning_rate)
      : std::runtime_error(msg), epoch_(epoch), learning_rate_(learning_rate) {}
  int epoch() const { return epoch_; }
  double learning_rate() const { return learning_rate_; }

private:
  int epoch_;
  double learning_rate_;
};

// Iterative solver did not converge within its iteration budget.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& msg, double last_change)
      : std::runtime_error(msg), last_change_(last_change) {}
  double last_change() const { return last_change_; }

private:
  double last_change_;
};

// ROI produced zero accepted sliding windows.
struct EmptyRoiError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Phantom generation could not satisfy its constraints.
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem-level failures with the offending path in the message.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace texsig
