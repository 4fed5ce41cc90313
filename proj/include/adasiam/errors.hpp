#pragma once

#include <stdexcept>
#include <string>

namespace adasiam {

/// Shape or parameter inconsistency detected before any computation runs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by l2_normalize when the input norm is effectively zero.
class NormalizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A box that cannot be mapped onto an image (no overlap, non-positive size).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No usable candidate survived scoring.
class LostTargetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loss became non-finite during training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SequenceSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adasiam
