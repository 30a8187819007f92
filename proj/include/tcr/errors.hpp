#pragma once

#include <stdexcept>
#include <string>

namespace tcr {

// Base class for every error this library throws.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ZeroVectorError : public Error {
 public:
  explicit ZeroVectorError(const std::string& what) : Error(what) {}
};

class DimensionMismatchError : public Error {
 public:
  explicit DimensionMismatchError(const std::string& what) : Error(what) {}
};

class NonPositiveTemperatureError : public Error {
 public:
  explicit NonPositiveTemperatureError(const std::string& what) : Error(what) {}
};

class InvalidDistributionError : public Error {
 public:
  explicit InvalidDistributionError(const std::string& what) : Error(what) {}
};

class EmptyGalleryError : public Error {
 public:
  explicit EmptyGalleryError(const std::string& what) : Error(what) {}
};

class SizeMismatchError : public Error {
 public:
  explicit SizeMismatchError(const std::string& what) : Error(what) {}
};

class EmptyQueueError : public Error {
 public:
  explicit EmptyQueueError(const std::string& what) : Error(what) {}
};

class NonPositiveThresholdError : public Error {
 public:
  explicit NonPositiveThresholdError(const std::string& what) : Error(what) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& what) : Error(what) {}
};

class FileIoError : public Error {
 public:
  explicit FileIoError(const std::string& what) : Error(what) {}
};

// Binary embedding file problems.
class BadMagicError : public Error {
 public:
  explicit BadMagicError(const std::string& what) : Error(what) {}
};

class VersionUnsupportedError : public Error {
 public:
  explicit VersionUnsupportedError(const std::string& what) : Error(what) {}
};

class TruncatedPayloadError : public Error {
 public:
  explicit TruncatedPayloadError(const std::string& what) : Error(what) {}
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(const std::string& what) : Error(what) {}
};

class MissingTruthError : public Error {
 public:
  explicit MissingTruthError(const std::string& what) : Error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace tcr
