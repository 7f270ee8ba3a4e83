#pragma once

#include <stdexcept>
#include <string>

namespace fcdd {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

class UnsupportedBackboneError : public Error {
 public:
  using Error::Error;
};

class UnsupportedGeometryError : public Error {
 public:
  using Error::Error;
};

class WeightLoadError : public Error {
 public:
  using Error::Error;
};

class CheckpointFormatError : public Error {
 public:
  using Error::Error;
};

class DatasetLayoutError : public Error {
 public:
  using Error::Error;
};

class ImageLoadError : public Error {
 public:
  using Error::Error;
};

class FileWriteError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

}  // namespace fcdd
