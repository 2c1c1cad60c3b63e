#pragma once

#include <stdexcept>
#include <string>

namespace ltr {

// Base error for everything raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with the requested operation.
struct ShapeError : Error {
  using Error::Error;
};

// Malformed or inconsistent run configuration / input file.
struct ConfigError : Error {
  using Error::Error;
};

// Checkpoint and world (or two checkpoints) disagree on dimensions.
struct DimMismatchError : Error {
  using Error::Error;
};

// Two artifacts were produced from different worlds.
struct WorldMismatchError : Error {
  using Error::Error;
};

// Training produced a non-finite loss.
struct TrainingDiverged : Error {
  using Error::Error;
};

}  // namespace ltr
