#pragma once

#include <stdexcept>
#include <string>

namespace deskmt {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Source and target files disagree on line count.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text or file (empty line, bad header, bad token).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An index or size lies outside the permitted range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity surfaced in a computation; the message names the stage.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Data preprocessed with different BPE codes or vocabularies than a checkpoint.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint failed its checksum or is truncated.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

}  // namespace deskmt
