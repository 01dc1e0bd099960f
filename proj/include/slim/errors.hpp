// Copyright 2026 The slim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace slim {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or parameter extents that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied value out of its documented range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed model description, run config, or dataset.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// I/O failure (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind { kBadMagic, kUnsupportedVersion, kTruncated, kChecksumMismatch, kMalformed };

inline const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kUnsupportedVersion: return "unsupported version";
    case FormatErrorKind::kTruncated: return "truncated";
    case FormatErrorKind::kChecksumMismatch: return "checksum mismatch";
    case FormatErrorKind::kMalformed: return "malformed";
  }
  return "unknown";
}

/// Model file could not be decoded. `kind()` distinguishes the failure modes.
class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& detail)
      : Error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace slim
