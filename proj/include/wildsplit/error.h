// Copyright 2026 The Wildsplit Authors.
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

#ifndef WILDSPLIT_ERROR_H_
#define WILDSPLIT_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace wildsplit {

enum class ErrorCode {
  kIo,
  kBadHeader,
  kBadField,
  kBadDate,
  kDuplicateId,
  kBadMagic,
  kRowMismatch,
  kTruncated,
  kZeroVector,
  kClassCountMismatch,
  kBadConfig,
  kDimMismatch,
  kUnsortedEdges,
  kUnknownIdentity,
  kUnknownDataset,
  kNotTimestamped,
  kClusterMismatch,
  kEmptyGallery,
  kDegenerateCentroid,
  kBadLogits,
  kIncomplete,
  kUndefined,
  kBadSpec,
  kNotSeparable,
};

// Stable name used in diagnostics, e.g. "DuplicateId".
std::string_view ErrorCodeName(ErrorCode code);

// All validation failures in the library are reported through this type. The
// CLI maps it to exit code 1 and a single `error: code=<Name> ...` line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wildsplit

#endif  // WILDSPLIT_ERROR_H_
