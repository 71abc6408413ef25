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

#ifndef WILDSPLIT_IO_H_
#define WILDSPLIT_IO_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wildsplit {

// Throws Error(kIo) if the file cannot be read.
std::string ReadTextFile(const std::filesystem::path& path);
std::vector<char> ReadBinaryFile(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void WriteBytesAtomic(const std::filesystem::path& path,
                      std::span<const char> bytes);
void WriteFileAtomic(const std::filesystem::path& path, std::string_view text);

std::string Sha256Hex(std::span<const char> bytes);
std::string Sha256File(const std::filesystem::path& path);

std::vector<std::string_view> SplitFields(std::string_view line, char sep);

// Shortest decimal text that round-trips to the same double.
std::string FormatDouble(double value);

}  // namespace wildsplit

#endif  // WILDSPLIT_IO_H_
