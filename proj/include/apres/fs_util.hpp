// Copyright 2026 The apres Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace apres {

// Writes to a unique sibling temp file, then renames over `path`. Concurrent
// writers of the same path converge to one complete file.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

std::optional<std::string> read_file(const std::filesystem::path& path);

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// Exclusive lock file held for the object's lifetime.
class LockFile {
 public:
  explicit LockFile(std::filesystem::path path);
  ~LockFile();
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace apres
