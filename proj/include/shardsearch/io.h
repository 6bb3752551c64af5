// Copyright 2026 The shardsearch Authors.
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

#ifndef SHARDSEARCH_IO_H_
#define SHARDSEARCH_IO_H_

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "shardsearch/tables.h"

namespace shardsearch {

// All throw ConfigError on I/O or parse failures.
nlohmann::json ReadJsonFile(const std::filesystem::path& path);
void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j);
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

// Accepts {"tables": [...]} pool files, or a CSV with the pool columns.
TablePool LoadPool(const std::filesystem::path& path);

// A task file holds either one task object or {"tasks": [...]}.
std::vector<ShardingTask> LoadTasks(const std::filesystem::path& path);
nlohmann::json TaskSetJson(const std::vector<ShardingTask>& tasks);

}  // namespace shardsearch

#endif  // SHARDSEARCH_IO_H_
