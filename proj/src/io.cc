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

#include "shardsearch/io.h"

#include <fstream>
#include <sstream>

#include "shardsearch/common.h"

namespace shardsearch {

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(ReadTextFile(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path& path, const nlohmann::json& j) {
  WriteTextFile(path, j.dump(1) + "\n");
}

TablePool LoadPool(const std::filesystem::path& path) {
  try {
    TablePool pool;
    if (path.extension() == ".csv") {
      std::istringstream in(ReadTextFile(path));
      pool = ReadPoolCsv(in);
    } else {
      pool = ReadJsonFile(path).get<TablePool>();
    }
    ValidatePool(pool);
    return pool;
  } catch (const InvalidArgument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<ShardingTask> LoadTasks(const std::filesystem::path& path) {
  const nlohmann::json j = ReadJsonFile(path);
  try {
    std::vector<ShardingTask> tasks;
    if (j.contains("tasks")) {
      tasks = j.at("tasks").get<std::vector<ShardingTask>>();
    } else {
      tasks.push_back(j.get<ShardingTask>());
    }
    for (const ShardingTask& t : tasks) ValidateTask(t);
    return tasks;
  } catch (const InvalidArgument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json TaskSetJson(const std::vector<ShardingTask>& tasks) {
  return {{"tasks", tasks}};
}

}  // namespace shardsearch
