// Copyright 2026 The seqcons Authors. All rights reserved.
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

#include "seqcons/mining.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace seqcons::test {

inline const FunctionSpace &default_space() {
  static const FunctionSpace space = enumerate_space();
  return space;
}

inline const Dataset &default_dataset() {
  static const Dataset dataset = mine(default_space().functions, 4, IndexConvention{});
  return dataset;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &tag) {
  std::random_device rd;
  auto dir = std::filesystem::temp_directory_path() /
             ("seqcons-" + tag + "-" + std::to_string(rd()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace seqcons::test
