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

// JSON helpers shared by the line-oriented file formats.

#include "seqcons/mining.hpp"

#include <json.hpp>

namespace seqcons {

using Json = nlohmann::json;

/// Number when the value fits 64 bits, decimal string otherwise.
Json integer_to_json(const Integer &value);
Integer integer_from_json(const Json &j);

Json integers_to_json(const IntegerList &values);
IntegerList integers_from_json(const Json &j);

Json to_json(const IndexConvention &conv);
IndexConvention convention_from_json(const Json &j);

Json to_json(const DatasetParameters &params);
DatasetParameters dataset_parameters_from_json(const Json &j);

} // namespace seqcons
