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

#include "seqcons/jsonio.hpp"

#include <stdexcept>

namespace seqcons {

Json integer_to_json(const Integer &value) {
  if (fits_int64(value))
    return Json(static_cast<std::int64_t>(value));
  return Json(value.str());
}

Integer integer_from_json(const Json &j) {
  if (j.is_number_integer())
    return j.is_number_unsigned() ? Integer(j.get<std::uint64_t>())
                                  : Integer(j.get<std::int64_t>());
  if (j.is_string()) {
    auto parsed = parse_integer(j.get<std::string>(), 10);
    if (parsed)
      return *parsed;
  }
  throw std::runtime_error("expected an integer, got " + j.dump());
}

Json integers_to_json(const IntegerList &values) {
  Json out = Json::array();
  for (const auto &v : values)
    out.push_back(integer_to_json(v));
  return out;
}

IntegerList integers_from_json(const Json &j) {
  IntegerList out;
  for (const auto &v : j)
    out.push_back(integer_from_json(v));
  return out;
}

Json to_json(const IndexConvention &conv) {
  return Json{{"start_index", conv.start_index}, {"max_offset", conv.max_offset}};
}

IndexConvention convention_from_json(const Json &j) {
  IndexConvention conv;
  conv.start_index = j.at("start_index").get<int>();
  conv.max_offset = j.at("max_offset").get<int>();
  validate(conv);
  return conv;
}

Json to_json(const DatasetParameters &params) {
  return Json{{"constant_min", params.space.constants.min},
              {"constant_max", params.space.constants.max},
              {"probe_first", params.space.probe_first},
              {"probe_last", params.space.probe_last},
              {"validity", std::string(to_string(params.space.rule))},
              {"length", params.length},
              {"index", to_json(params.conv)},
              {"base", params.base}};
}

DatasetParameters dataset_parameters_from_json(const Json &j) {
  DatasetParameters p;
  p.space.constants.min = j.at("constant_min").get<int>();
  p.space.constants.max = j.at("constant_max").get<int>();
  p.space.probe_first = j.at("probe_first").get<int>();
  p.space.probe_last = j.at("probe_last").get<int>();
  auto rule = validity_rule_from_string(j.at("validity").get<std::string>());
  if (!rule)
    throw std::runtime_error("unknown validity rule");
  p.space.rule = *rule;
  p.length = j.at("length").get<int>();
  p.conv = convention_from_json(j.at("index"));
  p.base = j.at("base").get<int>();
  return p;
}

} // namespace seqcons
