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

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace seqcons {

/// Exact integer used for every sequence value.
using Integer = boost::multiprecision::cpp_int;

using IntegerList = std::vector<Integer>;

/// Decimal for base 10, Python `bin()` style ("0b101", "-0b11") for base 2.
std::string format_integer(const Integer &value, int base);

/// Comma-joined without spaces, e.g. "7,11,15".
std::string format_sequence(const IntegerList &values, int base);

/// Parses a bare numeral. Base 2 requires the "0b" prefix; base 10 accepts an
/// optional sign and digits only. Surrounding whitespace is ignored.
std::optional<Integer> parse_integer(std::string_view text, int base);

/// Python floor division / modulo.
Integer floor_div(const Integer &a, const Integer &b);
Integer floor_mod(const Integer &a, const Integer &b);

bool fits_int64(const Integer &value);

} // namespace seqcons
