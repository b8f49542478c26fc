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

#include "seqcons/integer.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

namespace seqcons {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

} // namespace

std::string format_integer(const Integer &value, int base) {
  if (base == 10)
    return value.str();
  const bool negative = value < 0;
  Integer magnitude = negative ? Integer(-value) : value;
  std::string digits;
  if (magnitude == 0)
    digits = "0";
  while (magnitude > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(magnitude & 1)));
    magnitude >>= 1;
  }
  std::reverse(digits.begin(), digits.end());
  return (negative ? "-0b" : "0b") + digits;
}

std::string format_sequence(const IntegerList &values, int base) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i)
      out += ',';
    out += format_integer(values[i], base);
  }
  return out;
}

std::optional<Integer> parse_integer(std::string_view text, int base) {
  text = trim(text);
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  if (base == 2) {
    if (text.size() < 3 || text[0] != '0' || (text[1] != 'b' && text[1] != 'B'))
      return std::nullopt;
    text.remove_prefix(2);
  } else if (base != 10) {
    return std::nullopt;
  }
  if (text.empty())
    return std::nullopt;
  Integer value = 0;
  for (char c : text) {
    const int digit = c - '0';
    if (digit < 0 || digit >= base)
      return std::nullopt;
    value = value * base + digit;
  }
  return negative ? Integer(-value) : value;
}

Integer floor_div(const Integer &a, const Integer &b) {
  Integer q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0)))
    --q;
  return q;
}

Integer floor_mod(const Integer &a, const Integer &b) {
  Integer r = a % b;
  if (r != 0 && ((r < 0) != (b < 0)))
    r += b;
  return r;
}

bool fits_int64(const Integer &value) {
  return value >= std::numeric_limits<std::int64_t>::min() &&
         value <= std::numeric_limits<std::int64_t>::max();
}

} // namespace seqcons
