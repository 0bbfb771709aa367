// Copyright 2026 The powerbench Authors
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

#include <cmath>

#include "check_error.hpp"
#include "doctest.h"
#include "powerbench/text.hpp"

using namespace powerbench;

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0, 300.0, 0.1, 4.0394, 1e-9, 123456.789, -2.5}) {
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(300.0) == "300");
}

TEST_CASE("format_fixed") {
  CHECK(format_fixed(771.676, 2) == "771.68");
  CHECK(format_fixed(2.0, 1) == "2.0");
}

TEST_CASE("parse_double trims and rejects junk") {
  CHECK(parse_double("  42.5\n") == 42.5);
  CHECK_ERROR_CODE(parse_double("4x"), ErrorCode::parse_error);
  CHECK_ERROR_CODE(parse_double(""), ErrorCode::parse_error);
  CHECK(parse_int("17") == 17);
  CHECK_ERROR_CODE(parse_int("1.5"), ErrorCode::parse_error);
}

TEST_CASE("csv quoting survives parse") {
  const std::string field = "a,\"b\"";
  const auto rows = parse_csv(csv_quote(field) + ",x\n1,2\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == field);
  CHECK(rows[0][1] == "x");
  CHECK(rows[1][1] == "2");
}

TEST_CASE("split keeps empty fields") {
  const auto parts = split("a,,b", ',');
  REQUIRE(parts.size() == 3);
  CHECK(parts[1].empty());
}

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("error codes render with hyphens") {
  CHECK(to_string(ErrorCode::config_error) == "config-error");
}
