// Copyright 2026 The sdemd Authors. All Rights Reserved.
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sdemd/io.hpp"

using namespace sdemd;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("sdemd_io_" + name)).string();
}

LabeledDataset parse(const std::string& text) {
  std::istringstream in(text);
  return read_bags(in, "test");
}

}  // namespace

TEST_CASE("reading two bags infers the class set") {
  const auto d = parse(
      "{\"id\": \"a\", \"label\": \"pos\", \"instances\": [[1, 2, 3], [4, 5, 6]]}\n"
      "\n"
      "{\"id\": \"b\", \"label\": \"neg\", \"instances\": [[0, 0, 0]]}\n");
  REQUIRE(d.size() == 2);
  CHECK(d.dim() == 3);
  CHECK(d.class_set == std::set<std::string>{"neg", "pos"});
  CHECK(d.bags[0].size() == 2);
  CHECK(d.bags[0].instances(2, 1) == 6);
}

TEST_CASE("numeric labels are accepted as opaque strings") {
  const auto d = parse("{\"id\": \"a\", \"label\": 3, \"instances\": [[1]]}\n");
  CHECK(d.bags[0].label == "3");
}

TEST_CASE("empty input is an empty dataset") {
  const auto d = parse("");
  CHECK(d.empty());
  CHECK(d.class_set.empty());
}

TEST_CASE("malformed input reports the line") {
  CHECK_THROWS_WITH_AS(parse("{\"id\": \"a\", \"label\": \"x\", \"instances\": [[1, 2], [3]]}\n"),
                       doctest::Contains("test:1"), DimensionMismatch);
  CHECK_THROWS_WITH_AS(parse("{\"id\": \"a\", \"label\": \"x\", \"instances\": [[1]]}\n{\"id\": \"b\", "
                             "\"label\": \"x\", \"instances\": [[1, 2]]}\n"),
                       doctest::Contains("test:2"), DimensionMismatch);
  CHECK_THROWS_WITH_AS(parse("\n\nnot json\n"), doctest::Contains("test:3"), ParseError);
  CHECK_THROWS_AS(parse("{\"id\": \"a\", \"label\": \"x\", \"instances\": []}\n"), ParseError);
  CHECK_THROWS_AS(parse("{\"id\": \"a\", \"instances\": [[1]]}\n"), ParseError);
  CHECK_THROWS_AS(load_bags(temp_path("does_not_exist.jsonl")), std::runtime_error);
}

TEST_CASE("save then load round-trips generated datasets") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.n_classes = 2 + static_cast<int>(seed);
    cfg.dim = 1 + static_cast<int>(seed);
    const auto data = generate_synthetic(cfg);
    const auto path = temp_path("roundtrip.jsonl");
    save_bags(path, data);
    CHECK(load_bags(path) == data);
    std::remove(path.c_str());
  }
}

TEST_CASE("dictionary file round trip") {
  Dictionary d{Matrix<double>(3, 2)};
  d.atoms << 0.1, -2, 1e-17, 3.5, 1.0 / 3.0, 7;
  const auto path = temp_path("dict.json");
  save_dictionary(path, d, 0.75);
  const auto f = load_dictionary(path);
  CHECK(f.sigma == 0.75);
  CHECK(f.dictionary.atoms == d.atoms);
  std::remove(path.c_str());

  std::ofstream(path) << "{\"sigma\": 0, \"atoms\": [[1]]}";
  CHECK_THROWS_AS(load_dictionary(path), ParseError);
  std::ofstream(path) << "{\"sigma\": 1, \"atoms\": [[1], [1, 2]]}";
  CHECK_THROWS_AS(load_dictionary(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("transport problems from JSON and CSV") {
  const auto j = parse_transport_json(R"({"h": [0.7, 0.3], "g": [0.4, 0.6], "d": [[0, 1], [1, 0]]})");
  const auto c = parse_transport_csv("0.7,0.3\n0.4,0.6\n0,1\n1,0\n");
  CHECK(j.h == c.h);
  CHECK(j.g == c.g);
  CHECK(j.d == c.d);
  CHECK_THROWS_AS(parse_transport_csv("0.5,0.5\n1\n0,1\n1,0\n"), DimensionMismatch);
  CHECK_THROWS_AS(parse_transport_csv("0.5,0.5\n0.5,0.5\n0,1\n"), ParseError);
  CHECK_THROWS_AS(parse_transport_csv("0.5,abc\n0.5,0.5\n0,1\n1,0\n"), ParseError);
  CHECK_THROWS_AS(parse_transport_json(R"({"h": [1], "g": [1]})"), ParseError);
}

TEST_CASE("report and curve CSV layout") {
  TrainReport rep;
  rep.records.push_back({1, 0.1, 1, 0.2, 0.2, 3.0});
  std::ostringstream out;
  write_report_csv(out, rep);
  CHECK(out.str() ==
        "iteration,loss,xi,Z,Gamma,mean_atom_norm\n"
        "1,0.10000000000000001,1,0.20000000000000001,0.20000000000000001,3\n");
  std::ostringstream curve;
  write_curve_csv(curve, {{0, 0.5, 0}, {1, 1, 4}});
  CHECK(curve.str() == "x,y,cutoff\n0,0.5,0\n1,1,4\n");
}
