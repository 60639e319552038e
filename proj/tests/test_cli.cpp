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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"
#include "sdemd/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = SDEMD_CLI_PATH;

struct Workdir {
  fs::path path;
  Workdir() {
    path = fs::temp_directory_path() / ("sdemd_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

int run(const std::string& args) {
  const int status = std::system(("SDEMD_LOG=quiet " + kCli + " " + args + " 2>/dev/null").c_str());
  return WEXITSTATUS(status);
}

std::string capture(const std::string& args) {
  FILE* p = ::popen(("SDEMD_LOG=quiet " + kCli + " " + args).c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) out += buf;
  ::pclose(p);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& path) {
  const auto text = slurp(path);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("gen-synth writes a reproducible dataset") {
  Workdir w;
  REQUIRE(run("gen-synth --classes 3 --bags-per-class 20 --dim 5 --seed 7 -o " + (w / "a.jsonl")) == 0);
  REQUIRE(run("gen-synth --classes 3 --bags-per-class 20 --dim 5 --seed 7 -o " + (w / "b.jsonl")) == 0);
  CHECK(line_count(w / "a.jsonl") == 60);
  CHECK(slurp(w / "a.jsonl") == slurp(w / "b.jsonl"));
  CHECK(run("gen-synth --classes 1 -o " + (w / "c.jsonl")) != 0);
  CHECK(run("gen-synth -o " + (w / "missing_dir/x.jsonl")) != 0);
}

TEST_CASE("gen-synth config file with flag precedence") {
  Workdir w;
  std::ofstream(w / "cfg.json") << R"({"classes": 2, "bags_per_class": 7, "dim": 3, "seed": 4})";
  REQUIRE(run("gen-synth --config " + (w / "cfg.json") + " -o " + (w / "a.jsonl")) == 0);
  CHECK(line_count(w / "a.jsonl") == 14);
  REQUIRE(run("gen-synth --config " + (w / "cfg.json") + " --classes 4 -o " + (w / "b.jsonl")) == 0);
  CHECK(line_count(w / "b.jsonl") == 28);
  CHECK(sdemd::load_bags(w / "b.jsonl").dim() == 3);
}

TEST_CASE("train writes a dictionary and a report") {
  Workdir w;
  REQUIRE(run("gen-synth --classes 3 --bags-per-class 6 --dim 4 --seed 2 -o " + (w / "d.jsonl")) == 0);
  REQUIRE(run("train --data " + (w / "d.jsonl") + " --m 5 -o " + (w / "dict.json") + " --report " +
              (w / "r.csv")) == 0);
  const auto f = sdemd::load_dictionary(w / "dict.json");
  CHECK(f.dictionary.size() == 5);
  CHECK(f.dictionary.dim() == 4);
  CHECK(line_count(w / "r.csv") == 1 + 50 * 18);

  REQUIRE(run("train --data " + (w / "d.jsonl") + " --m 5 --iterations 40 --eta 0 -o " + (w / "eta0.json") +
              " --report " + (w / "r0.csv")) == 0);
  const auto data = sdemd::load_bags(w / "d.jsonl");
  const auto km = sdemd::init_dictionary_kmeans(data, 5, 1, 10000);
  CHECK(sdemd::load_dictionary(w / "eta0.json").dictionary.atoms == km.atoms);

  REQUIRE(run("train --data " + (w / "d.jsonl") + " --m 5 --iterations 40 --c 0 -o " + (w / "c0.json") +
              " --report " + (w / "rc.csv")) == 0);
  double factor = 1;
  for (int t = 1; t <= 40; ++t) factor *= 1 - 0.01 / std::sqrt(static_cast<double>(t));
  const auto c0 = sdemd::load_dictionary(w / "c0.json").dictionary;
  CHECK((c0.atoms - factor * km.atoms).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK(run("train --data " + (w / "d.jsonl") + " --iterations 0 -o " + (w / "z.json")) != 0);
  CHECK(run("train --data " + (w / "nope.jsonl") + " -o " + (w / "z.json")) != 0);
}

TEST_CASE("train config file") {
  Workdir w;
  REQUIRE(run("gen-synth --classes 2 --bags-per-class 6 --dim 2 --seed 2 -o " + (w / "d.jsonl")) == 0);
  std::ofstream(w / "t.json") << R"({"m": 3, "iterations": 25, "sigma": 1.5})";
  REQUIRE(run("train --data " + (w / "d.jsonl") + " --config " + (w / "t.json") + " --m 4 -o " + (w / "x.json") +
              " --report " + (w / "x.csv")) == 0);
  const auto f = sdemd::load_dictionary(w / "x.json");
  CHECK(f.dictionary.size() == 4);
  CHECK(f.sigma == 1.5);
  CHECK(line_count(w / "x.csv") == 26);
}

TEST_CASE("emd subcommand") {
  Workdir w;
  std::ofstream(w / "same.json") << R"({"h": [0.2, 0.3, 0.5], "g": [0.2, 0.3, 0.5], "d": [[0,1,2],[1,0,1],[2,1,0]]})";
  auto out = json::parse(capture("emd " + (w / "same.json")));
  CHECK(std::abs(out["value"].get<double>()) <= 1e-12);
  CHECK(out["beta"].size() == 6);
  CHECK(out["flow"].size() == 3);

  std::ofstream(w / "cross.csv") << "1,0\n0,1\n0,1\n1,0\n";
  out = json::parse(capture("emd " + (w / "cross.csv")));
  CHECK(out["value"].get<double>() == doctest::Approx(1.0));

  std::ofstream(w / "line.json") << R"({"h": [0.1, 0.4, 0.3, 0.2], "g": [0.25, 0.25, 0.25, 0.25],
    "d": [[0,1,2,3],[1,0,1,2],[2,1,0,1],[3,2,1,0]]})";
  out = json::parse(capture("emd --oracle 1d " + (w / "line.json")));
  CHECK(std::abs(out["value"].get<double>() - out["oracle_1d"].get<double>()) <= 1e-9);

  std::ofstream(w / "bad.json") << R"({"h": [0.5, 0.5], "g": [1.0]})";
  CHECK(run("emd " + (w / "bad.json")) != 0);
}

TEST_CASE("quantize, retrieve and eval") {
  Workdir w;
  REQUIRE(run("gen-synth --classes 3 --bags-per-class 6 --dim 3 --seed 5 -o " + (w / "d.jsonl")) == 0);
  REQUIRE(run("train --data " + (w / "d.jsonl") + " --m 4 --iterations 100 -o " + (w / "dict.json") +
              " --report " + (w / "r.csv")) == 0);

  REQUIRE(run("quantize --data " + (w / "d.jsonl") + " --dict " + (w / "dict.json") + " -o " + (w / "h.jsonl")) == 0);
  CHECK(line_count(w / "h.jsonl") == 18);
  std::ifstream hin(w / "h.jsonl");
  std::string first;
  std::getline(hin, first);
  const auto row = json::parse(first);
  CHECK(row["histogram"].size() == 4);

  const auto ranked = json::parse(capture("retrieve --data " + (w / "d.jsonl") + " --query " + (w / "d.jsonl") +
                                          " --dict " + (w / "dict.json")));
  REQUIRE(ranked.size() == 18);
  CHECK(ranked[0]["ranking"].size() == 18);
  CHECK(ranked[0]["ranking"][0]["id"] == ranked[0]["query"]);

  REQUIRE(run("eval --data " + (w / "d.jsonl") + " --dict " + (w / "dict.json") + " --out-dir " + w.path.string()) == 0);
  REQUIRE(run("eval --data " + (w / "d.jsonl") + " --baseline kmeans --m 4 --out-dir " + w.path.string()) == 0);
  const auto trained = json::parse(slurp(w / "trained_summary.json"));
  const auto kmeans = json::parse(slurp(w / "kmeans_summary.json"));
  CHECK(trained.contains("mean_auc"));
  CHECK(kmeans.contains("mean_auc"));
  CHECK(trained["folds"].size() == 10);
  CHECK(fs::exists(w / "trained_fold0_roc.csv"));
  CHECK(fs::exists(w / "trained_aggregate_pr.csv"));
  CHECK(fs::exists(w / "kmeans_aggregate.json"));
  CHECK(line_count(w / "trained_aggregate_roc.csv") == 102);

  REQUIRE(run("eval --data " + (w / "d.jsonl") + " --dict " + (w / "dict.json") + " --fold 3 --name one --out-dir " +
              w.path.string()) == 0);
  const auto one = json::parse(slurp(w / "one_summary.json"));
  REQUIRE(one["folds"].size() == 1);
  CHECK(one["folds"][0]["fold"] == 3);

  CHECK(run("eval --data " + (w / "d.jsonl") + " --dict " + (w / "missing.json") + " --out-dir " + w.path.string()) != 0);
  CHECK(run("eval --data " + (w / "d.jsonl") + " --out-dir " + w.path.string()) != 0);
}
