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

#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdemd/bag.hpp"
#include "sdemd/emd.hpp"
#include "sdemd/quantizer.hpp"
#include "sdemd/retrieval.hpp"
#include "sdemd/trainer.hpp"

namespace sdemd {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bags as JSON Lines: {"id": str, "label": str, "instances": [[num, ...], ...]}
// per line. Blank lines are ignored.
LabeledDataset read_bags(std::istream& in, const std::string& source = "<stream>");
LabeledDataset load_bags(const std::string& path);
void write_bags(std::ostream& out, const LabeledDataset& data);
void save_bags(const std::string& path, const LabeledDataset& data);

// Dictionary file: {"sigma": num, "atoms": [[num, ...], ...]}.
struct DictionaryFile {
  Dictionary dictionary;
  double sigma = 0;
};

DictionaryFile load_dictionary(const std::string& path);
void save_dictionary(const std::string& path, const Dictionary& dict, double sigma);

// iteration,loss,xi,Z,Gamma,mean_atom_norm
void write_report_csv(std::ostream& out, const TrainReport& report);

// x,y,cutoff
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& pts);

// Two histograms and a cost matrix. JSON: {"h": [...], "g": [...], "d": [[...], ...]}.
// CSV: line 1 is h, line 2 is g, the following m lines are rows of d.
struct TransportProblem {
  Vector<double> h, g;
  Matrix<double> d;
};

TransportProblem parse_transport_json(const std::string& text);
TransportProblem parse_transport_csv(const std::string& text);
TransportProblem load_transport(const std::string& path);

// %.17g
std::string format_number(double v);

}  // namespace sdemd
