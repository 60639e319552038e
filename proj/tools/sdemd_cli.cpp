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

// Command-line front end: gen-synth, train, quantize, emd, retrieve, eval.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdemd/sdemd.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum class Verbosity { kQuiet, kInfo, kDebug };

Verbosity verbosity() {
  const char* env = std::getenv("SDEMD_LOG");
  if (!env) return Verbosity::kInfo;
  const std::string v = env;
  if (v == "quiet" || v == "0") return Verbosity::kQuiet;
  if (v == "debug" || v == "2") return Verbosity::kDebug;
  return Verbosity::kInfo;
}

void info(const std::string& msg) {
  if (verbosity() != Verbosity::kQuiet) std::cerr << msg << '\n';
}

void debug(const std::string& msg) {
  if (verbosity() == Verbosity::kDebug) std::cerr << msg << '\n';
}

// Loads a JSON config object; flags given on the command line win.
class ConfigFile {
 public:
  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    in >> obj_;
    if (!obj_.is_object()) throw std::runtime_error("config '" + path + "' is not a JSON object");
  }

  template <typename T>
  void fill(const CLI::Option* opt, const std::string& key, T& value) const {
    if (opt->count() > 0 || !obj_.contains(key)) return;
    value = obj_.at(key).get<T>();
  }

 private:
  json obj_ = json::object();
};

void ensure_writable_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    throw std::runtime_error("output directory '" + parent.string() + "' does not exist");
}

json curve_json(const std::vector<sdemd::CurvePoint>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({{"x", p.x}, {"y", p.y}, {"cutoff", p.cutoff}});
  return arr;
}

json matrix_json(const sdemd::Matrix<double>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const sdemd::Vector<double>& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

void write_curves(const std::string& dir, const std::string& stem, const std::vector<sdemd::CurvePoint>& roc,
                  const std::vector<sdemd::CurvePoint>& pr) {
  std::ostringstream roc_csv, pr_csv;
  sdemd::write_curve_csv(roc_csv, roc);
  sdemd::write_curve_csv(pr_csv, pr);
  write_text(dir + "/" + stem + "_roc.csv", roc_csv.str());
  write_text(dir + "/" + stem + "_pr.csv", pr_csv.str());
  write_text(dir + "/" + stem + ".json", json{{"roc", curve_json(roc)}, {"pr", curve_json(pr)}}.dump(2) + "\n");
}

struct GenSynthArgs {
  sdemd::SyntheticConfig cfg;
  std::string config_path;
  std::string out;
};

struct TrainArgs {
  sdemd::TrainerConfig cfg;
  std::string data, dict_out = "dictionary.json", report_out = "report.csv", config_path;
  double sigma = 0;
  std::size_t iterations = 0;
  bool no_decay = false;
  std::vector<double> grid_eta, grid_c;
};

struct QuantizeArgs {
  std::string data, dict, out;
  double sigma = 0;
};

struct EmdArgs {
  std::string input = "-";
  std::string oracle;
};

struct RetrieveArgs {
  std::string data, query, dict, out;
  double sigma = 0;
};

struct EvalArgs {
  std::string data, dict, baseline, out_dir = ".", name;
  int fold = -1;
  int m = 8;
  double sigma = 0;
  std::uint64_t seed = 1;
  std::size_t kmeans_sample = 10000;
};

int run_gen_synth(GenSynthArgs& a, CLI::App* sub) {
  ConfigFile conf;
  if (!a.config_path.empty()) conf.load(a.config_path);
  conf.fill(sub->get_option("--classes"), "classes", a.cfg.n_classes);
  conf.fill(sub->get_option("--bags-per-class"), "bags_per_class", a.cfg.bags_per_class);
  conf.fill(sub->get_option("--min-instances"), "min_instances", a.cfg.min_instances);
  conf.fill(sub->get_option("--max-instances"), "max_instances", a.cfg.max_instances);
  conf.fill(sub->get_option("--dim"), "dim", a.cfg.dim);
  conf.fill(sub->get_option("--separation"), "separation", a.cfg.class_separation);
  conf.fill(sub->get_option("--seed"), "seed", a.cfg.seed);
  ensure_writable_parent(a.out);
  const auto data = sdemd::generate_synthetic(a.cfg);
  sdemd::save_bags(a.out, data);
  info("wrote " + std::to_string(data.size()) + " bags to " + a.out);
  return 0;
}

int run_train(TrainArgs& a, CLI::App* sub) {
  ConfigFile conf;
  if (!a.config_path.empty()) conf.load(a.config_path);
  conf.fill(sub->get_option("--m"), "m", a.cfg.m);
  conf.fill(sub->get_option("--sigma"), "sigma", a.sigma);
  conf.fill(sub->get_option("--tau"), "tau", a.cfg.tau);
  conf.fill(sub->get_option("--c"), "c", a.cfg.c_tradeoff);
  conf.fill(sub->get_option("--eta"), "eta", a.cfg.eta);
  conf.fill(sub->get_option("--iterations"), "iterations", a.iterations);
  conf.fill(sub->get_option("--seed"), "seed", a.cfg.seed);
  conf.fill(sub->get_option("--kmeans-sample"), "kmeans_sample", a.cfg.kmeans_sample);
  conf.fill(sub->get_option("--no-decay"), "no_decay", a.no_decay);
  if (a.sigma > 0) a.cfg.sigma = a.sigma;
  if (sub->get_option("--iterations")->count() > 0 || a.iterations > 0) {
    if (a.iterations == 0) throw std::invalid_argument("iterations must be >= 1");
    a.cfg.iterations = a.iterations;
  }
  a.cfg.eta_decay = !a.no_decay;
  ensure_writable_parent(a.dict_out);
  ensure_writable_parent(a.report_out);

  const auto data = sdemd::load_bags(a.data);
  if (!a.grid_eta.empty() || !a.grid_c.empty()) {
    const auto etas = a.grid_eta.empty() ? std::vector<double>{a.cfg.eta} : a.grid_eta;
    const auto cs = a.grid_c.empty() ? std::vector<double>{a.cfg.c_tradeoff} : a.grid_c;
    const auto grid = sdemd::grid_search(data, a.cfg, etas, cs);
    const sdemd::GridPoint* best = &grid.front();
    for (const auto& p : grid) {
      info("grid eta=" + sdemd::format_number(p.eta) + " C=" + sdemd::format_number(p.c_tradeoff) +
           " heldout_loss=" + sdemd::format_number(p.heldout_loss));
      if (p.heldout_loss < best->heldout_loss) best = &p;
    }
    a.cfg.eta = best->eta;
    a.cfg.c_tradeoff = best->c_tradeoff;
    info("selected eta=" + sdemd::format_number(a.cfg.eta) + " C=" + sdemd::format_number(a.cfg.c_tradeoff));
  }
  const auto res = sdemd::train(data, a.cfg, sdemd::TrainObserver<double>([](std::size_t t, const sdemd::Dictionary&) {
    if (t % 1000 == 0) debug("iteration " + std::to_string(t));
  }));
  sdemd::save_dictionary(a.dict_out, res.dictionary, res.sigma);
  std::ostringstream csv;
  sdemd::write_report_csv(csv, res.report);
  write_text(a.report_out, csv.str());
  info("trained " + std::to_string(res.dictionary.size()) + " atoms over " +
       std::to_string(res.report.records.size()) + " triplets; sigma=" + sdemd::format_number(res.sigma));
  return 0;
}

int run_quantize(QuantizeArgs& a) {
  const auto data = sdemd::load_bags(a.data);
  const auto df = sdemd::load_dictionary(a.dict);
  const double sigma = a.sigma > 0 ? a.sigma : df.sigma;
  std::ostringstream out;
  for (const auto& bag : data.bags) {
    json row{{"id", bag.id}, {"label", bag.label},
             {"histogram", vector_json(sdemd::quantize(bag, df.dictionary, sigma))}};
    out << row.dump() << '\n';
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << out.str();
  } else {
    ensure_writable_parent(a.out);
    write_text(a.out, out.str());
  }
  return 0;
}

int run_emd(EmdArgs& a) {
  sdemd::TransportProblem p;
  if (a.input == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    p = (first != std::string::npos && text[first] == '{') ? sdemd::parse_transport_json(text)
                                                           : sdemd::parse_transport_csv(text);
  } else {
    p = sdemd::load_transport(a.input);
  }
  const auto sol = sdemd::solve_transport(p.h, p.g, p.d);
  json out{{"value", sol.value}, {"flow", matrix_json(sol.flow)}, {"beta", vector_json(sol.beta)}};
  json basis = json::array();
  for (const auto& [r, c] : sol.basis) basis.push_back({r, c});
  out["basis"] = basis;
  if (a.oracle == "1d") {
    const double o = sdemd::oracle_emd_1d(p.h, p.g);
    out["oracle_1d"] = o;
    if (p.d != sdemd::line_ground_distance(p.h.size()))
      info("note: cost matrix is not |j-k|; the 1-D oracle does not apply");
  } else if (a.oracle == "enum") {
    out["oracle_enum"] = sdemd::oracle_emd_enum(p.h, p.g, p.d);
  }
  std::cout << out.dump() << '\n';
  return 0;
}

int run_retrieve(RetrieveArgs& a) {
  const auto database = sdemd::load_bags(a.data);
  const auto queries = sdemd::load_bags(a.query);
  const auto df = sdemd::load_dictionary(a.dict);
  const double sigma = a.sigma > 0 ? a.sigma : df.sigma;
  const auto db = sdemd::index_database(database, df.dictionary, sigma);
  json out = json::array();
  for (const auto& q : queries.bags) {
    const auto ranked = sdemd::rank_database(q, db, df.dictionary, sigma);
    json entries = json::array();
    for (const auto& e : ranked.entries)
      entries.push_back({{"id", e.bag_id}, {"emd", e.emd}, {"relevant", e.relevant}});
    out.push_back({{"query", ranked.query_id}, {"ranking", entries}});
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << out.dump(2) << '\n';
  } else {
    ensure_writable_parent(a.out);
    write_text(a.out, out.dump(2) + "\n");
  }
  return 0;
}

int run_eval(EvalArgs& a) {
  if (a.dict.empty() == a.baseline.empty())
    throw std::invalid_argument("pass exactly one of --dict or --baseline");
  if (!fs::is_directory(a.out_dir)) throw std::runtime_error("output directory '" + a.out_dir + "' does not exist");
  const auto data = sdemd::load_bags(a.data);
  sdemd::Dictionary dict;
  double sigma = a.sigma;
  std::string name = a.name;
  if (!a.dict.empty()) {
    const auto df = sdemd::load_dictionary(a.dict);
    dict = df.dictionary;
    if (!(sigma > 0)) sigma = df.sigma;
    if (name.empty()) name = "trained";
  } else {
    if (a.baseline != "kmeans") throw std::invalid_argument("unknown baseline '" + a.baseline + "'");
    dict = sdemd::init_dictionary_kmeans(data, a.m, a.seed, a.kmeans_sample);
    if (!(sigma > 0)) sigma = sdemd::median_heuristic_sigma(data, a.seed);
    if (name.empty()) name = "kmeans";
  }
  std::vector<int> folds;
  if (a.fold >= 0) folds.push_back(a.fold);
  const auto ev = sdemd::evaluate(data, dict, sigma, a.seed, folds);
  json summary{{"name", name}, {"sigma", sigma}, {"mean_auc", ev.mean_auc}, {"sd_auc", ev.sd_auc}};
  json per_fold = json::array();
  for (const auto& f : ev.folds) {
    write_curves(a.out_dir, name + "_fold" + std::to_string(f.fold), f.roc, f.pr);
    per_fold.push_back({{"fold", f.fold}, {"queries", f.queries}, {"mean_auc", f.mean_auc}});
  }
  write_curves(a.out_dir, name + "_aggregate", ev.roc, ev.pr);
  summary["folds"] = per_fold;
  write_text(a.out_dir + "/" + name + "_summary.json", summary.dump(2) + "\n");
  info(name + ": mean AUC " + sdemd::format_number(ev.mean_auc) + " +- " + sdemd::format_number(ev.sd_auc));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EMD-optimised multi-instance dictionary learning"};
  app.require_subcommand(1);

  GenSynthArgs gs;
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic labeled bag dataset (JSON Lines)");
  gen->add_option("--classes", gs.cfg.n_classes, "Number of classes")->capture_default_str();
  gen->add_option("--bags-per-class", gs.cfg.bags_per_class)->capture_default_str();
  gen->add_option("--min-instances", gs.cfg.min_instances)->capture_default_str();
  gen->add_option("--max-instances", gs.cfg.max_instances)->capture_default_str();
  gen->add_option("--dim", gs.cfg.dim, "Feature dimension")->capture_default_str();
  gen->add_option("--separation", gs.cfg.class_separation, "Distance between class centres")->capture_default_str();
  gen->add_option("--seed", gs.cfg.seed)->capture_default_str();
  gen->add_option("--config", gs.config_path, "JSON config file");
  gen->add_option("-o,--out", gs.out, "Output .jsonl path")->required();

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Learn a dictionary by stochastic triplet updates");
  trn->add_option("--data", tr.data, "Bag dataset (.jsonl)")->required();
  trn->add_option("--m", tr.cfg.m, "Dictionary size")->capture_default_str();
  trn->add_option("--sigma", tr.sigma, "Kernel bandwidth (default: median heuristic)");
  trn->add_option("--tau", tr.cfg.tau, "Margin")->capture_default_str();
  trn->add_option("--c", tr.cfg.c_tradeoff, "Loss trade-off C")->capture_default_str();
  trn->add_option("--eta", tr.cfg.eta, "Step size")->capture_default_str();
  trn->add_flag("--no-decay", tr.no_decay, "Constant step size instead of eta/sqrt(t)");
  trn->add_option("--iterations", tr.iterations, "Triplet count (default: 50 per bag)");
  trn->add_option("--seed", tr.cfg.seed)->capture_default_str();
  trn->add_option("--kmeans-sample", tr.cfg.kmeans_sample)->capture_default_str();
  trn->add_option("--grid-eta", tr.grid_eta, "Step sizes to grid-search");
  trn->add_option("--grid-c", tr.grid_c, "Trade-offs to grid-search");
  trn->add_option("--config", tr.config_path, "JSON config file");
  trn->add_option("-o,--dict-out", tr.dict_out, "Dictionary JSON output")->capture_default_str();
  trn->add_option("--report", tr.report_out, "Training report CSV output")->capture_default_str();

  QuantizeArgs qa;
  auto* qnt = app.add_subcommand("quantize", "Map bags to histograms");
  qnt->add_option("--data", qa.data)->required();
  qnt->add_option("--dict", qa.dict)->required();
  qnt->add_option("--sigma", qa.sigma, "Override the dictionary's sigma");
  qnt->add_option("-o,--out", qa.out, "Output .jsonl (default stdout)");

  EmdArgs ea;
  auto* emd = app.add_subcommand("emd", "Solve the transportation LP for two histograms");
  emd->add_option("input", ea.input, "JSON or CSV problem file, '-' for stdin")->capture_default_str();
  emd->add_option("--oracle", ea.oracle, "Also report an oracle value")->check(CLI::IsMember({"1d", "enum"}));

  RetrieveArgs ra;
  auto* ret = app.add_subcommand("retrieve", "Rank database bags for each query bag");
  ret->add_option("--data", ra.data, "Database bags")->required();
  ret->add_option("--query", ra.query, "Query bags")->required();
  ret->add_option("--dict", ra.dict)->required();
  ret->add_option("--sigma", ra.sigma);
  ret->add_option("-o,--out", ra.out, "Output JSON (default stdout)");

  EvalArgs va;
  auto* evl = app.add_subcommand("eval", "Ten-fold retrieval evaluation");
  evl->add_option("--data", va.data)->required();
  evl->add_option("--dict", va.dict, "Trained dictionary JSON");
  evl->add_option("--baseline", va.baseline, "Baseline dictionary ('kmeans')");
  evl->add_option("--m", va.m, "Baseline dictionary size")->capture_default_str();
  evl->add_option("--kmeans-sample", va.kmeans_sample)->capture_default_str();
  evl->add_option("--sigma", va.sigma);
  evl->add_option("--fold", va.fold, "Evaluate a single fold (0-9)")->check(CLI::Range(0, 9));
  evl->add_option("--seed", va.seed)->capture_default_str();
  evl->add_option("--name", va.name, "Artifact name prefix");
  evl->add_option("--out-dir", va.out_dir)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_synth(gs, gen);
    if (trn->parsed()) return run_train(tr, trn);
    if (qnt->parsed()) return run_quantize(qa);
    if (emd->parsed()) return run_emd(ea);
    if (ret->parsed()) return run_retrieve(ra);
    if (evl->parsed()) return run_eval(va);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
