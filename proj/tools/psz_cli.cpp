// Copyright 2026 The PSZ Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// psz: command-line front end for dataset generation, pressure matching,
// evaluation and result comparison.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "psz/psz.hpp"

namespace fs = std::filesystem;
using psz::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;

// Desk-scale defaults used when neither the config nor a flag sets them.
constexpr std::size_t kDeskSamples = 2000;
constexpr int kDeskFreqs = 128;
constexpr double kDefaultLambda = 1e-2;

// Context row from the published PM results; never used as a pass/fail target.
struct ReferenceRow {
  const char* method;
  const char* mask;
  double re_b, re_d, ac;
};
constexpr ReferenceRow kReferenceRows[] = {
    {"pm", "Grid-3#1", -9.67, -17.25, 9.61},
};

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string dataset;
  std::string prefilters;
  std::string split = "test";
  std::string splits;
  std::vector<std::string> masks;
  std::vector<std::string> results;
  std::vector<std::string> labels;
  double lambda = kDefaultLambda;
  double tune_target = 0.0;
  double tune_tol = 0.1;
  bool tune = false;
  bool mask_dark_zone = false;
  std::size_t n = kDeskSamples;
  int num_freqs = 0;
  int max_order = -2;
  unsigned threads = 0;
};

// Records every file a command writes so the run manifest can list them.
class RunLog {
 public:
  explicit RunLog(fs::path out) : out_(std::move(out)) { fs::create_directories(out_); }

  void write(const std::string& rel, const std::string& bytes) {
    psz::write_file(out_ / rel, bytes);
    files_.push_back({{"path", rel}, {"bytes", bytes.size()}, {"crc32", psz::crc32_hex(bytes)}});
  }

  void add_existing(const std::string& rel) {
    const std::string bytes = psz::read_file(out_ / rel);
    files_.push_back({{"path", rel}, {"bytes", bytes.size()}, {"crc32", psz::crc32_hex(bytes)}});
  }

  const fs::path& root() const { return out_; }

  void finish(const std::string& command, const json& params) {
    json m;
    m["tool"] = "psz";
    m["version"] = PSZ_VERSION;
    m["command"] = command;
    m["parameters"] = params;
    m["outputs"] = files_;
    psz::write_file(out_ / "run_manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path out_;
  json files_ = json::array();
};

unsigned thread_count(const Options& o) {
  if (o.threads) return o.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string format_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

psz::SceneConfig load_config(const Options& o) {
  if (o.config.empty()) throw psz::UsageError("--config is required");
  if (!fs::exists(o.config)) throw psz::UsageError("config file '" + o.config + "' not found");
  auto cfg = psz::SceneConfig::load(o.config);
  if (!cfg.has("num_freqs")) cfg.num_freqs = kDeskFreqs;
  if (o.num_freqs > 0) cfg.set("num_freqs", std::to_string(o.num_freqs));
  if (o.max_order >= -1) cfg.set("max_order", std::to_string(o.max_order));
  return cfg;
}

psz::SplitRatios parse_splits(const std::string& s) {
  psz::SplitRatios r;
  if (s.empty()) return r;
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      v.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw psz::UsageError("--splits: bad number '" + tok + "'");
    }
  }
  if (v.size() != 3) throw psz::UsageError("--splits expects train,val,test");
  r.train = v[0];
  r.val = v[1];
  r.test = v[2];
  return r;
}

std::vector<std::string> resolve_masks(const Options& o) {
  if (o.masks.empty()) return psz::mask_names();
  for (const auto& m : o.masks) (void)psz::mask_indices(m);
  return o.masks;
}

std::string file_tag(const std::string& mask) {
  std::string t = mask;
  std::replace(t.begin(), t.end(), '#', '_');
  return t;
}

// Dataset plus the split being worked on, loaded once per command.
struct Workset {
  psz::Dataset ds;
  psz::AtfTensor h_ctrl;
  psz::AtfTensor h_mon;
  std::vector<std::size_t> indices;
  std::vector<psz::SampleRecord> samples;

  std::vector<psz::TargetAtf> targets() const {
    std::vector<psz::TargetAtf> t;
    for (const auto& s : samples) t.push_back(s.control_as_target());
    return t;
  }
};

Workset open_workset(const Options& o) {
  if (o.dataset.empty()) throw psz::UsageError("--dataset is required");
  Workset w{psz::Dataset::open(o.dataset), {}, {}, {}, {}};
  if (!o.config.empty()) {
    const auto scene = psz::make_scene(load_config(o));
    if (scene.hash() != w.ds.config_hash())
      throw psz::ValidationError("config hash " + scene.hash() + " does not match dataset hash " +
                                 w.ds.config_hash());
  }
  w.h_ctrl = w.ds.h_ctrl();
  w.h_mon = w.ds.h_mon();
  w.indices = w.ds.split(o.split);
  if (w.indices.empty()) throw psz::ValidationError("split '" + o.split + "' is empty");
  for (auto i : w.indices) w.samples.push_back(w.ds.sample(i));
  return w;
}

psz::TuneOptions tune_options(const Options& o, const Workset& w) {
  psz::TuneOptions t;
  t.ref_speaker = w.ds.ref_speaker();
  t.pm.keep_dark_zone = !o.mask_dark_zone;
  return t;
}

// Pre-filters for one mask: fixed lambda, or tuned to the bAE target.
std::vector<psz::PreFilterSet> solve_mask(const Options& o, const Workset& w,
                                          const std::string& mask, json& lambdas) {
  const auto pattern = psz::mask_indices(mask);
  const auto topt = tune_options(o, w);
  const auto targets = w.targets();
  double lambda = o.lambda;
  if (o.tune) {
    const auto r =
        psz::tune_regularization(w.h_ctrl, w.h_mon, targets, pattern, o.tune_target, o.tune_tol, topt);
    lambda = r.lambda;
    lambdas[mask] = {{"lambda", r.lambda}, {"b_ae_db", r.b_ae}, {"iterations", r.iterations}};
  } else {
    lambdas[mask] = {{"lambda", lambda}};
  }
  auto filters = psz::solve_masked_pm(w.h_ctrl, targets, pattern, lambda, topt.pm);
  for (std::size_t s = 0; s < filters.size(); ++s)
    filters[s].sample = static_cast<long long>(w.indices[s]);
  return filters;
}

json common_params(const Options& o) {
  json p;
  p["config"] = o.config.empty() ? json(nullptr) : json(fs::path(o.config).filename().string());
  p["seed"] = o.seed_set ? json(o.seed) : json(nullptr);
  return p;
}

int cmd_gen_dataset(const Options& o) {
  if (o.out.empty()) throw psz::UsageError("--out is required");
  auto cfg = load_config(o);
  const auto scene = psz::make_scene(cfg);
  psz::GenerateOptions g;
  g.samples = o.n;
  g.seed = o.seed_set ? o.seed : cfg.seed;
  g.splits = parse_splits(o.splits);
  g.threads = thread_count(o);
  const auto manifest = psz::generate_dataset(scene, o.out, g);

  RunLog log(o.out);
  log.add_existing("manifest.json");
  auto p = common_params(o);
  p["seed"] = g.seed;
  p["samples"] = g.samples;
  p["config_hash"] = scene.hash();
  log.finish("gen-dataset", p);

  std::cout << "dataset " << o.out << "\n"
            << "  config_hash " << scene.hash() << "\n"
            << "  samples     " << g.samples << " (train " << manifest["splits"]["train"].size()
            << ", val " << manifest["splits"]["val"].size() << ", test "
            << manifest["splits"]["test"].size() << ")\n"
            << "  freqs       " << scene.freqs.size() << "\n"
            << "  speakers    " << scene.speakers.size() << "\n"
            << "  max_order   " << scene.max_order() << "\n";
  return 0;
}

int cmd_solve_pm(const Options& o) {
  if (o.out.empty()) throw psz::UsageError("--out is required");
  const auto w = open_workset(o);
  RunLog log(o.out);
  json lambdas;
  for (const auto& mask : resolve_masks(o)) {
    for (const auto& a : solve_mask(o, w, mask, lambdas)) {
      char name[64];
      std::snprintf(name, sizeof(name), "sample_%06lld.pszd", a.sample);
      const std::string rel = "prefilters/" + file_tag(mask) + "/" + name;
      psz::write_prefilters(log.root() / rel, a, w.ds.config_hash());
      log.add_existing(rel);
      log.add_existing(rel + ".json");
    }
  }
  log.write("lambda.json", lambdas.dump(2) + "\n");
  auto p = common_params(o);
  p["split"] = o.split;
  p["config_hash"] = w.ds.config_hash();
  log.finish("solve-pm", p);
  std::cout << "wrote pre-filters for " << w.indices.size() << " samples under " << o.out << "\n";
  return 0;
}

int cmd_tune_ae(const Options& o) {
  if (o.out.empty()) throw psz::UsageError("--out is required");
  if (!o.tune) throw psz::UsageError("tune-ae needs --target <dB>");
  const auto w = open_workset(o);
  RunLog log(o.out);
  const auto topt = tune_options(o, w);
  const auto targets = w.targets();
  json lambdas;
  std::ostringstream csv;
  csv << "mask,lambda,b_ae_db,iterations\n";
  for (const auto& mask : resolve_masks(o)) {
    const auto r = psz::tune_regularization(w.h_ctrl, w.h_mon, targets, psz::mask_indices(mask),
                                            o.tune_target, o.tune_tol, topt);
    lambdas[mask] = {{"lambda", r.lambda}, {"b_ae_db", r.b_ae}, {"iterations", r.iterations}};
    csv << mask << ',' << format_g(r.lambda) << ',' << psz::format_fixed(r.b_ae) << ','
        << r.iterations << '\n';
    std::cout << mask << "  lambda " << format_g(r.lambda) << "  bAE " << psz::format_fixed(r.b_ae)
              << " dB\n";
  }
  log.write("lambda.json", lambdas.dump(2) + "\n");
  log.write("tune.csv", csv.str());
  auto p = common_params(o);
  p["split"] = o.split;
  p["target_db"] = o.tune_target;
  p["tolerance_db"] = o.tune_tol;
  p["config_hash"] = w.ds.config_hash();
  log.finish("tune-ae", p);
  return 0;
}

std::vector<fs::path> list_prefilters(const fs::path& root) {
  if (!fs::exists(root)) throw psz::ValidationError("pre-filter path '" + root.string() + "' not found");
  std::vector<fs::path> files;
  if (fs::is_regular_file(root)) return {root};
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".pszd") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw psz::ValidationError("no .pszd files under '" + root.string() + "'");
  return files;
}

int cmd_evaluate(const Options& o) {
  if (o.out.empty()) throw psz::UsageError("--out is required");
  const auto w = open_workset(o);
  const std::size_t mb = w.h_mon.receivers() / 2;
  std::map<std::size_t, std::size_t> pos;
  for (std::size_t s = 0; s < w.indices.size(); ++s) pos[w.indices[s]] = s;

  std::vector<psz::MetricsReport> reports;
  json lambdas;
  auto evaluate = [&](const psz::PreFilterSet& a) {
    const auto it = pos.find(static_cast<std::size_t>(a.sample));
    if (a.sample < 0 || it == pos.end())
      throw psz::ValidationError("pre-filters for sample " + std::to_string(a.sample) +
                                 " are not in split '" + o.split + "'");
    auto r = psz::evaluate_prefilters(w.h_mon, w.samples[it->second].monitor_as_matrix(), a,
                                      w.ds.ref_speaker(), mb);
    r.seed = w.ds.seed();
    r.config_hash = w.ds.config_hash();
    reports.push_back(std::move(r));
  };

  if (!o.prefilters.empty()) {
    for (const auto& f : list_prefilters(o.prefilters)) {
      auto pf = psz::read_prefilters(f, w.ds.speakers());
      if (!pf.config_hash.empty() && pf.config_hash != w.ds.config_hash())
        throw psz::ValidationError(f.string() + ": config hash " + pf.config_hash +
                                   " does not match dataset hash " + w.ds.config_hash());
      if (!(pf.filters.freq_grid == w.ds.freqs()))
        throw psz::ValidationError(f.string() + ": frequency grid differs from the dataset");
      evaluate(pf.filters);
    }
  } else {
    for (const auto& mask : resolve_masks(o))
      for (const auto& a : solve_mask(o, w, mask, lambdas)) evaluate(a);
  }

  std::ostringstream csv;
  csv << psz::kMetricsCsvHeader << '\n';
  json per_sample = json::array();
  for (const auto& r : reports) {
    psz::write_metrics_csv_rows(csv, r, w.ds.freqs());
    per_sample.push_back(psz::to_json(r));
  }
  const auto rows = psz::summarize(reports);
  std::ostringstream summary;
  psz::write_summary_csv(summary, rows);
  json sj;
  sj["config_hash"] = w.ds.config_hash();
  sj["seed"] = w.ds.seed();
  sj["split"] = o.split;
  sj["samples"] = w.indices.size();
  sj["rows"] = json::array();
  for (const auto& r : rows) sj["rows"].push_back(psz::to_json(r));

  RunLog log(o.out);
  log.write("metrics.csv", csv.str());
  log.write("metrics.json", per_sample.dump(2) + "\n");
  log.write("summary.csv", summary.str());
  log.write("summary.json", sj.dump(2) + "\n");
  if (!lambdas.empty()) log.write("lambda.json", lambdas.dump(2) + "\n");
  auto p = common_params(o);
  p["split"] = o.split;
  p["config_hash"] = w.ds.config_hash();
  p["dataset_seed"] = w.ds.seed();
  p["source"] = o.prefilters.empty() ? "pm" : "prefilter-files";
  log.finish("evaluate", p);
  std::cout << summary.str();
  return 0;
}

struct ResultSet {
  std::string label;
  json summary;
};

int cmd_compare(const Options& o) {
  if (o.out.empty()) throw psz::UsageError("--out is required");
  if (o.results.size() < 2) throw psz::UsageError("compare needs at least two --results");
  if (!o.labels.empty() && o.labels.size() != o.results.size())
    throw psz::UsageError("--label count must match --results count");
  std::vector<ResultSet> sets;
  for (std::size_t i = 0; i < o.results.size(); ++i) {
    const fs::path p = fs::path(o.results[i]) / "summary.json";
    if (!fs::exists(p)) throw psz::ValidationError("no summary.json in '" + o.results[i] + "'");
    json s;
    try {
      s = json::parse(psz::read_file(p));
    } catch (const json::exception& e) {
      throw psz::FormatError(p.string() + ": " + e.what());
    }
    sets.push_back({o.labels.empty() ? "set" + std::to_string(i) : o.labels[i], s});
  }
  const std::string hash = sets[0].summary.at("config_hash").get<std::string>();
  for (const auto& s : sets)
    if (s.summary.at("config_hash").get<std::string>() != hash)
      throw psz::ValidationError("result set '" + s.label + "' has config hash " +
                                 s.summary.at("config_hash").get<std::string>() + ", expected " +
                                 hash);

  // Rows keyed by (method, mask) of the first set define the deltas.
  auto key = [](const json& r) {
    return r.at("method").get<std::string>() + "|" + r.at("mask").get<std::string>();
  };
  std::map<std::string, json> base;
  for (const auto& r : sets[0].summary.at("rows")) base[key(r)] = r;

  const char* metrics[] = {"re_b_db", "re_d_db", "ac_db", "b_ae_db"};
  std::ostringstream table;
  table << "set,method,mask,lambda,samples,re_b_db,re_d_db,ac_db,b_ae_db,"
           "d_re_b_db,d_re_d_db,d_ac_db,d_b_ae_db,note\n";
  std::ostringstream plot;
  plot << "set,method,mask,control_points,re_b_db,ac_db\n";
  for (const auto& s : sets) {
    for (const auto& r : s.summary.at("rows")) {
      const std::string mask = r.at("mask").get<std::string>();
      table << s.label << ',' << r.at("method").get<std::string>() << ',' << mask << ','
            << format_g(r.at("lambda").get<double>()) << ',' << r.at("samples").get<std::size_t>();
      for (const char* m : metrics) table << ',' << psz::format_fixed(r.at(m).get<double>());
      const auto b = base.find(key(r));
      for (const char* m : metrics) {
        table << ',';
        if (b != base.end())
          table << psz::format_fixed(r.at(m).get<double>() - b->second.at(m).get<double>());
      }
      table << ",\n";
      std::size_t points = 0;
      try {
        points = psz::mask_indices(mask).point_count();
      } catch (const psz::ValidationError&) {
      }
      plot << s.label << ',' << r.at("method").get<std::string>() << ',' << mask << ',' << points
           << ',' << psz::format_fixed(r.at("re_b_db").get<double>()) << ','
           << psz::format_fixed(r.at("ac_db").get<double>()) << '\n';
    }
  }
  for (const auto& ref : kReferenceRows)
    table << "published," << ref.method << ',' << ref.mask << ",,," << psz::format_fixed(ref.re_b)
          << ',' << psz::format_fixed(ref.re_d) << ',' << psz::format_fixed(ref.ac)
          << ",,,,,,reference only (different simulator and scale; not a target)\n";

  RunLog log(o.out);
  log.write("compare.csv", table.str());
  log.write("plot_data.csv", plot.str());
  auto p = common_params(o);
  p["config_hash"] = hash;
  p["labels"] = json::array();
  for (const auto& s : sets) p["labels"].push_back(s.label);
  log.finish("compare", p);
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personal sound zone toolkit: room simulation, pressure matching, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Scene config file (key = value)");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { o.seed = s, o.seed_set = true; }, "Random seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--threads", o.threads, "Worker threads (0: all cores)");

  auto* gen = app.add_subcommand("gen-dataset", "Simulate ATFs and virtual-source targets");
  gen->add_option("--n", o.n, "Number of virtual sources")->check(CLI::PositiveNumber);
  gen->add_option("--num-freqs", o.num_freqs, "Frequency bins (overrides config)");
  gen->add_option("--max-order", o.max_order, "Image-source order (-1: from RT60)");
  gen->add_option("--splits", o.splits, "train,val,test fractions");

  auto add_solver_flags = [&](CLI::App* c) {
    c->add_option("--dataset", o.dataset, "Dataset directory")->required();
    c->add_option("--split", o.split, "train, val, test or all");
    c->add_option("--mask", o.masks, "Mask name (repeatable; default: all)");
    c->add_flag("--mask-dark-zone", o.mask_dark_zone,
                "Apply the mask to the dark-zone control points as well");
  };
  auto add_lambda_flags = [&](CLI::App* c) {
    auto* lam = c->add_option("--lambda", o.lambda, "Regularization (default 1e-2)");
    auto* tune = c->add_option_function<double>(
        "--tune-ae", [&](double t) { o.tune = true, o.tune_target = t; },
        "Tune lambda per mask to this mean bAE (dB)");
    lam->excludes(tune);
    c->add_option("--tune-tol", o.tune_tol, "bAE tolerance in dB");
  };

  auto* solve = app.add_subcommand("solve-pm", "Write masked PM pre-filters");
  add_solver_flags(solve);
  add_lambda_flags(solve);

  auto* tune = app.add_subcommand("tune-ae", "Find the lambda matching a bAE target");
  add_solver_flags(tune);
  tune->add_option_function<double>(
      "--target", [&](double t) { o.tune = true, o.tune_target = t; }, "Target mean bAE (dB)")
      ->required();
  tune->add_option("--tune-tol", o.tune_tol, "bAE tolerance in dB");

  auto* eval = app.add_subcommand("evaluate", "Metrics of PM or external pre-filters");
  add_solver_flags(eval);
  add_lambda_flags(eval);
  eval->add_option("--prefilters", o.prefilters, "Pre-filter file or directory to evaluate");

  auto* cmp = app.add_subcommand("compare", "Side-by-side table of evaluated result sets");
  cmp->add_option("--results", o.results, "Evaluate output directory (repeatable)")->required();
  cmp->add_option("--label", o.labels, "Label per result set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_dataset(o);
    if (*solve) return cmd_solve_pm(o);
    if (*tune) return cmd_tune_ae(o);
    if (*eval) return cmd_evaluate(o);
    if (*cmp) return cmd_compare(o);
  } catch (const psz::UsageError& e) {
    std::cerr << "psz: usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const psz::ValidationError& e) {
    std::cerr << "psz: invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const psz::NumericalError& e) {
    std::cerr << "psz: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "psz: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "psz: malformed JSON: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
