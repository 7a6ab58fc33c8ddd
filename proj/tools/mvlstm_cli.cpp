// SPDX-License-Identifier: Apache-2.0
/**
 * @file   mvlstm_cli.cpp
 * @brief  Command-line front end over the C API.
 *
 * Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
 * Log verbosity: MVLSTM_LOG=error|warn|info|debug.
 */

#include <mvlstm/mvlstm.h>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr double kGradTolerance = 1e-4;

int exit_code(mvl_status s) {
  switch (s) {
  case MVL_OK: return 0;
  case MVL_ERR_INVALID_ARGUMENT:
  case MVL_ERR_CONFIG: return kUsage;
  default: return kRuntime;
  }
}

int report(mvl_status s) {
  if (s != MVL_OK)
    std::cerr << "mvlstm: " << mvl_status_name(s) << ": " << mvl_last_error()
              << '\n';
  return exit_code(s);
}

int usage_error(const std::string &msg) {
  std::cerr << "mvlstm: " << msg << '\n';
  return kUsage;
}

bool write_file(const std::string &path, const char *text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  return static_cast<bool>(out);
}

std::string flag_for(std::string key) {
  for (char &c : key)
    if (c == '_')
      c = '-';
  return "--" + key;
}

std::string sibling(const std::string &path, const std::string &suffix) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + suffix;
  return path.substr(0, dot) + suffix;
}

struct Owned {
  char *p = nullptr;
  ~Owned() { mvl_string_free(p); }
};

struct GenerateArgs {
  std::uint64_t seed = 0;
  std::size_t length = 0;
  std::size_t n_exo = 10;
  std::string out, manifest;
  std::vector<double> gains;
};

int run_generate(const GenerateArgs &a) {
  if (a.n_exo < 4)
    return usage_error("--n-exo must be at least 4 (variables 2 and 3 drive "
                       "the target), got " + std::to_string(a.n_exo));
  if (a.length <= 105)
    return usage_error("--length must exceed 105 (100 burn-in steps)");
  if (!a.gains.empty() && a.gains.size() != 2)
    return usage_error("--gains takes exactly two values");
  const std::string manifest =
    a.manifest.empty() ? sibling(a.out, ".manifest.json") : a.manifest;
  const mvl_status s =
    mvl_generate(a.seed, a.length, a.n_exo,
                 a.gains.empty() ? nullptr : a.gains.data(), a.out.c_str(),
                 manifest.c_str());
  if (s == MVL_OK)
    std::cout << "wrote " << a.out << " (" << a.length - 100 << " rows) and "
              << manifest << '\n';
  return report(s);
}

struct TrainArgs {
  std::string config, data, checkpoint, log;
  std::map<std::string, std::string> overrides;
};

int run_train(const TrainArgs &a) {
  mvl_config *cfg = nullptr;
  mvl_status s = a.config.empty() ? mvl_config_new(&cfg)
                                  : mvl_config_from_file(a.config.c_str(), &cfg);
  if (s != MVL_OK)
    return report(s);
  for (const auto &[key, value] : a.overrides)
    if ((s = mvl_config_set(cfg, key.c_str(), value.c_str())) != MVL_OK) {
      mvl_config_free(cfg);
      return report(s);
    }
  const std::string log = a.log.empty() ? sibling(a.checkpoint, ".log.csv")
                                        : a.log;
  double rmse = 0.0;
  s = mvl_train(cfg, a.data.c_str(), a.checkpoint.c_str(), log.c_str(), &rmse);
  mvl_config_free(cfg);
  if (s == MVL_OK) {
    std::printf("best_valid_rmse %.17g\n", rmse);
    std::printf("checkpoint %s\nlog %s\n", a.checkpoint.c_str(), log.c_str());
  }
  return report(s);
}

struct EvalArgs {
  std::string checkpoint, data, split = "test", out, histograms;
  std::size_t bins = 50;
  std::size_t threads = 0;
};

int run_eval(const EvalArgs &a) {
  mvl_model *model = nullptr;
  mvl_status s = mvl_model_load(a.checkpoint.c_str(), &model);
  if (s != MVL_OK)
    return report(s);
  Owned json;
  s = mvl_evaluate(model, a.data.c_str(), a.split.c_str(), a.threads, &json.p);
  mvl_model_free(model);
  if (s != MVL_OK)
    return report(s);
  std::cout << json.p;
  if (!a.out.empty() && !write_file(a.out, json.p))
    return usage_error("cannot write " + a.out), kRuntime;
  return 0;
}

int run_interpret(const EvalArgs &a) {
  if (a.bins < 2)
    return usage_error("--bins must be at least 2, got " +
                       std::to_string(a.bins));
  mvl_model *model = nullptr;
  mvl_status s = mvl_model_load(a.checkpoint.c_str(), &model);
  if (s != MVL_OK)
    return report(s);
  Owned json, csv;
  s = mvl_interpret(model, a.data.c_str(), a.split.c_str(), a.bins, a.threads,
                    &json.p, &csv.p);
  mvl_model_free(model);
  if (s != MVL_OK)
    return report(s);
  const std::string hist =
    a.histograms.empty() ? sibling(a.out, ".histograms.csv") : a.histograms;
  if (!write_file(a.out, json.p) || !write_file(hist, csv.p)) {
    std::cerr << "mvlstm: cannot write " << a.out << " or " << hist << '\n';
    return kRuntime;
  }
  std::cout << "report " << a.out << "\nhistograms " << hist << '\n';
  return 0;
}

struct GradArgs {
  std::size_t n = 3, d = 4, t = 5;
  std::uint64_t seed = 0;
  std::string variant = "mvlstm";
  double corrupt = 0.0;
};

int run_gradcheck(const GradArgs &a) {
  std::vector<std::string> variants;
  if (a.variant == "all")
    variants = {"mvlstm", "mvfusion", "mvindep", "vanilla"};
  else
    variants = {a.variant};
  int code = 0;
  for (const auto &v : variants) {
    double err = 0.0;
    const mvl_status s =
      mvl_gradcheck(v.c_str(), a.n, a.d, a.t, a.seed, a.corrupt, &err);
    if (s != MVL_OK)
      return report(s);
    const bool ok = err <= kGradTolerance;
    std::printf("%s max_rel_error %.6e %s\n", v.c_str(), err,
                ok ? "ok" : "FAIL");
    if (!ok)
      code = kRuntime;
  }
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"MV-LSTM forecasting with mixture attention"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mvl_version());

  GenerateArgs gen;
  auto *g = app.add_subcommand("generate", "write a synthetic dataset");
  g->add_option("--seed", gen.seed, "random seed");
  g->add_option("--length", gen.length, "simulated steps incl. 100 burn-in")
    ->required();
  g->add_option("--n-exo", gen.n_exo, "number of exogenous series");
  g->add_option("--out", gen.out, "output CSV")->required();
  g->add_option("--manifest", gen.manifest,
                "ground-truth JSON (default <out>.manifest.json)");
  g->add_option("--gains", gen.gains, "override the two coupling gains")
    ->delimiter(',');

  TrainArgs tr;
  auto *t = app.add_subcommand("train", "fit a model");
  t->add_option("--config", tr.config, "JSON run configuration");
  t->add_option("--data", tr.data, "CSV data")->required();
  t->add_option("--out-checkpoint", tr.checkpoint, "checkpoint JSON")
    ->required();
  t->add_option("--log", tr.log, "training log CSV (default <ckpt>.log.csv)");
  std::vector<std::pair<std::string, std::string>> override_slots;
  for (std::size_t i = 0; const char *key = mvl_config_key(i); ++i)
    override_slots.emplace_back(key, "");
  for (auto &[key, value] : override_slots)
    t->add_option(flag_for(key), value, "override config field " + key);

  EvalArgs ev;
  auto *e = app.add_subcommand("eval", "forecast metrics on one split");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--split", ev.split, "train|valid|test|all");
  e->add_option("--out", ev.out, "also write the metrics JSON here");
  e->add_option("--threads", ev.threads, "worker threads (0: checkpoint)");

  EvalArgs in;
  auto *i = app.add_subcommand("interpret", "variable importance report");
  i->add_option("--checkpoint", in.checkpoint)->required();
  i->add_option("--data", in.data)->required();
  i->add_option("--split", in.split, "train|valid|test|all");
  i->add_option("--bins", in.bins, "histogram bins over [0,1]");
  i->add_option("--out", in.out, "report JSON")->required();
  i->add_option("--histograms", in.histograms,
                "histogram CSV (default <out>.histograms.csv)");
  i->add_option("--threads", in.threads, "worker threads (0: checkpoint)");

  GradArgs gr;
  auto *c = app.add_subcommand("gradcheck", "finite-difference self check");
  c->add_option("--n", gr.n, "variables");
  c->add_option("--d", gr.d, "units per variable");
  c->add_option("--t", gr.t, "sequence length");
  c->add_option("--seed", gr.seed);
  c->add_option("--variant", gr.variant, "mvlstm|mvfusion|mvindep|vanilla|all");
  c->add_option("--corrupt", gr.corrupt, "bias added to one gradient entry")
    ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kUsage;
  }

  if (g->parsed())
    return run_generate(gen);
  if (t->parsed()) {
    for (const auto &[key, value] : override_slots)
      if (t->count(flag_for(key)))
        tr.overrides[key] = value;
    return run_train(tr);
  }
  if (e->parsed())
    return run_eval(ev);
  if (i->parsed())
    return run_interpret(in);
  if (c->parsed())
    return run_gradcheck(gr);
  return kUsage;
}
