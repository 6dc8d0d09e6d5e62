#pragma once

// Command-line front end: ingest, train, evaluate, ablate, calibrate,
// downscale and synth. dispatch() returns 0 on success, 1 on runtime or
// configuration errors and 2 on usage errors.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "loadscale/checkpoint.hpp"
#include "loadscale/config.hpp"
#include "loadscale/eval.hpp"
#include "loadscale/hierarchy.hpp"
#include "loadscale/ingest.hpp"
#include "loadscale/train.hpp"
#include "loadscale/uncertainty.hpp"

#ifndef LOADSCALE_VERSION
#define LOADSCALE_VERSION "0.0.0"
#endif

namespace loadscale::cli {

namespace fs = std::filesystem;

inline std::string build_info() {
  std::ostringstream os;
  os << "loadscale " << LOADSCALE_VERSION << " (C++" << __cplusplus / 100 % 100 << ", Eigen " << EIGEN_WORLD_VERSION
     << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << ", nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR
     << '.' << NLOHMANN_JSON_VERSION_MINOR << '.' << NLOHMANN_JSON_VERSION_PATCH << ")";
  return os.str();
}

// Flags shared by the data-reading subcommands; each overrides its config key.
struct Overrides {
  std::string config;
  std::optional<std::string> data, region, time_col, load_col, time_fmt, aggregation;
  std::optional<std::uint64_t> seed;
  std::optional<int> K, epochs, windows, stride, offset;
  std::optional<double> lr, alpha, train_fraction;

  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : load_run_config(config);
    apply(c);
    return c;
  }

  void apply(RunConfig& c) const {
    if (data) c.data.path = *data;
    if (region) c.data.region = *region;
    if (time_col) c.data.csv.time_col = *time_col;
    if (load_col) c.data.csv.load_col = *load_col;
    if (time_fmt) c.data.csv.time_fmt = *time_fmt;
    if (aggregation) c.aggregation = parse_aggregation(*aggregation, "--aggregation");
    if (seed) c.seed = *seed;
    if (K) c.K = *K;
    if (epochs) c.train.epochs = *epochs;
    if (windows) c.eval.windows.n_windows = *windows;
    if (stride) c.eval.windows.stride = *stride;
    if (offset) c.eval.windows.offset = *offset;
    if (lr) c.train.lr = *lr;
    if (alpha) c.eval.alpha = *alpha;
    if (train_fraction) c.train_fraction = *train_fraction;
    c.sync();
    c.validate();
  }
};

inline void add_data_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  app->add_option("--data", o.data, "hourly load CSV");
  app->add_option("--region", o.region, "region id (load column defaults to <region>_MW)");
  app->add_option("--time-col", o.time_col, "datetime column name");
  app->add_option("--load-col", o.load_col, "load column name");
  app->add_option("--time-fmt", o.time_fmt, "datetime format (strftime syntax)");
  app->add_option("--seed", o.seed, "root seed");
}

inline void add_window_flags(CLI::App* app, Overrides& o) {
  app->add_option("--windows", o.windows, "number of rolling windows");
  app->add_option("--stride", o.stride, "sub-periods between windows (multiple of K)");
  app->add_option("--offset", o.offset, "first target period within the test partition");
  app->add_option("--alpha", o.alpha, "interval miscoverage level");
}

inline void add_model_flags(CLI::App* app, Overrides& o) {
  app->add_option("-K,--K", o.K, "sub-periods per period");
  app->add_option("--aggregation", o.aggregation, "mean or sum")->check(CLI::IsMember({"mean", "sum"}));
  app->add_option("--train-fraction", o.train_fraction, "chronological training share");
  app->add_option("--epochs", o.epochs, "training epochs");
  app->add_option("--lr", o.lr, "Adam learning rate");
}

// Outputs are always new files; refuse to write over an input.
inline void ensure_not_input(const std::string& out, const std::vector<std::string>& inputs) {
  std::error_code ec;
  const auto o = fs::weakly_canonical(out, ec);
  for (const auto& in : inputs) {
    if (in.empty()) continue;
    if (fs::weakly_canonical(in, ec) == o) throw ConfigError("--out", "would overwrite input " + in);
  }
}

inline void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

inline RawSeries load_series(const RunConfig& c) {
  if (c.data.path.empty()) throw ConfigError("data.path", "required (pass --data)");
  return clean(load_csv(c.data.path, c.data.region, c.data.csv));
}

// Chronological split normalized with given statistics.
inline SplitDatasets split_with_stats(const std::vector<PeriodPair>& pairs, double train_fraction, int K,
                                      const NormalizationStats& stats) {
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(pairs.size())));
  const std::vector<PeriodPair> train(pairs.begin(), pairs.begin() + static_cast<long>(n_train));
  const std::vector<PeriodPair> test(pairs.begin() + static_cast<long>(n_train), pairs.end());
  return {normalize(train, stats, K, SplitTag::Train), normalize(test, stats, K, SplitTag::Test)};
}

inline std::string variant_label(const ModelConfig& m) {
  if (m.use_fourier && m.use_attention) return variant_name(Variant::FourierRnn);
  if (m.use_attention) return variant_name(Variant::RnnAttention);
  if (!m.use_fourier) return variant_name(Variant::SimpleRnn);
  return "fourier_rnn_no_attn";
}

inline json report_to_json(const EvalReport& r, const RunConfig& c) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json j = {{"variant", r.variant}, {"seed", r.seed}, {"config_hash", config_hash(c)}, {"failed", r.failed}};
  if (r.failed) {
    j["error"] = r.error;
  } else {
    j["rmse_by_horizon"] = vec(r.rmse_by_horizon);
    j["mean_rmse"] = r.mean_rmse;
    j["rejection"] = {{"mean", r.rejection.mean},
                      {"max", r.rejection.max},
                      {"min", r.rejection.min},
                      {"per_h", vec(r.rejection.per_h)}};
  }
  if (r.variant == variant_name(Variant::HarmonicBaseline))
    j["note"] = "least-squares harmonic regression, a stand-in for Prophet-style baselines";
  j["config"] = to_json(c);
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed for " + path);
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Subcommands

struct SynthArgs {
  int days = 160;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<double> level, slope, noise;
  std::vector<std::string> harmonics;
  std::string region = "SYNTH";
  std::string start = "2020-01-01";
};

// "amplitude:period[:phase]", period and phase in hours
inline SynthHarmonic parse_harmonic(const std::string& s) {
  SynthHarmonic h;
  char sep1 = 0, sep2 = 0;
  std::istringstream is(s);
  if (!(is >> h.amplitude >> sep1 >> h.period) || sep1 != ':' || !(h.period > 0.0))
    throw ConfigError("--harmonic", "expected amplitude:period[:phase], got '" + s + "'");
  if (is >> sep2) {
    if (sep2 != ':' || !(is >> h.phase)) throw ConfigError("--harmonic", "bad phase in '" + s + "'");
  }
  return h;
}

inline int run_synth(const SynthArgs& a, std::ostream& out) {
  SynthSpec spec;
  spec.n_days = a.days;
  spec.region = a.region;
  if (a.level) spec.level = *a.level;
  if (a.slope) spec.slope = *a.slope;
  if (a.noise) spec.noise_sd = *a.noise;
  if (!a.harmonics.empty()) {
    spec.harmonics.clear();
    for (const auto& h : a.harmonics) spec.harmonics.push_back(parse_harmonic(h));
  }
  const auto start = parse_hour(a.start + " 00:00:00", "%Y-%m-%d %H:%M:%S");
  if (!start) throw ConfigError("--start", "expected YYYY-MM-DD");
  spec.start = *start;
  std::ostringstream os;
  write_csv(os, synth_generate(spec, a.seed));
  write_text(a.out, os.str());
  out << "wrote " << spec.n_days * 24 << " hourly rows to " << a.out << '\n';
  return 0;
}

inline int run_ingest(const Overrides& o, const std::string& out_dir, std::ostream& out) {
  const auto c = o.resolve();
  const auto series = load_series(c);
  const auto pairs = make_pairs(series, c.K, c.aggregation);
  const auto split = split_and_normalize(pairs, c.train_fraction, c.K);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  ensure_not_input((dir / "clean.csv").string(), {c.data.path});

  std::ostringstream clean_csv;
  write_csv(clean_csv, series, c.data.csv.time_col);
  write_text((dir / "clean.csv").string(), clean_csv.str());

  std::ostringstream pcsv;
  pcsv << "period,start,split,x0";
  for (int s = 0; s < c.K; ++s) pcsv << ",y" << s;
  pcsv << '\n';
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    pcsv << p.t << ',' << format_hour(p.start) << ',' << (i < split.train.size() ? "train" : "test") << ','
         << fmt(p.x0);
    for (int s = 0; s < c.K; ++s) pcsv << ',' << fmt(p.y[s]);
    pcsv << '\n';
  }
  write_text((dir / "pairs.csv").string(), pcsv.str());
  json stats = to_json(split.train.stats);
  stats["n_train"] = split.train.size();
  stats["n_test"] = split.test.size();
  stats["K"] = c.K;
  stats["aggregation"] = to_string(c.aggregation);
  write_text((dir / "stats.json").string(), stats.dump(1) + "\n");
  out << "ingested " << series.records.size() << " hours into " << pairs.size() << " periods (" << split.train.size()
      << " train, " << split.test.size() << " test)\n";
  return 0;
}

inline std::string default_history_path(const std::string& checkpoint) {
  fs::path p(checkpoint);
  p.replace_extension(".history.csv");
  return p.string();
}

inline int run_train_single(const RunConfig& c, const std::string& out_path, std::string history_path,
                            std::ostream& out) {
  const auto series = load_series(c);
  const auto split = split_and_normalize(make_pairs(series, c.K, c.aggregation), c.train_fraction, c.K);
  const auto fitted = fit(split.train, c.model, c.features, c.train);

  Checkpoint ck;
  ck.model = TrainedModel{c.model, c.features, split.train.stats, c.aggregation, fitted.params, c.seed};
  ck.residuals = training_residuals(fitted.params, c.model, c.features, split.train);
  ck.run = c;
  ensure_parent(out_path);
  save_checkpoint(out_path, ck);

  if (history_path.empty()) history_path = default_history_path(out_path);
  ensure_not_input(history_path, {c.data.path});
  std::ostringstream h;
  h << "epoch,loss_data,loss_harm,loss_total\n";
  for (const auto& r : fitted.history) h << r.epoch << ',' << fmt(r.data) << ',' << fmt(r.harm) << ',' << fmt(r.total()) << '\n';
  write_text(history_path, h.str());

  out << "trained " << variant_label(c.model) << " on " << split.train.size() << " periods";
  if (!fitted.history.empty())
    out << ", loss " << fitted.history.front().total() << " -> " << fitted.history.back().total();
  out << "\nwrote " << out_path << " and " << history_path << '\n';
  return 0;
}

// Trains on the whole series: the stage datasets are re-aggregations of it.
inline int run_train_hierarchy(const RunConfig& c, const std::string& out_path, std::ostream& out) {
  const auto& h = c.hierarchy;
  if (h.stages.empty()) throw ConfigError("hierarchy.stages", "at least one stage required");
  const auto series = load_series(c);
  std::vector<double> fine;
  fine.reserve(series.records.size());
  for (const auto& r : series.records) fine.push_back(*r.load);
  std::vector<int> Ks;
  for (const auto& s : h.stages) Ks.push_back(s.K);
  const auto levels = build_levels(fine, Ks, c.aggregation);

  PipelineFile pf;
  pf.mode = h.mode;
  if (h.mode == HierarchyMode::Hierarchical) {
    pf.pipeline = train_pipeline(h.stages, levels, c.model, c.train, c.aggregation, BlendConfig{h.blend_alpha});
  } else {
    if (h.stages.size() < 2) throw ConfigError("hierarchy.stages", "rnn_enhanced needs a base level and a refiner");
    // The refiner is the last stage; everything above it is the base.
    const auto& spec = h.stages.back();
    const auto& mid = levels[levels.size() - 2];
    long base_K = 1;
    for (std::size_t i = 0; i + 1 < h.stages.size(); ++i) base_K *= h.stages[i].K;
    pf.base = h.base;
    pf.base_K = static_cast<int>(base_K);
    if (h.base == BaseKind::Harmonic)
      pf.base_regression = HarmonicBaseDownscaler::fit(mid, pf.base_K, c.aggregation, h.base_terms).regression();
    const auto real = level_pairs(mid, levels.back(), spec.K);
    pf.pipeline.aggregation = c.aggregation;
    pf.pipeline.stages.push_back({spec.name, fit_stage(real, mid, spec, c.model, c.train, c.aggregation)});
  }
  ensure_parent(out_path);
  ensure_not_input(out_path, {c.data.path});
  save_pipeline(out_path, pf);
  out << "trained " << to_string(h.mode) << " pipeline with " << pf.pipeline.stages.size() << " stage(s), expansion "
      << pf.expansion() << "\nwrote " << out_path << '\n';
  return 0;
}

struct LoadedEval {
  RunConfig config;
  Checkpoint ck;
  SplitDatasets split;
};

// Re-creates the training/test partitions a checkpoint was trained on.
inline LoadedEval load_for_eval(const Overrides& o, const std::string& checkpoint) {
  LoadedEval le;
  le.ck = load_checkpoint(checkpoint);
  le.config = le.ck.run ? *le.ck.run : RunConfig{};
  if (!o.config.empty()) le.config = load_run_config(o.config);
  o.apply(le.config);
  const auto& m = le.ck.model;
  const auto pairs = make_pairs(load_series(le.config), m.model.K, m.aggregation);
  le.split = split_with_stats(pairs, le.config.train_fraction, m.model.K, m.stats);
  return le;
}

inline EvalReport evaluate_checkpoint(const LoadedEval& le) {
  const auto& m = le.ck.model;
  const auto fc = rolling_forecast(m.params, m.model, m.features, le.split.test, le.config.eval.windows);
  const auto rm = le.ck.residuals ? *le.ck.residuals : training_residuals(m.params, m.model, m.features, le.split.train);
  return make_report(variant_label(m.model), m.seed, fc, rm, le.config.eval.alpha);
}

inline int run_evaluate(const Overrides& o, const std::string& checkpoint, const std::string& out_path,
                        std::ostream& out) {
  const auto le = load_for_eval(o, checkpoint);
  ensure_not_input(out_path, {checkpoint, le.config.data.path});
  const auto r = evaluate_checkpoint(le);
  write_text(out_path, report_to_json(r, le.config).dump(1) + "\n");
  out << r.variant << ": mean RMSE " << r.mean_rmse << " over " << le.config.eval.windows.n_windows
      << " windows, mean rejection " << r.rejection.mean << "\nwrote " << out_path << '\n';
  return 0;
}

inline int run_calibrate(const Overrides& o, const std::string& checkpoint, const std::string& out_dir,
                         std::ostream& out) {
  const auto le = load_for_eval(o, checkpoint);
  const auto r = evaluate_checkpoint(le);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "h,r_h\n";
  for (Eigen::Index h = 0; h < r.rejection.per_h.size(); ++h) csv << h << ',' << fmt(r.rejection.per_h[h]) << '\n';
  write_text((dir / "calibration.csv").string(), csv.str());
  const json summary = {{"mean", r.rejection.mean},
                        {"max", r.rejection.max},
                        {"min", r.rejection.min},
                        {"alpha", le.config.eval.alpha},
                        {"windows", le.config.eval.windows.n_windows},
                        {"variant", r.variant},
                        {"seed", r.seed},
                        {"config_hash", config_hash(le.config)}};
  write_text((dir / "calibration.json").string(), summary.dump(1) + "\n");
  out << "rejection rate mean " << r.rejection.mean << " (min " << r.rejection.min << ", max " << r.rejection.max
      << ") at alpha " << le.config.eval.alpha << "\nwrote " << (dir / "calibration.csv").string() << '\n';
  return 0;
}

inline int run_ablate(const Overrides& o, int n_seeds, const std::vector<std::string>& variant_names,
                      const std::string& out_dir, std::ostream& out) {
  if (n_seeds < 1) throw ConfigError("--seeds", "must be >= 1");
  const auto c = o.resolve();
  std::vector<Variant> variants;
  for (const auto& name : variant_names) {
    const auto v = parse_variant(name);
    if (!v) throw ConfigError("--variants", "unknown variant '" + name + "'");
    variants.push_back(*v);
  }
  const auto split = split_and_normalize(make_pairs(load_series(c), c.K, c.aggregation), c.train_fraction, c.K);
  AblationSetup setup{split.train, split.test, c.features, c.model, c.train, c.eval.windows, c.eval.alpha,
                      c.baseline_terms};
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_seeds; ++i) seeds.push_back(c.seed + static_cast<std::uint64_t>(i));

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::ostringstream summary, curves;
  summary << "variant,seed,mean_rmse,rejection_mean,failed\n";
  curves << "variant,seed,h,rmse\n";
  for (auto seed : seeds)
    for (auto v : variants) {
      const auto r = run_variant(setup, v, seed);
      auto rc = c;
      rc.seed = seed;
      rc.sync();
      write_text((dir / ("report_" + r.variant + "_seed" + std::to_string(seed) + ".json")).string(),
                 report_to_json(r, rc).dump(1) + "\n");
      summary << r.variant << ',' << seed << ',' << (r.failed ? "nan" : fmt(r.mean_rmse)) << ','
              << (r.failed ? "nan" : fmt(r.rejection.mean)) << ',' << (r.failed ? 1 : 0) << '\n';
      if (!r.failed)
        for (Eigen::Index h = 0; h < r.rmse_by_horizon.size(); ++h)
          curves << r.variant << ',' << seed << ',' << h << ',' << fmt(r.rmse_by_horizon[h]) << '\n';
      out << r.variant << " seed " << seed << ": "
          << (r.failed ? "failed (" + r.error + ")" : "mean RMSE " + fmt(r.mean_rmse)) << '\n';
    }
  write_text((dir / "summary.csv").string(), summary.str());
  write_text((dir / "rmse_by_horizon.csv").string(), curves.str());
  out << "wrote " << dir.string() << '\n';
  return 0;
}

// Input CSV: header then rows "period,value" with consecutive periods.
inline std::pair<long, std::vector<double>> read_coarse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  std::vector<double> values;
  long first = 0, prev = 0;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() < 2) throw DataError(path + ":" + std::to_string(row) + ": expected period,value");
    long period = 0;
    double value = 0.0;
    try {
      period = std::stol(cells[0]);
      value = std::stod(cells[1]);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(row) + ": unparseable row");
    }
    if (values.empty())
      first = period;
    else if (period != prev + 1)
      throw DataError(path + ":" + std::to_string(row) + ": periods must be consecutive");
    prev = period;
    values.push_back(value);
  }
  if (values.empty()) throw DataError(path + ": no rows");
  return {first, values};
}

inline int run_downscale(const std::string& pipeline, const std::string& input, const std::string& reconcile,
                         const std::string& out_path, std::ostream& out) {
  ensure_not_input(out_path, {pipeline, input});
  const auto pf = load_pipeline(pipeline);
  const auto [first, coarse] = read_coarse_csv(input);
  const auto fine = run_pipeline(pf, coarse, first, reconcile == "on");
  const long k = pf.expansion();
  std::ostringstream os;
  os << "index,value\n";
  for (std::size_t i = 0; i < fine.size(); ++i) os << first * k + static_cast<long>(i) << ',' << fmt(fine[i]) << '\n';
  write_text(out_path, os.str());
  out << "downscaled " << coarse.size() << " values to " << fine.size() << "\nwrote " << out_path << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Temporal downscaling of load series with a Fourier-enhanced recurrent network", "loadscale"};
  app.set_version_flag("--version", build_info());
  app.require_subcommand(1);

  Overrides o;
  std::string out_path, checkpoint, history, pipeline, input, reconcile = "off";
  bool hierarchy = false;
  int n_seeds = 3;
  std::vector<std::string> variants{"simple_rnn", "rnn_attn", "fourier_rnn", "harmonic_baseline"};
  SynthArgs synth;

  auto* ingest = app.add_subcommand("ingest", "clean an hourly CSV and write period pairs and statistics");
  add_data_flags(ingest, o);
  ingest->add_option("-K,--K", o.K, "sub-periods per period");
  ingest->add_option("--aggregation", o.aggregation, "mean or sum")->check(CLI::IsMember({"mean", "sum"}));
  ingest->add_option("--train-fraction", o.train_fraction, "chronological training share");
  ingest->add_option("--out", out_path, "output directory")->required();

  auto* train = app.add_subcommand("train", "fit a model (or a hierarchy of stage models) and write a checkpoint");
  add_data_flags(train, o);
  add_model_flags(train, o);
  train->add_option("--out", out_path, "checkpoint (or pipeline) file")->required();
  train->add_option("--history", history, "loss history CSV (default: <out>.history.csv)");
  train->add_flag("--hierarchy", hierarchy, "train the configured stage pipeline on all data");

  auto* evaluate = app.add_subcommand("evaluate", "rolling-window RMSE and interval rejection on the test partition");
  add_data_flags(evaluate, o);
  add_window_flags(evaluate, o);
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out_path, "report JSON")->required();

  auto* ablate = app.add_subcommand("ablate", "train and evaluate every variant across seeds");
  add_data_flags(ablate, o);
  add_model_flags(ablate, o);
  add_window_flags(ablate, o);
  ablate->add_option("--seeds", n_seeds, "number of seeds (root seed, root + 1, ...)");
  ablate->add_option("--variants", variants, "variants to run")->delimiter(',');
  ablate->add_option("--out", out_path, "output directory")->required();

  auto* calibrate = app.add_subcommand("calibrate", "per-horizon interval rejection rates");
  add_data_flags(calibrate, o);
  add_window_flags(calibrate, o);
  calibrate->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--out", out_path, "output directory")->required();

  auto* down = app.add_subcommand("downscale", "run a trained pipeline on coarse values");
  down->add_option("--pipeline", pipeline, "pipeline file")->required()->check(CLI::ExistingFile);
  down->add_option("--input", input, "CSV with header and rows period,value")->required()->check(CLI::ExistingFile);
  down->add_option("--reconcile", reconcile, "rescale blocks to their drivers")->check(CLI::IsMember({"on", "off"}));
  down->add_option("--out", out_path, "output CSV")->required();

  auto* syn = app.add_subcommand("synth", "generate a synthetic hourly load CSV");
  syn->add_option("--days", synth.days, "number of days");
  syn->add_option("--seed", synth.seed, "root seed");
  syn->add_option("--out", synth.out, "output CSV")->required();
  syn->add_option("--level", synth.level, "mean level");
  syn->add_option("--slope", synth.slope, "trend per hour");
  syn->add_option("--noise", synth.noise, "noise standard deviation");
  syn->add_option("--harmonic", synth.harmonics, "amplitude:period[:phase] in hours (repeatable)");
  syn->add_option("--region", synth.region, "region id");
  syn->add_option("--start", synth.start, "first day, YYYY-MM-DD");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 2;
  }

  try {
    if (*ingest) return run_ingest(o, out_path, out);
    if (*train) {
      auto c = o.resolve();
      ensure_not_input(out_path, {c.data.path});
      return hierarchy ? run_train_hierarchy(c, out_path, out) : run_train_single(c, out_path, history, out);
    }
    if (*evaluate) return run_evaluate(o, checkpoint, out_path, out);
    if (*ablate) return run_ablate(o, n_seeds, variants, out_path, out);
    if (*calibrate) return run_calibrate(o, checkpoint, out_path, out);
    if (*down) return run_downscale(pipeline, input, reconcile, out_path, out);
    if (*syn) return run_synth(synth, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace loadscale::cli
