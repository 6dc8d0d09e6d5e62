#pragma once

// RunConfig: the single structured file that drives a full run, with JSON
// (de)serialization. Parsing reports the dotted path of any bad key.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loadscale/baseline.hpp"
#include "loadscale/error.hpp"
#include "loadscale/eval.hpp"
#include "loadscale/features.hpp"
#include "loadscale/hierarchy.hpp"
#include "loadscale/ingest.hpp"
#include "loadscale/model.hpp"
#include "loadscale/seed.hpp"
#include "loadscale/train.hpp"

namespace loadscale {

using json = nlohmann::json;

struct DataConfig {
  std::string path;
  std::string region = "SYNTH";
  CsvOptions csv;

  bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
  WindowSpec windows;
  double alpha = 0.05;

  bool operator==(const EvalConfig&) const = default;
};

enum class HierarchyMode { Hierarchical, RnnEnhanced };
enum class BaseKind { Harmonic, Uniform };

struct HierarchyConfig {
  HierarchyMode mode = HierarchyMode::Hierarchical;
  double blend_alpha = 1.0;
  bool reconcile = false;
  std::vector<StageSpec> stages{{"year-day", 365, {{{1.0, 2}}, 365, 0.0}},
                                {"day-hour", 24, {{{7.0, 8}}, 24, 0.0}}};
  // rnn_enhanced only: the year -> day base and its regression terms (in days)
  BaseKind base = BaseKind::Harmonic;
  std::vector<HarmonicTerm> base_terms{{365.0, 3}, {7.0, 3}};

  bool operator==(const HierarchyConfig&) const = default;
};

struct RunConfig {
  DataConfig data;
  int K = 24;
  Aggregation aggregation = Aggregation::Mean;
  double train_fraction = 0.8;
  FeatureSpec features{{{7.0, 8}}, 24, 0.0};
  ModelConfig model;
  TrainConfig train{.lambda_f = 1e-3, .epochs = 150};
  EvalConfig eval;
  std::vector<HarmonicTerm> baseline_terms{{24.0, 4}, {168.0, 3}};
  HierarchyConfig hierarchy;
  std::string out_dir = ".";
  std::uint64_t seed = 0;

  bool operator==(const RunConfig&) const = default;

  // Propagates K, feature width and the root seed into the nested configs.
  void sync() {
    features.K = K;
    model.K = K;
    model.feat_width = features.width();
    train.seed = seed;
  }

  void validate() const {
    if (K < 1) throw ConfigError("K", "must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction", "must lie in (0, 1)");
    for (const auto& b : features.blocks) FourierConfig{b.period, b.harmonics, K}.validate();
    model.validate();
    train.validate();
    eval.windows.validate(K);
    if (!(eval.alpha > 0.0 && eval.alpha < 1.0)) throw ConfigError("eval.alpha", "must lie in (0, 1)");
    BlendConfig{hierarchy.blend_alpha}.validate();
    for (const auto& s : hierarchy.stages) s.validate();
  }
};

// ---------------------------------------------------------------------------
// Enum spellings

inline std::string to_string(Aggregation a) { return a == Aggregation::Sum ? "sum" : "mean"; }
inline std::string to_string(CellType c) { return c == CellType::Gru ? "gru" : "elman"; }
inline std::string to_string(HierarchyMode m) { return m == HierarchyMode::Hierarchical ? "hierarchical" : "rnn_enhanced"; }
inline std::string to_string(BaseKind b) { return b == BaseKind::Harmonic ? "harmonic" : "uniform"; }

inline Aggregation parse_aggregation(const std::string& s, const std::string& path = "aggregation") {
  if (s == "mean") return Aggregation::Mean;
  if (s == "sum") return Aggregation::Sum;
  throw ConfigError(path, "expected \"mean\" or \"sum\", got \"" + s + "\"");
}

namespace detail {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Reads j[key] into out when present; type errors carry the full key path.
template <class T>
void read(const json& j, const std::string& key, T& out, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    throw ConfigError(join(path, key), "wrong type (" + std::string(it->type_name()) + ")");
  }
}

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
}

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& path) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError(join(path, key), "unknown key");
}

inline json blocks_to_json(const std::vector<FourierBlock>& blocks) {
  json a = json::array();
  for (const auto& b : blocks) a.push_back({{"P", b.period}, {"F", b.harmonics}});
  return a;
}

inline std::vector<FourierBlock> blocks_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  std::vector<FourierBlock> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = path + "[" + std::to_string(i) + "]";
    expect_object(j[i], p);
    reject_unknown(j[i], {"P", "F"}, p);
    FourierBlock b;
    read(j[i], "P", b.period, p);
    read(j[i], "F", b.harmonics, p);
    if (!(b.period > 0.0)) throw ConfigError(p + ".P", "must be > 0");
    if (b.harmonics < 1) throw ConfigError(p + ".F", "must be >= 1");
    out.push_back(b);
  }
  return out;
}

inline json terms_to_json(const std::vector<HarmonicTerm>& terms) {
  json a = json::array();
  for (const auto& t : terms) a.push_back({{"period", t.period}, {"harmonics", t.harmonics}});
  return a;
}

inline std::vector<HarmonicTerm> terms_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  std::vector<HarmonicTerm> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p = path + "[" + std::to_string(i) + "]";
    expect_object(j[i], p);
    reject_unknown(j[i], {"period", "harmonics"}, p);
    HarmonicTerm t;
    read(j[i], "period", t.period, p);
    read(j[i], "harmonics", t.harmonics, p);
    if (!(t.period > 0.0)) throw ConfigError(p + ".period", "must be > 0");
    if (t.harmonics < 1) throw ConfigError(p + ".harmonics", "must be >= 1");
    out.push_back(t);
  }
  return out;
}

template <class E>
E read_enum(const json& j, const std::string& key, E current, const std::string& path,
            const std::vector<std::pair<std::string, E>>& names) {
  std::string s;
  read(j, key, s, path);
  if (s.empty()) return current;
  for (const auto& [name, value] : names)
    if (s == name) return value;
  throw ConfigError(join(path, key), "unrecognized value \"" + s + "\"");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Nested sections

inline json to_json(const FeatureSpec& f) {
  return {{"fourier", detail::blocks_to_json(f.blocks)}, {"phase0", f.phase0}};
}

inline void from_json(const json& j, FeatureSpec& f, const std::string& path) {
  detail::expect_object(j, path);
  detail::reject_unknown(j, {"fourier", "phase0"}, path);
  if (j.contains("fourier")) f.blocks = detail::blocks_from_json(j["fourier"], path + ".fourier");
  detail::read(j, "phase0", f.phase0, path);
}

inline json to_json(const ModelConfig& m) {
  return {{"L", m.latent},         {"D", m.embed},           {"n_heads", m.heads},
          {"ffn_width", m.ffn_width}, {"use_attention", m.use_attention}, {"use_fourier", m.use_fourier},
          {"cell", to_string(m.cell)}};
}

inline void from_json(const json& j, ModelConfig& m, const std::string& path) {
  detail::expect_object(j, path);
  detail::reject_unknown(j, {"L", "D", "n_heads", "ffn_width", "use_attention", "use_fourier", "cell"}, path);
  detail::read(j, "L", m.latent, path);
  detail::read(j, "D", m.embed, path);
  detail::read(j, "n_heads", m.heads, path);
  detail::read(j, "ffn_width", m.ffn_width, path);
  detail::read(j, "use_attention", m.use_attention, path);
  detail::read(j, "use_fourier", m.use_fourier, path);
  m.cell = detail::read_enum(j, "cell", m.cell, path, {{"gru", CellType::Gru}, {"elman", CellType::Elman}});
}

// The seed lives at the top level of RunConfig, not here.
inline json to_json(const TrainConfig& t) {
  return {{"lr", t.lr},         {"beta1", t.beta1},       {"beta2", t.beta2},   {"eps", t.eps},
          {"clip_norm", t.clip_norm}, {"lambda_f", t.lambda_f}, {"epochs", t.epochs}, {"seq_len", t.seq_len}};
}

inline void from_json(const json& j, TrainConfig& t, const std::string& path) {
  detail::expect_object(j, path);
  detail::reject_unknown(j, {"lr", "beta1", "beta2", "eps", "clip_norm", "lambda_f", "epochs", "seq_len"}, path);
  detail::read(j, "lr", t.lr, path);
  detail::read(j, "beta1", t.beta1, path);
  detail::read(j, "beta2", t.beta2, path);
  detail::read(j, "eps", t.eps, path);
  detail::read(j, "clip_norm", t.clip_norm, path);
  detail::read(j, "lambda_f", t.lambda_f, path);
  detail::read(j, "epochs", t.epochs, path);
  detail::read(j, "seq_len", t.seq_len, path);
}

inline json to_json(const NormalizationStats& s) {
  return {{"mean_x0", s.mean_x0}, {"std_x0", s.std_x0}, {"mean_y", s.mean_y}, {"std_y", s.std_y}};
}

inline NormalizationStats stats_from_json(const json& j, const std::string& path) {
  detail::expect_object(j, path);
  NormalizationStats s;
  for (const char* key : {"mean_x0", "std_x0", "mean_y", "std_y"})
    if (!j.contains(key)) throw ConfigError(path + "." + key, "missing");
  detail::read(j, "mean_x0", s.mean_x0, path);
  detail::read(j, "std_x0", s.std_x0, path);
  detail::read(j, "mean_y", s.mean_y, path);
  detail::read(j, "std_y", s.std_y, path);
  return s;
}

// ---------------------------------------------------------------------------
// RunConfig

inline json to_json(const RunConfig& c) {
  json stages = json::array();
  for (const auto& s : c.hierarchy.stages) {
    json sj = to_json(s.features);
    sj["name"] = s.name;
    sj["K"] = s.K;
    stages.push_back(sj);
  }
  return {
      {"data",
       {{"path", c.data.path},
        {"region", c.data.region},
        {"time_col", c.data.csv.time_col},
        {"load_col", c.data.csv.load_col},
        {"time_fmt", c.data.csv.time_fmt}}},
      {"K", c.K},
      {"aggregation", to_string(c.aggregation)},
      {"train_fraction", c.train_fraction},
      {"features", to_json(c.features)},
      {"model", to_json(c.model)},
      {"train", to_json(c.train)},
      {"eval",
       {{"windows", c.eval.windows.n_windows},
        {"stride", c.eval.windows.stride},
        {"offset", c.eval.windows.offset},
        {"alpha", c.eval.alpha}}},
      {"baseline", {{"harmonics", detail::terms_to_json(c.baseline_terms)}}},
      {"hierarchy",
       {{"mode", to_string(c.hierarchy.mode)},
        {"blend_alpha", c.hierarchy.blend_alpha},
        {"reconcile", c.hierarchy.reconcile},
        {"stages", stages},
        {"base", to_string(c.hierarchy.base)},
        {"base_harmonics", detail::terms_to_json(c.hierarchy.base_terms)}}},
      {"out_dir", c.out_dir},
      {"seed", c.seed},
  };
}

// Missing keys keep their defaults. The result is synced and validated.
inline RunConfig run_config_from_json(const json& j) {
  using detail::read;
  detail::expect_object(j, "");
  detail::reject_unknown(j,
                         {"data", "K", "aggregation", "train_fraction", "features", "model", "train", "eval", "baseline",
                          "hierarchy", "out_dir", "seed"},
                         "");
  RunConfig c;
  if (j.contains("data")) {
    const auto& d = j["data"];
    detail::expect_object(d, "data");
    detail::reject_unknown(d, {"path", "region", "time_col", "load_col", "time_fmt"}, "data");
    read(d, "path", c.data.path, "data");
    read(d, "region", c.data.region, "data");
    read(d, "time_col", c.data.csv.time_col, "data");
    read(d, "load_col", c.data.csv.load_col, "data");
    read(d, "time_fmt", c.data.csv.time_fmt, "data");
  }
  read(j, "K", c.K, "");
  c.aggregation = detail::read_enum(j, "aggregation", c.aggregation, "",
                                    {{"mean", Aggregation::Mean}, {"sum", Aggregation::Sum}});
  read(j, "train_fraction", c.train_fraction, "");
  if (j.contains("features")) from_json(j["features"], c.features, "features");
  if (j.contains("model")) from_json(j["model"], c.model, "model");
  if (j.contains("train")) from_json(j["train"], c.train, "train");
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    detail::expect_object(e, "eval");
    detail::reject_unknown(e, {"windows", "stride", "offset", "alpha"}, "eval");
    read(e, "windows", c.eval.windows.n_windows, "eval");
    read(e, "stride", c.eval.windows.stride, "eval");
    read(e, "offset", c.eval.windows.offset, "eval");
    read(e, "alpha", c.eval.alpha, "eval");
  }
  if (j.contains("baseline")) {
    const auto& b = j["baseline"];
    detail::expect_object(b, "baseline");
    detail::reject_unknown(b, {"harmonics"}, "baseline");
    if (b.contains("harmonics")) c.baseline_terms = detail::terms_from_json(b["harmonics"], "baseline.harmonics");
  }
  if (j.contains("hierarchy")) {
    const auto& h = j["hierarchy"];
    detail::expect_object(h, "hierarchy");
    detail::reject_unknown(h, {"mode", "blend_alpha", "reconcile", "stages", "base", "base_harmonics"}, "hierarchy");
    c.hierarchy.mode = detail::read_enum(h, "mode", c.hierarchy.mode, "hierarchy",
                                         {{"hierarchical", HierarchyMode::Hierarchical},
                                          {"rnn_enhanced", HierarchyMode::RnnEnhanced}});
    read(h, "blend_alpha", c.hierarchy.blend_alpha, "hierarchy");
    read(h, "reconcile", c.hierarchy.reconcile, "hierarchy");
    c.hierarchy.base = detail::read_enum(h, "base", c.hierarchy.base, "hierarchy",
                                         {{"harmonic", BaseKind::Harmonic}, {"uniform", BaseKind::Uniform}});
    if (h.contains("base_harmonics"))
      c.hierarchy.base_terms = detail::terms_from_json(h["base_harmonics"], "hierarchy.base_harmonics");
    if (h.contains("stages")) {
      const auto& s = h["stages"];
      if (!s.is_array()) throw ConfigError("hierarchy.stages", "expected an array");
      c.hierarchy.stages.clear();
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto p = "hierarchy.stages[" + std::to_string(i) + "]";
        detail::expect_object(s[i], p);
        detail::reject_unknown(s[i], {"name", "K", "fourier", "phase0"}, p);
        StageSpec st;
        st.name = "stage" + std::to_string(i);
        read(s[i], "name", st.name, p);
        read(s[i], "K", st.K, p);
        json fj = json::object();
        for (const char* key : {"fourier", "phase0"})
          if (s[i].contains(key)) fj[key] = s[i][key];
        from_json(fj, st.features, p);
        st.features.K = st.K;
        c.hierarchy.stages.push_back(st);
      }
    }
  }
  read(j, "out_dir", c.out_dir, "");
  read(j, "seed", c.seed, "");
  c.sync();
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("malformed JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline std::string dump(const RunConfig& c) { return to_json(c).dump(2); }

// 16 hex digits of FNV-1a over the canonical (compact, key-sorted) dump.
inline std::string config_hash(const RunConfig& c) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a(to_json(c).dump());
  return os.str();
}

}  // namespace loadscale
