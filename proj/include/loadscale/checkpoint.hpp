#pragma once

// Versioned JSON checkpoints. Tensors are stored by name as
// {"shape": [rows, cols], "data": [...column-major...]}; doubles are written
// with round-trip precision so save/load is bit-exact.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "loadscale/config.hpp"
#include "loadscale/error.hpp"
#include "loadscale/hierarchy.hpp"
#include "loadscale/model.hpp"
#include "loadscale/train.hpp"
#include "loadscale/uncertainty.hpp"

namespace loadscale {

inline constexpr const char* kCheckpointFormat = "loadscale-checkpoint";
inline constexpr const char* kPipelineFormat = "loadscale-pipeline";
inline constexpr int kFormatVersion = 1;

struct Checkpoint {
  TrainedModel model;
  std::optional<ResidualModel> residuals;
  std::optional<RunConfig> run;
};

namespace detail {

template <class Derived>
json tensor_to_json(const Eigen::PlainObjectBase<Derived>& t) {
  json shape = Derived::ColsAtCompileTime == 1 ? json::array({t.rows()}) : json::array({t.rows(), t.cols()});
  std::vector<double> data(t.data(), t.data() + t.size());
  return {{"shape", shape}, {"data", data}};
}

inline void tensor_from_json(const json& j, Eigen::MatrixXd& out, const std::string& path) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) throw ConfigError(path, "malformed tensor");
  const auto shape = j["shape"].get<std::vector<long>>();
  if (shape.size() != 2) throw ConfigError(path + ".shape", "expected rank 2");
  const auto data = j["data"].get<std::vector<double>>();
  if (static_cast<long>(data.size()) != shape[0] * shape[1]) throw ConfigError(path + ".data", "size differs from shape");
  out = Eigen::Map<const Eigen::MatrixXd>(data.data(), shape[0], shape[1]);
}

inline void tensor_from_json(const json& j, Eigen::VectorXd& out, const std::string& path) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) throw ConfigError(path, "malformed tensor");
  const auto shape = j["shape"].get<std::vector<long>>();
  if (shape.size() != 1) throw ConfigError(path + ".shape", "expected rank 1");
  const auto data = j["data"].get<std::vector<double>>();
  if (static_cast<long>(data.size()) != shape[0]) throw ConfigError(path + ".data", "size differs from shape");
  out = Eigen::Map<const Eigen::VectorXd>(data.data(), shape[0]);
}

inline void check_header(const json& j, const char* format, const std::string& what) {
  if (!j.is_object() || j.value("format", "") != format) throw ConfigError(what, std::string("not a ") + format + " file");
  if (j.value("version", 0) != kFormatVersion)
    throw ConfigError(what + ".version", "unsupported version " + j.value("version", json(0)).dump());
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": malformed JSON: " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace detail

inline json to_json(const ResidualModel& rm) {
  return {{"mean_r", detail::tensor_to_json(rm.mean_r)},
          {"sigma", detail::tensor_to_json(rm.sigma)},
          {"n_samples", rm.n_samples}};
}

inline ResidualModel residual_model_from_json(const json& j, const std::string& path) {
  ResidualModel rm;
  detail::tensor_from_json(j.at("mean_r"), rm.mean_r, path + ".mean_r");
  detail::tensor_from_json(j.at("sigma"), rm.sigma, path + ".sigma");
  rm.n_samples = j.value("n_samples", 0L);
  return rm;
}

inline json to_json(const Checkpoint& ck) {
  const auto& m = ck.model;
  json tensors = json::object();
  zip_tensors([&](const char* name, const auto& t) { tensors[name] = detail::tensor_to_json(t); }, m.params);
  json model = to_json(m.model);
  model["K"] = m.model.K;
  model["feat_width"] = m.model.feat_width;
  json features = to_json(m.features);
  features["K"] = m.features.K;
  json j = {{"format", kCheckpointFormat},
            {"version", kFormatVersion},
            {"seed", m.seed},
            {"aggregation", to_string(m.aggregation)},
            {"model", model},
            {"features", features},
            {"stats", to_json(m.stats)},
            {"tensors", tensors}};
  if (ck.residuals) j["residuals"] = to_json(*ck.residuals);
  if (ck.run) j["run"] = to_json(*ck.run);
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  detail::check_header(j, kCheckpointFormat, "checkpoint");
  Checkpoint ck;
  auto& m = ck.model;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.aggregation = parse_aggregation(j.at("aggregation").get<std::string>(), "checkpoint.aggregation");

    json model = j.at("model");
    m.model.K = model.at("K").get<int>();
    m.model.feat_width = model.at("feat_width").get<int>();
    model.erase("K");
    model.erase("feat_width");
    from_json(model, m.model, "checkpoint.model");
    m.model.validate();

    json features = j.at("features");
    m.features.K = features.at("K").get<int>();
    features.erase("K");
    from_json(features, m.features, "checkpoint.features");

    m.stats = stats_from_json(j.at("stats"), "checkpoint.stats");

    const auto& tensors = j.at("tensors");
    zip_tensors(
        [&](const char* name, auto& t) {
          if (!tensors.contains(name)) throw ConfigError(std::string("checkpoint.tensors.") + name, "missing");
          detail::tensor_from_json(tensors[name], t, std::string("checkpoint.tensors.") + name);
        },
        m.params);
    check_shapes(m.params, m.model);

    if (j.contains("residuals")) ck.residuals = residual_model_from_json(j["residuals"], "checkpoint.residuals");
    if (j.contains("run")) ck.run = run_config_from_json(j["run"]);
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint", std::string("malformed: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) { detail::write_json_file(path, to_json(ck)); }

inline Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(detail::read_json_file(path)); }

// ---------------------------------------------------------------------------
// Pipeline files: an ordered list of stage checkpoints (paths relative to the
// pipeline file), plus the base regression for rnn_enhanced mode.

struct PipelineFile {
  HierarchyMode mode = HierarchyMode::Hierarchical;
  Pipeline pipeline;  // rnn_enhanced: a single refiner stage
  // rnn_enhanced only
  BaseKind base = BaseKind::Harmonic;
  int base_K = 365;
  HarmonicRegression base_regression;

  // rnn_enhanced: number of fine values per coarse input
  long expansion() const {
    return mode == HierarchyMode::Hierarchical ? pipeline.expansion() : base_K * pipeline.expansion();
  }
};

inline void save_pipeline(const std::string& path, const PipelineFile& pf) {
  namespace fs = std::filesystem;
  const fs::path file(path);
  const auto dir = file.parent_path();
  const auto stem = file.stem().string();
  json stages = json::array();
  for (std::size_t i = 0; i < pf.pipeline.stages.size(); ++i) {
    const auto& s = pf.pipeline.stages[i];
    const auto rel = stem + "." + std::to_string(i) + "." + s.name + ".json";
    save_checkpoint((dir / rel).string(), Checkpoint{s.model, std::nullopt, std::nullopt});
    stages.push_back({{"name", s.name}, {"checkpoint", rel}});
  }
  json j = {{"format", kPipelineFormat},
            {"version", kFormatVersion},
            {"mode", to_string(pf.mode)},
            {"aggregation", to_string(pf.pipeline.aggregation)},
            {"stages", stages}};
  if (pf.mode == HierarchyMode::RnnEnhanced) {
    json base = {{"kind", to_string(pf.base)}, {"K", pf.base_K}};
    if (pf.base == BaseKind::Harmonic) {
      const auto& r = pf.base_regression;
      base["harmonics"] = detail::terms_to_json(r.terms());
      base["origin"] = r.origin();
      base["scale"] = r.scale();
      base["coefficients"] = detail::tensor_to_json(r.coefficients());
    }
    j["base"] = base;
  }
  detail::write_json_file(path, j);
}

inline PipelineFile load_pipeline(const std::string& path) {
  namespace fs = std::filesystem;
  const auto j = detail::read_json_file(path);
  detail::check_header(j, kPipelineFormat, "pipeline");
  PipelineFile pf;
  try {
    pf.mode = detail::read_enum(j, "mode", pf.mode, "pipeline",
                                {{"hierarchical", HierarchyMode::Hierarchical},
                                 {"rnn_enhanced", HierarchyMode::RnnEnhanced}});
    pf.pipeline.aggregation = parse_aggregation(j.at("aggregation").get<std::string>(), "pipeline.aggregation");
    const auto dir = fs::path(path).parent_path();
    for (const auto& s : j.at("stages")) {
      auto ck = load_checkpoint((dir / s.at("checkpoint").get<std::string>()).string());
      pf.pipeline.stages.push_back({s.at("name").get<std::string>(), std::move(ck.model)});
    }
    if (pf.pipeline.stages.empty()) throw ConfigError("pipeline.stages", "at least one stage required");
    if (pf.mode == HierarchyMode::RnnEnhanced) {
      const auto& b = j.at("base");
      pf.base = detail::read_enum(b, "kind", pf.base, "pipeline.base",
                                  {{"harmonic", BaseKind::Harmonic}, {"uniform", BaseKind::Uniform}});
      pf.base_K = b.at("K").get<int>();
      if (pf.base == BaseKind::Harmonic) {
        Eigen::VectorXd coef;
        detail::tensor_from_json(b.at("coefficients"), coef, "pipeline.base.coefficients");
        pf.base_regression =
            HarmonicRegression::from_state(detail::terms_from_json(b.at("harmonics"), "pipeline.base.harmonics"),
                                           b.at("origin").get<double>(), b.at("scale").get<double>(), coef);
      }
      if (pf.pipeline.stages.size() != 1) throw ConfigError("pipeline.stages", "rnn_enhanced takes one refiner stage");
    }
  } catch (const json::exception& e) {
    throw ConfigError("pipeline", std::string("malformed: ") + e.what());
  }
  return pf;
}

// Runs a loaded pipeline file on consecutive coarse values.
inline std::vector<double> run_pipeline(const PipelineFile& pf, std::span<const double> coarse, long first_index,
                                        bool reconcile) {
  if (pf.mode == HierarchyMode::Hierarchical) return downscale(pf.pipeline, coarse, first_index, reconcile);

  const auto& refiner = pf.pipeline.stages.front().model;
  const auto rule = pf.pipeline.aggregation;
  std::unique_ptr<CoarseDownscaler> base;
  if (pf.base == BaseKind::Harmonic)
    base = std::make_unique<HarmonicBaseDownscaler>(pf.base_regression, pf.base_K, rule);
  else
    base = std::make_unique<UniformSplitter>(pf.base_K, rule);
  std::vector<double> out;
  out.reserve(coarse.size() * static_cast<std::size_t>(pf.expansion()));
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    const long index = first_index + static_cast<long>(j);
    Eigen::MatrixXd block = rnn_enhanced_downscale(*base, refiner, coarse[j], index);
    if (reconcile) {
      // the base already matches the coarse driver; refiner rows match the base
      const auto mid = base->split(coarse[j], index);
      for (Eigen::Index r = 0; r < block.rows(); ++r) {
        Eigen::VectorXd row = block.row(r).transpose();
        reconcile_block(std::span<double>(row.data(), static_cast<std::size_t>(row.size())),
                        mid[static_cast<std::size_t>(r)], rule);
        block.row(r) = row.transpose();
      }
    }
    for (Eigen::Index r = 0; r < block.rows(); ++r)
      for (Eigen::Index c = 0; c < block.cols(); ++c) out.push_back(block(r, c));
  }
  return out;
}

}  // namespace loadscale
