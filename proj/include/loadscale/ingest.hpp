#pragma once

// Hourly load ingestion: CSV parsing, cleaning, multi-resolution pairing,
// chronological split and z-score normalization.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "loadscale/error.hpp"

namespace loadscale {

// Hours since 1970-01-01 00:00 on a naive local clock.
using Hour = std::int64_t;

inline Hour hour_from_civil(int year, unsigned month, unsigned day, int hour) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw DataError("invalid calendar date");
  return static_cast<Hour>(sys_days{ymd}.time_since_epoch().count()) * 24 + hour;
}

inline std::string format_hour(Hour h) {
  using namespace std::chrono;
  const auto days_since = static_cast<int>(h >= 0 ? h / 24 : (h - 23) / 24);
  const int hour = static_cast<int>(h - static_cast<Hour>(days_since) * 24);
  const year_month_day ymd{sys_days{std::chrono::days{days_since}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:00:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour);
  return buf;
}

// Parses `text` with a strftime-style format. Returns nullopt when the text
// does not match or carries non-zero minutes/seconds.
inline std::optional<Hour> parse_hour(const std::string& text, const std::string& fmt) {
  std::tm tm{};
  std::istringstream in(text);
  in >> std::get_time(&tm, fmt.c_str());
  if (in.fail()) return std::nullopt;
  if (tm.tm_min != 0 || tm.tm_sec != 0) return std::nullopt;
  try {
    return hour_from_civil(tm.tm_year + 1900, static_cast<unsigned>(tm.tm_mon + 1),
                           static_cast<unsigned>(tm.tm_mday), tm.tm_hour);
  } catch (const DataError&) {
    return std::nullopt;
  }
}

struct HourlyRecord {
  Hour timestamp = 0;
  std::optional<double> load;  // nullopt marks a missing value
};

struct RawSeries {
  std::vector<HourlyRecord> records;
  std::string region_id;
};

struct CsvOptions {
  std::string time_col = "Datetime";
  // Empty selects "<region>_MW" when present, otherwise the only other column.
  std::string load_col;
  std::string time_fmt = "%Y-%m-%d %H:%M:%S";

  bool operator==(const CsvOptions&) const = default;
};

namespace detail {

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_load(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

inline RawSeries parse_csv(std::istream& in, const std::string& region, const CsvOptions& opts = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("no parseable rows");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);

  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto time_idx = column(opts.time_col);
  if (!time_idx) throw DataError("unknown column '" + opts.time_col + "'");
  std::optional<std::size_t> load_idx;
  if (!opts.load_col.empty()) {
    load_idx = column(opts.load_col);
    if (!load_idx) throw DataError("unknown column '" + opts.load_col + "'");
  } else {
    load_idx = column(region + "_MW");
    if (!load_idx && header.size() == 2) load_idx = *time_idx == 0 ? 1 : 0;
    if (!load_idx) throw DataError("unknown columns: cannot infer load column, pass --load-col");
  }

  RawSeries out;
  out.region_id = region;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() <= std::max(*time_idx, *load_idx)) continue;
    const auto ts = parse_hour(cells[*time_idx], opts.time_fmt);
    if (!ts) continue;
    out.records.push_back({*ts, detail::parse_load(cells[*load_idx])});
  }
  if (out.records.empty()) throw DataError("no parseable rows");
  return out;
}

inline RawSeries load_csv(const std::string& path, const std::string& region, const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read file '" + path + "'");
  return parse_csv(in, region, opts);
}

inline void write_csv(std::ostream& out, const RawSeries& series, const std::string& time_col = "Datetime") {
  out << time_col << ',' << series.region_id << "_MW\n";
  out << std::setprecision(17);
  for (const auto& r : series.records) {
    out << format_hour(r.timestamp) << ',';
    if (r.load) out << *r.load;
    out << '\n';
  }
}

// Collapses duplicate timestamps (first occurrence wins), orders by time and
// forward-fills missing values and missing hours.
inline RawSeries clean(const RawSeries& raw) {
  std::vector<HourlyRecord> unique;
  unique.reserve(raw.records.size());
  std::unordered_set<Hour> seen;
  for (const auto& r : raw.records)
    if (seen.insert(r.timestamp).second) unique.push_back(r);
  if (unique.empty()) throw DataError("no records to clean");
  std::stable_sort(unique.begin(), unique.end(),
                   [](const HourlyRecord& a, const HourlyRecord& b) { return a.timestamp < b.timestamp; });
  if (!unique.front().load) throw DataError("leading gap: first record has no value to forward-fill from");

  RawSeries out;
  out.region_id = raw.region_id;
  out.records.reserve(static_cast<std::size_t>(unique.back().timestamp - unique.front().timestamp + 1));
  double last = *unique.front().load;
  Hour expected = unique.front().timestamp;
  for (const auto& r : unique) {
    for (; expected < r.timestamp; ++expected) out.records.push_back({expected, last});
    if (r.load) last = *r.load;
    out.records.push_back({r.timestamp, last});
    expected = r.timestamp + 1;
  }
  return out;
}

enum class Aggregation { Sum, Mean };

inline double aggregate(const double* values, int n, Aggregation rule) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += values[i];
  return rule == Aggregation::Sum ? s : s / n;
}

inline double aggregate(const Eigen::VectorXd& v, Aggregation rule) {
  return aggregate(v.data(), static_cast<int>(v.size()), rule);
}

struct PeriodPair {
  long t = 0;
  double x0 = 0.0;
  Eigen::VectorXd y;
  Hour start = 0;
};

// Consecutive K-blocks of the cleaned series; a trailing partial block is dropped.
inline std::vector<PeriodPair> make_pairs(const RawSeries& series, int K, Aggregation rule) {
  if (K < 1) throw ConfigError("K", "must be >= 1");
  const auto n_periods = series.records.size() / static_cast<std::size_t>(K);
  if (n_periods == 0) throw DataError("fewer than one full period of data");
  std::vector<PeriodPair> out(n_periods);
  for (std::size_t p = 0; p < n_periods; ++p) {
    auto& pair = out[p];
    pair.t = static_cast<long>(p);
    pair.y.resize(K);
    for (int s = 0; s < K; ++s) {
      const auto& rec = series.records[p * K + s];
      if (!rec.load) throw DataError("make_pairs requires a cleaned series");
      pair.y[s] = *rec.load;
    }
    pair.x0 = aggregate(pair.y, rule);
    pair.start = series.records[p * K].timestamp;
  }
  return out;
}

struct NormalizationStats {
  double mean_x0 = 0.0;
  double std_x0 = 1.0;
  double mean_y = 0.0;
  double std_y = 1.0;

  double normalize_x0(double v) const { return (v - mean_x0) / std_x0; }
  double denormalize_x0(double v) const { return v * std_x0 + mean_x0; }
  double normalize_y(double v) const { return (v - mean_y) / std_y; }
  double denormalize_y(double v) const { return v * std_y + mean_y; }
};

enum class SplitTag { Train, Test };

struct Period {
  long index = 0;
  double x0 = 0.0;     // normalized
  Eigen::VectorXd y;   // normalized, length K
  Hour start = 0;
};

struct MultiResolutionDataset {
  std::vector<Period> periods;
  int K = 0;
  NormalizationStats stats;
  SplitTag split = SplitTag::Train;

  std::size_t size() const { return periods.size(); }
  bool empty() const { return periods.empty(); }
};

// Population mean/std over the training pairs.
inline NormalizationStats compute_stats(const std::vector<PeriodPair>& train) {
  if (train.empty()) throw DataError("empty training partition");
  NormalizationStats st;
  double sx = 0.0, sy = 0.0;
  std::size_t ny = 0;
  for (const auto& p : train) {
    sx += p.x0;
    sy += p.y.sum();
    ny += static_cast<std::size_t>(p.y.size());
  }
  st.mean_x0 = sx / static_cast<double>(train.size());
  st.mean_y = sy / static_cast<double>(ny);
  double vx = 0.0, vy = 0.0;
  for (const auto& p : train) {
    vx += (p.x0 - st.mean_x0) * (p.x0 - st.mean_x0);
    vy += (p.y.array() - st.mean_y).square().sum();
  }
  st.std_x0 = std::sqrt(vx / static_cast<double>(train.size()));
  st.std_y = std::sqrt(vy / static_cast<double>(ny));
  if (!(st.std_x0 > 0.0) || !(st.std_y > 0.0)) throw DataError("degenerate training data: zero variance");
  return st;
}

inline MultiResolutionDataset normalize(const std::vector<PeriodPair>& pairs, const NormalizationStats& stats, int K,
                                        SplitTag tag) {
  MultiResolutionDataset ds;
  ds.K = K;
  ds.stats = stats;
  ds.split = tag;
  ds.periods.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.y.size() != K) throw ShapeError("period target length differs from K");
    Period q;
    q.index = p.t;
    q.x0 = stats.normalize_x0(p.x0);
    q.y = (p.y.array() - stats.mean_y) / stats.std_y;
    q.start = p.start;
    ds.periods.push_back(std::move(q));
  }
  return ds;
}

struct SplitDatasets {
  MultiResolutionDataset train;
  MultiResolutionDataset test;
};

inline SplitDatasets split_and_normalize(const std::vector<PeriodPair>& pairs, double train_fraction, int K) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction", "must lie in (0, 1)");
  if (pairs.size() < 2) throw DataError("need at least two periods to split");
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(pairs.size())));
  if (n_train == 0) throw DataError("training partition is empty");
  const std::vector<PeriodPair> train(pairs.begin(), pairs.begin() + static_cast<long>(n_train));
  const std::vector<PeriodPair> test(pairs.begin() + static_cast<long>(n_train), pairs.end());
  const auto stats = compute_stats(train);
  return {normalize(train, stats, K, SplitTag::Train), normalize(test, stats, K, SplitTag::Test)};
}

}  // namespace loadscale
