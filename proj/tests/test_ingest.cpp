#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "loadscale/ingest.hpp"

namespace loadscale {
namespace {

const Hour h0 = hour_from_civil(2021, 3, 1, 0);

RawSeries series(std::initializer_list<std::pair<Hour, std::optional<double>>> rows) {
  RawSeries s;
  s.region_id = "R";
  for (const auto& [t, v] : rows) s.records.push_back({t, v});
  return s;
}

RawSeries hourly(const std::vector<double>& values) {
  RawSeries s;
  for (std::size_t i = 0; i < values.size(); ++i) s.records.push_back({h0 + static_cast<Hour>(i), values[i]});
  return s;
}

TEST(ParseCsv, ThreeWellFormedRows) {
  std::istringstream in(
      "Datetime,AEP_MW\n2004-12-31 01:00:00,13478.0\n2004-12-31 02:00:00,12865\n2004-12-31 03:00:00,12577.5\n");
  const auto s = parse_csv(in, "AEP");
  ASSERT_EQ(s.records.size(), 3u);
  EXPECT_EQ(s.region_id, "AEP");
  EXPECT_EQ(s.records[0].timestamp, hour_from_civil(2004, 12, 31, 1));
  EXPECT_EQ(s.records[2].timestamp - s.records[0].timestamp, 2);
  EXPECT_EQ(*s.records[1].load, 12865.0);
  EXPECT_EQ(*s.records[2].load, 12577.5);
}

TEST(ParseCsv, NanCellBecomesMissing) {
  std::istringstream in("Datetime,X_MW\n2020-01-01 00:00:00,5\n2020-01-01 01:00:00,NaN\n2020-01-01 02:00:00,\n");
  const auto s = parse_csv(in, "X");
  ASSERT_EQ(s.records.size(), 3u);
  EXPECT_TRUE(s.records[0].load.has_value());
  EXPECT_FALSE(s.records[1].load.has_value());
  EXPECT_FALSE(s.records[2].load.has_value());
}

TEST(ParseCsv, EmptyInputHasNoParseableRows) {
  std::istringstream empty("");
  EXPECT_THROW(parse_csv(empty, "X"), DataError);
  std::istringstream header_only("Datetime,X_MW\n");
  try {
    parse_csv(header_only, "X");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("no parseable rows"), std::string::npos);
  }
}

TEST(ParseCsv, ConfigurableColumnsAndFormat) {
  std::istringstream in("when;ignored,load,other\n01/02/2020 05h,12.5,x\n");
  CsvOptions opts;
  opts.time_col = "when;ignored";
  opts.load_col = "load";
  opts.time_fmt = "%d/%m/%Y %Hh";
  const auto s = parse_csv(in, "R", opts);
  ASSERT_EQ(s.records.size(), 1u);
  EXPECT_EQ(s.records[0].timestamp, hour_from_civil(2020, 2, 1, 5));

  std::istringstream bad("Datetime,A,B\n2020-01-01 00:00:00,1,2\n");
  EXPECT_THROW(parse_csv(bad, "R"), DataError);  // load column cannot be inferred
  std::istringstream missing("Stamp,R_MW\n2020-01-01 00:00:00,1\n");
  EXPECT_THROW(parse_csv(missing, "R"), DataError);
}

TEST(ParseHour, RejectsSubHourlyStamps) {
  EXPECT_TRUE(parse_hour("2020-01-01 13:00:00", "%Y-%m-%d %H:%M:%S"));
  EXPECT_FALSE(parse_hour("2020-01-01 13:30:00", "%Y-%m-%d %H:%M:%S"));
  EXPECT_FALSE(parse_hour("garbage", "%Y-%m-%d %H:%M:%S"));
  EXPECT_EQ(format_hour(hour_from_civil(1999, 12, 31, 23)), "1999-12-31 23:00:00");
}

TEST(WriteCsv, RoundTripsThroughParse) {
  const auto s = hourly({1.0 / 3.0, 2.5, 1e6 + 0.125});
  std::stringstream io;
  RawSeries named = s;
  named.region_id = "R";
  write_csv(io, named);
  const auto back = parse_csv(io, "R");
  ASSERT_EQ(back.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.records[i].timestamp, s.records[i].timestamp);
    EXPECT_EQ(*back.records[i].load, *s.records[i].load);
  }
}

TEST(Clean, FirstOccurrenceWins) {
  const auto out = clean(series({{h0, 10.0}, {h0, 12.0}, {h0 + 1, 11.0}}));
  ASSERT_EQ(out.records.size(), 2u);
  EXPECT_EQ(*out.records[0].load, 10.0);
  EXPECT_EQ(*out.records[1].load, 11.0);
}

TEST(Clean, ForwardFillsGaps) {
  const auto out = clean(series({{h0, 10.0}, {h0 + 2, 14.0}}));
  ASSERT_EQ(out.records.size(), 3u);
  EXPECT_EQ(out.records[1].timestamp, h0 + 1);
  EXPECT_EQ(*out.records[1].load, 10.0);
  EXPECT_EQ(*out.records[2].load, 14.0);
}

TEST(Clean, MissingValuesAreFilledAndOrderRestored) {
  const auto out = clean(series({{h0 + 2, std::nullopt}, {h0, 1.0}, {h0 + 1, 2.0}}));
  ASSERT_EQ(out.records.size(), 3u);
  EXPECT_EQ(*out.records[2].load, 2.0);
  EXPECT_EQ(out.records[2].timestamp, h0 + 2);
}

TEST(Clean, LeadingGapIsAnError) {
  try {
    clean(series({{h0, std::nullopt}, {h0 + 1, 5.0}}));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("leading gap"), std::string::npos);
  }
}

TEST(MakePairs, MeanAggregation) {
  std::vector<double> v(48);
  for (int i = 0; i < 48; ++i) v[static_cast<std::size_t>(i)] = i * i;
  const auto pairs = make_pairs(hourly(v), 24, Aggregation::Mean);
  ASSERT_EQ(pairs.size(), 2u);
  double mean = 0.0;
  for (int i = 0; i < 24; ++i) mean += i * i;
  EXPECT_DOUBLE_EQ(pairs[0].x0, mean / 24.0);
  EXPECT_EQ(pairs[1].y[0], 576.0);
  EXPECT_EQ(pairs[1].start, h0 + 24);
}

TEST(MakePairs, ConstantSeriesSum) {
  const auto pairs = make_pairs(hourly(std::vector<double>(72, 2.5)), 24, Aggregation::Sum);
  ASSERT_EQ(pairs.size(), 3u);
  for (const auto& p : pairs) EXPECT_DOUBLE_EQ(p.x0, 60.0);
}

TEST(MakePairs, PartialPeriodIsDropped) {
  EXPECT_EQ(make_pairs(hourly(std::vector<double>(30, 1.0)), 24, Aggregation::Mean).size(), 1u);
  EXPECT_THROW(make_pairs(hourly(std::vector<double>(23, 1.0)), 24, Aggregation::Mean), DataError);
}

std::vector<PeriodPair> toy_pairs(int n, int K) {
  std::vector<PeriodPair> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& p = out[static_cast<std::size_t>(i)];
    p.t = i;
    p.y = Eigen::VectorXd::LinSpaced(K, i, 2 * i + 1);
    p.x0 = p.y.mean();
  }
  return out;
}

TEST(Split, FloorRule) {
  const auto s = split_and_normalize(toy_pairs(10, 3), 0.8, 3);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  EXPECT_EQ(s.test.periods.front().index, 8);
  EXPECT_EQ(split_and_normalize(toy_pairs(10, 3), 0.79, 3).train.size(), 7u);
}

TEST(Split, StatisticsComeFromTrainOnly) {
  auto pairs = toy_pairs(10, 3);
  const auto a = split_and_normalize(pairs, 0.5, 3);
  pairs.back().y *= 1000.0;
  pairs.back().x0 *= 1000.0;
  const auto b = split_and_normalize(pairs, 0.5, 3);
  EXPECT_EQ(a.train.stats.mean_y, b.train.stats.mean_y);
  EXPECT_EQ(a.train.stats.std_x0, b.train.stats.std_x0);
  EXPECT_EQ(a.test.stats.mean_y, a.train.stats.mean_y);
}

TEST(Normalize, PopulationStdHandOracle) {
  std::vector<PeriodPair> train(2);
  train[0].x0 = 1.0;
  train[0].y = Eigen::Vector2d(0.0, 2.0);
  train[1].x0 = 3.0;
  train[1].y = Eigen::Vector2d(4.0, 6.0);
  const auto st = compute_stats(train);
  EXPECT_EQ(st.mean_x0, 2.0);
  EXPECT_EQ(st.std_x0, 1.0);
  EXPECT_EQ(st.mean_y, 3.0);
  EXPECT_DOUBLE_EQ(st.std_y, std::sqrt(5.0));  // (9 + 1 + 1 + 9) / 4
  const auto ds = normalize(train, st, 2, SplitTag::Train);
  EXPECT_EQ(ds.periods[0].x0, -1.0);
  EXPECT_EQ(ds.periods[1].x0, 1.0);
  EXPECT_DOUBLE_EQ(st.denormalize_y(ds.periods[1].y[1]), 6.0);
}

TEST(Normalize, DegenerateTrainingData) {
  std::vector<PeriodPair> train(3);
  for (int i = 0; i < 3; ++i) {
    train[static_cast<std::size_t>(i)].x0 = i;
    train[static_cast<std::size_t>(i)].y = Eigen::Vector2d::Constant(7.0);
  }
  try {
    compute_stats(train);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate training data"), std::string::npos);
  }
}

}  // namespace
}  // namespace loadscale
