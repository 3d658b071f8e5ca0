#include "prbcount/series_io.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace prbcount;

TEST(IsoDate, ParsesToDaysSinceEpoch) {
  EXPECT_EQ(parse_iso_date("1970-01-01"), 0);
  EXPECT_EQ(parse_iso_date("1970-01-02"), 1);
  EXPECT_EQ(parse_iso_date("2019-04-22"), 18008);
  EXPECT_EQ(parse_iso_date("1969-12-31"), -1);
  EXPECT_THROW(parse_iso_date("2019-13-01"), std::invalid_argument);
  EXPECT_THROW(parse_iso_date("2019-02-30"), std::invalid_argument);
  EXPECT_THROW(parse_iso_date("garbage"), std::invalid_argument);
}

TEST(TimeOfDay, ParsesHoursMinutes) {
  EXPECT_EQ(parse_time_of_day("00:00"), 0);
  EXPECT_EQ(parse_time_of_day("09:00"), 9 * 3600);
  EXPECT_EQ(parse_time_of_day("18:30"), 18 * 3600 + 30 * 60);
  EXPECT_THROW(parse_time_of_day("24:00"), std::invalid_argument);
  EXPECT_THROW(parse_time_of_day("9am"), std::invalid_argument);
}

TEST(TokenHex, RoundTripsAndMatchesDigestOrder) {
  const AnonToken token{0x7d68955f02fb12cdULL};
  EXPECT_EQ(token_to_hex(token), "7d68955f02fb12cd");
  EXPECT_EQ(token_from_hex("7d68955f02fb12cd"), token);
  EXPECT_THROW(token_from_hex("zz"), std::invalid_argument);
}

TEST(MacParsing, TransmissionOrder) {
  const RawMac mac = mac_from_string("02:de:ad:be:ef:01");
  EXPECT_EQ(mac.bytes[0], 0x02);
  EXPECT_EQ(mac.bytes[5], 0x01);
  EXPECT_EQ(mac.to_string(), "02:de:ad:be:ef:01");
  EXPECT_THROW(mac_from_string("02:de:ad:be:ef"), std::invalid_argument);
  EXPECT_THROW(mac_from_string("02:de:ad:be:ef:011"), std::invalid_argument);
}

TEST(CountSeriesCsv, RoundTrip) {
  CountSeries series{{0, 10.5}, {1800, 12.25}, {3600, 0.1}};
  std::stringstream ss;
  write_count_series(ss, series);
  EXPECT_EQ(ss.str(), "timestamp,count\n0,10.5\n1800,12.25\n3600,0.1\n");
  const CountSeries parsed = read_count_series(ss);
  ASSERT_EQ(parsed.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(parsed[i].ts, series[i].ts);
    EXPECT_DOUBLE_EQ(parsed[i].value, series[i].value);
  }
}

TEST(CountSeriesCsv, RejectsMalformedRows) {
  std::stringstream ss("timestamp,count\n1,2,3\n");
  EXPECT_THROW(read_count_series(ss), std::invalid_argument);
  std::stringstream ss2("1,abc\n");
  EXPECT_THROW(read_count_series(ss2), std::invalid_argument);
}

TEST(RecordsCsv, RejectsOutOfRangeFields) {
  std::stringstream rssi_high("ts,sensor_id,token,rssi\n1,1,00000000000000aa,300\n");
  EXPECT_THROW(read_records_csv(rssi_high), std::invalid_argument);
  std::stringstream sensor_high("ts,sensor_id,token,rssi\n1,70000,00000000000000aa,-50\n");
  EXPECT_THROW(read_records_csv(sensor_high), std::invalid_argument);
}

TEST(RecordsCsv, RoundTrip) {
  std::vector<ProbeRecord> records{{100, 1, AnonToken{0xdeadbeef12345678ULL}, -50},
                                   {160, 2, AnonToken{0x1}, 127}};
  std::stringstream ss;
  write_records_csv(ss, records);
  const auto parsed = read_records_csv(ss);
  EXPECT_EQ(parsed, records);
}

TEST(RawRecordsCsv, RoundTrip) {
  std::vector<RawProbe> probes{{100, 1, RawMac{{0x02, 1, 2, 3, 4, 5}}, -50},
                               {160, 2, RawMac{{0x06, 9, 8, 7, 6, 5}}, -128}};
  std::stringstream ss;
  write_raw_records_csv(ss, probes);
  const auto parsed = read_raw_records_csv(ss);
  ASSERT_EQ(parsed.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(parsed[i].ts, probes[i].ts);
    EXPECT_EQ(parsed[i].sensor_id, probes[i].sensor_id);
    EXPECT_EQ(parsed[i].mac, probes[i].mac);
    EXPECT_EQ(parsed[i].rssi, probes[i].rssi);
  }
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(detail::format_double(0.1), "0.1");
  EXPECT_EQ(detail::format_double(5.031), "5.031");
  EXPECT_EQ(detail::format_double(1.0), "1");
  EXPECT_EQ(detail::format_double(1e300), "1e+300");
  // Round-trip exactness for awkward values.
  const double v = 0.1 + 0.2;
  double back = 0.0;
  std::sscanf(detail::format_double(v).c_str(), "%lg", &back);
  EXPECT_EQ(back, v);
}
