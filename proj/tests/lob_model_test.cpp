#include "loblab/lob_model.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace loblab;

namespace {

std::string data_path(const std::string& name) { return std::string(LOBLAB_TEST_DATA) + "/" + name; }

}  // namespace

TEST(ParseOrderbook, TwoLevelLine) {
  std::istringstream in("5853000,100,5852900,50,5853100,20,5852800,80\n");
  auto rows = parse_orderbook_file(in, 2);
  ASSERT_EQ(rows.size(), 1u);
  const LobSnapshot& s = rows[0];
  EXPECT_EQ(s.ask_price[0], 5853000);
  EXPECT_EQ(s.ask_volume[0], 100);
  EXPECT_EQ(s.ask_price[1], 5853100);
  EXPECT_EQ(s.ask_volume[1], 20);
  EXPECT_EQ(s.bid_price[0], 5852900);
  EXPECT_EQ(s.bid_volume[0], 50);
  EXPECT_EQ(s.bid_price[1], 5852800);
  EXPECT_EQ(s.bid_volume[1], 80);
  EXPECT_TRUE(s.check().empty());
}

TEST(ParseOrderbook, EmptyStream) {
  std::istringstream in("");
  EXPECT_TRUE(parse_orderbook_file(in, 5).empty());
}

TEST(ParseOrderbook, BadColumnCountReportsLine) {
  std::istringstream in("1,2,0,5\n10,1,4,2,11,3\n");
  try {
    parse_orderbook_file(in, 1);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseOrderbook, PriceOrderingViolationNamesLevel) {
  // live ask level 2 priced below level 1
  std::istringstream in("100,5,99,5,98,7,97,5\n");
  try {
    parse_orderbook_file(in, 2);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("level 2"), std::string::npos);
  }
}

TEST(ParseOrderbook, LobsterDummyLevelsCanonicalized) {
  // missing depth in vendor form: duplicated extreme dummy price, volume 0
  std::istringstream in(
      "100,5,99,5,9999999999,0,-9999999999,0,9999999999,0,-9999999999,0\n");
  auto rows = parse_orderbook_file(in, 3);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].ask_price[1], 101);
  EXPECT_EQ(rows[0].ask_price[2], 102);
  EXPECT_EQ(rows[0].bid_price[1], 98);
  EXPECT_EQ(rows[0].bid_price[2], 97);
  EXPECT_TRUE(rows[0].check().empty());
}

TEST(ParseOrderbook, LiveLevelAfterMissingDepthRejected) {
  std::istringstream in("100,5,99,5,101,0,98,4,102,3,97,2\n");
  EXPECT_THROW(parse_orderbook_file(in, 3), ValidationError);
}

TEST(ParseMessage, DocumentedLobsterRow) {
  std::istringstream in("34200.004241176,1,16113575,18,585100,-1\n");
  auto events = parse_message_file(in);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].kind, EventKind::submission);
  EXPECT_EQ(events[0].side, Side::sell);
  EXPECT_EQ(events[0].size, 18);
  EXPECT_EQ(events[0].price, 585100);
  EXPECT_EQ(events[0].time_ns, 34200004241176LL);
}

TEST(ParseMessage, FullDeleteBuy) {
  std::istringstream in("36000.0,3,42,5,1000000,1\n");
  auto events = parse_message_file(in);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].kind, EventKind::full_delete);
  EXPECT_EQ(events[0].side, Side::buy);
  EXPECT_EQ(events[0].time_ns, 36000LL * 1000000000LL);
}

TEST(ParseMessage, UnknownTypeCodeRejected) {
  std::istringstream in("1.0,6,1,1,100,1\n");
  try {
    parse_message_file(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown event kind"), std::string::npos);
  }
}

TEST(ParseMessage, NegativeSizeRejected) {
  std::istringstream in("1.0,1,1,-3,100,1\n");
  EXPECT_THROW(parse_message_file(in), ValidationError);
}

TEST(ParseMessage, DecreasingTimesRejected) {
  std::istringstream in("2.0,1,1,3,100,1\n1.5,1,2,3,100,1\n");
  EXPECT_THROW(parse_message_file(in), ValidationError);
}

TEST(WriteOrderbook, SingleSnapshotOneLine) {
  LobSnapshot s = LobSnapshot::empty(1);
  s.ask_price[0] = 101;
  s.ask_volume[0] = 7;
  s.bid_price[0] = 100;
  s.bid_volume[0] = 9;
  std::ostringstream os;
  write_orderbook_file({s}, os);
  EXPECT_EQ(os.str(), "101,7,100,9\n");
}

TEST(WriteOrderbook, MixedLevelCountsRejected) {
  LobSnapshot a = LobSnapshot::empty(1);
  a.ask_price[0] = 101;
  a.ask_volume[0] = 1;
  a.bid_price[0] = 100;
  a.bid_volume[0] = 1;
  Rng rng(1);
  LobSnapshot b = testutil::random_snapshot(rng, 2);
  std::ostringstream os;
  EXPECT_THROW(write_orderbook_file({a, b}, os), ValidationError);
}

TEST(RoundTrip, RandomSeriesByteIdentity) {
  Rng rng(2024);
  for (int rep = 0; rep < 50; ++rep) {
    int levels = 1 + static_cast<int>(rng.uniform_int(5));
    auto series = testutil::random_series(rng, 40, levels);
    std::string bytes = testutil::book_to_string(series);
    std::istringstream in(bytes);
    auto parsed = parse_orderbook_file(in, levels);
    ASSERT_EQ(parsed.size(), series.size());
    for (size_t i = 0; i < series.size(); ++i) {
      ASSERT_EQ(parsed[i].ask_price, series[i].ask_price);
      ASSERT_EQ(parsed[i].ask_volume, series[i].ask_volume);
      ASSERT_EQ(parsed[i].bid_price, series[i].bid_price);
      ASSERT_EQ(parsed[i].bid_volume, series[i].bid_volume);
    }
    EXPECT_EQ(testutil::book_to_string(parsed), bytes);
  }
}

TEST(RoundTrip, MessageFileByteIdentity) {
  std::ifstream mf(data_path("sample_level5_message.csv"));
  ASSERT_TRUE(mf.good());
  std::stringstream buf;
  buf << mf.rdbuf();
  std::string original = buf.str();
  std::istringstream in(original);
  auto events = parse_message_file(in);
  std::ostringstream out;
  write_message_file(events, out);
  EXPECT_EQ(out.str(), original);
}

TEST(SampleFiles, BookAndMessagePairConsistent) {
  std::ifstream bf(data_path("sample_level5_orderbook.csv"));
  std::ifstream mf(data_path("sample_level5_message.csv"));
  ASSERT_TRUE(bf.good());
  ASSERT_TRUE(mf.good());
  auto book = parse_orderbook_file(bf, 5);
  auto msgs = parse_message_file(mf);
  EXPECT_EQ(book.size(), msgs.size());
  ASSERT_FALSE(book.empty());
  for (const auto& s : book) EXPECT_TRUE(s.check().empty());
  attach_message_times(book, msgs);
  EXPECT_EQ(book[0].time_ns, msgs[0].time_ns);
}

TEST(SampleFiles, OrderbookRoundTripsByteExactly) {
  std::ifstream bf(data_path("sample_level5_orderbook.csv"));
  ASSERT_TRUE(bf.good());
  std::stringstream buf;
  buf << bf.rdbuf();
  std::string original = buf.str();
  std::istringstream in(original);
  auto book = parse_orderbook_file(in, 5);
  EXPECT_EQ(testutil::book_to_string(book), original);
}

TEST(Sidecars, LabelsRoundTrip) {
  std::vector<uint8_t> labels = {0, 1, 1, 0, 0, 1};
  std::ostringstream os;
  write_labels_file(labels, os);
  std::istringstream in(os.str());
  EXPECT_EQ(parse_labels_file(in), labels);
}

TEST(Sidecars, SpansRoundTrip) {
  std::vector<AnomalySpan> spans;
  spans.push_back({.start = 10, .end = 14, .side = BookSide::ask, .levels = {3, 3, 2, 2, 1}, .volume = 440});
  spans.push_back({.start = 90, .end = 91, .side = BookSide::bid, .levels = {5, 5}, .volume = 12});
  std::ostringstream os;
  write_spans_file(spans, os);
  std::istringstream in(os.str());
  auto parsed = parse_spans_file(in);
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0], spans[0]);
  EXPECT_EQ(parsed[1], spans[1]);
}

TEST(LabeledSeries, CheckDetectsLabelSpanMismatch) {
  Rng rng(5);
  LabeledSeries series;
  series.snapshots = testutil::random_series(rng, 10, 2);
  series.labels.assign(10, 0);
  series.labels[3] = 1;
  EXPECT_FALSE(series.check().empty());
  series.spans.push_back({.start = 3, .end = 3, .side = BookSide::bid, .levels = {1}, .volume = 5});
  EXPECT_TRUE(series.check().empty());
}
