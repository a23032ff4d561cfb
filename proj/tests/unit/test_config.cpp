#include <gtest/gtest.h>

#include "peduncle/config.hpp"

using namespace peduncle;

TEST(Config, DefaultsRoundTrip) {
  const Settings d;
  const Settings back = parse_settings(format_settings(d));
  EXPECT_EQ(format_settings(back), format_settings(d));
  EXPECT_DOUBLE_EQ(back.svm_gamma, 1.0 / 36.0);
}

TEST(Config, OverridesAndComments) {
  const auto s = parse_settings("# comment\n score_threshold = 0.7  # trailing\n\nup_axis = +z\n");
  EXPECT_DOUBLE_EQ(s.score_threshold, 0.7);
  EXPECT_EQ(s.up_axis, "+z");
  EXPECT_EQ(s.min_cluster, 5u);
}

TEST(Config, UnknownKeyIsParseError) {
  try {
    parse_settings("no_such_key = 1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(Config, MalformedLines) {
  EXPECT_THROW(parse_settings("score_threshold 0.5\n"), Error);
  EXPECT_THROW(parse_settings("score_threshold =\n"), Error);
  EXPECT_THROW(parse_settings("min_cluster = many\n"), Error);
}

TEST(Config, ValidationRejectsBadValues) {
  EXPECT_THROW(parse_settings("score_threshold = 1.5\n"), Error);
  EXPECT_THROW(parse_settings("min_cluster = 10\nmax_cluster = 5\n"), Error);
  EXPECT_THROW(parse_settings("up_axis = up\n"), Error);
  EXPECT_THROW(parse_settings("vertical_span = both\n"), Error);
  EXPECT_THROW(parse_settings("h_offset = 0\n"), Error);
  EXPECT_THROW(parse_settings("svm_kernel = poly\n"), Error);
}

TEST(Config, ShippedDefaultFileMatchesDefaults) {
  const auto s = load_settings(std::string(PEDUNCLE_DATA_DIR) + "/../config/default.cfg");
  EXPECT_EQ(format_settings(s), format_settings(Settings{}));
}
