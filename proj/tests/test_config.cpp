#include <gtest/gtest.h>

#include "hjhom/config.hpp"

using hjhom::Config;
using hjhom::ConfigParseError;

TEST(Config, ParsesKeysCommentsAndFractions) {
  auto cfg = Config::parse("# header\ndimension = 2\n\ngrid.dt = 1/8   # inline\nsweep.eps = 1/4, 1/8,0.0625\n");
  EXPECT_EQ(cfg.get_int("dimension", 1), 2);
  EXPECT_DOUBLE_EQ(cfg.get_double("grid.dt", 0.0), 0.125);
  auto eps = cfg.get_list("sweep.eps", {});
  ASSERT_EQ(eps.size(), 3u);
  EXPECT_DOUBLE_EQ(eps[1], 0.125);
  EXPECT_EQ(cfg.line_of("grid.dt"), 4);
  EXPECT_EQ(cfg.get_string("missing", "x"), "x");
}

TEST(Config, DuplicateKeyReportsLine) {
  try {
    Config::parse("a = 1\nb = 2\na = 3\n");
    FAIL() << "expected a parse error";
  } catch (const ConfigParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Config, MissingEqualsReportsLine) {
  try {
    Config::parse("a = 1\n\njunk\n");
    FAIL();
  } catch (const ConfigParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Config, UnknownKeyRejected) {
  auto cfg = Config::parse("dimension = 1\nbogus.key = 4\n");
  try {
    cfg.require_known({"dimension"});
    FAIL();
  } catch (const ConfigParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(Config, BadNumbers) {
  auto cfg = Config::parse("n = 3.5\nx = abc\nq = 1/0\n");
  EXPECT_THROW(cfg.get_int("n", 0), ConfigParseError);
  EXPECT_THROW(cfg.get_double("x", 0), ConfigParseError);
  EXPECT_THROW(cfg.get_double("q", 0), ConfigParseError);
}

TEST(Config, MalformedKey) { EXPECT_THROW(Config::parse("bad key = 1\n"), ConfigParseError); }
