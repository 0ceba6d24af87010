#include <gtest/gtest.h>

#include "noisectx/config.hpp"
#include "noisectx/errors.hpp"

namespace noisectx {
namespace {

TEST(KeyValueConfig, ParsesCommentsAndWhitespace) {
  auto c = KeyValueConfig::parse("# run\n variant = E2 \n\nd=32 # model width\nsnrs = -5, 0,5\n");
  EXPECT_EQ(c.get_string("variant", ""), "E2");
  EXPECT_EQ(c.get_size("d", 0), 32u);
  EXPECT_EQ(c.get_doubles("snrs", {}), (std::vector<double>{-5, 0, 5}));
  EXPECT_EQ(c.get_int("missing", 7), 7);
}

TEST(KeyValueConfig, MalformedValuesNameTheKey) {
  auto c = KeyValueConfig::parse("d = abc\nlr = 1e-3x\nflag = maybe\nneg = -3\n");
  try {
    c.get_size("d", 0);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("d"), std::string::npos);
  }
  EXPECT_THROW(c.get_double("lr", 0), ConfigError);
  EXPECT_THROW(c.get_bool("flag", false), ConfigError);
  EXPECT_THROW(c.get_size("neg", 0), ConfigError);
  EXPECT_EQ(c.get_int("neg", 0), -3);
}

TEST(KeyValueConfig, LineWithoutEqualsIsRejected) {
  EXPECT_THROW(KeyValueConfig::parse("variant E3\n"), ConfigError);
}

TEST(KeyValueConfig, MergeOverridesAndTextRoundTrips) {
  auto base = KeyValueConfig::parse("a=1\nb=2\n");
  auto top = KeyValueConfig::parse("b=3\n");
  base.merge(top);
  EXPECT_EQ(base.get_int("b", 0), 3);
  auto again = KeyValueConfig::parse(base.to_text());
  EXPECT_EQ(again.entries(), base.entries());
}

TEST(KeyValueConfig, MissingFileIsAnIoError) {
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/run.cfg"), IoError);
}

}  // namespace
}  // namespace noisectx
