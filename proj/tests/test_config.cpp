#include <gtest/gtest.h>

#include "misr/config.hpp"

using namespace misr;

TEST(Config, DefaultsAreValid) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.data_dir(), std::filesystem::path("run") / "data");
  EXPECT_EQ(c.params_path(), std::filesystem::path("run") / "params.bin");
  EXPECT_EQ(c.thresholds().lr_min.num, 600000u);
  EXPECT_EQ(c.thresholds().lr_min.den, 1000000u);
  EXPECT_EQ(c.train.epochs, 200);
  EXPECT_EQ(c.train.batch_size, 4);
}

TEST(Config, ParsesKeysCommentsAndLists) {
  const RunConfig c = parse_config(R"(
# comment
output_dir = out   # trailing comment
seed = 42
members = 6
sim.noise_max = 0.08
split.test_fraction = 0.5
split.exclude = RED/tile0001, tile0002
train.epochs = 3
train.mask_loss = false
evaluate.dump_images = no
)");
  EXPECT_EQ(c.output_dir, "out");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.members, 6u);
  EXPECT_EQ(c.sim.noise_max, 0.08);
  EXPECT_EQ(c.split.test_fraction, 0.5);
  EXPECT_EQ(c.exclude, (std::vector<std::string>{"RED/tile0001", "tile0002"}));
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_FALSE(c.train.mask_loss);
  EXPECT_FALSE(c.dump_images);
  EXPECT_EQ(c.manifest_path(), std::filesystem::path("out") / "manifest.json");
}

TEST(Config, LaterSettingsOverride) {
  RunConfig c = parse_config("seed = 1\nseed = 2\n");
  EXPECT_EQ(c.seed, 2u);
  apply_setting(c, "seed", "3");
  EXPECT_EQ(c.seed, 3u);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("bogus = 1"), ConfigError);
  EXPECT_THROW(parse_config("seed 1"), ConfigError);
  EXPECT_THROW(parse_config("seed = abc"), ConfigError);
  EXPECT_THROW(parse_config("train.mask_loss = maybe"), ConfigError);
  EXPECT_THROW(parse_config("= 4"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/misr.cfg"), IoError);
}

TEST(Config, ValidationCatchesInconsistency) {
  EXPECT_THROW(parse_config("members = 0").validate(), ConfigError);
  EXPECT_THROW(parse_config("input_count = 4").validate(), ConfigError);
  EXPECT_THROW(parse_config("n_lr = 8").validate(), ConfigError);
  EXPECT_THROW(parse_config("split.test_fraction = 1.5").validate(), ConfigError);
  EXPECT_THROW(parse_config("sim.shift_max = 4").validate(), ConfigError);
  EXPECT_THROW(parse_config("train.epochs = 0").validate(), ConfigError);
}

TEST(Config, ShippedDemoConfigLoads) {
  const RunConfig c = load_config(std::filesystem::path(MISR_SOURCE_DIR) / "configs" / "demo.cfg");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.members, 200u);
  EXPECT_EQ(c.train.epochs, 8);
}
