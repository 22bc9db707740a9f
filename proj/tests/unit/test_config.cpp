#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "visern/config.hpp"
#include "visern/error.hpp"

using namespace visern;

TEST_SUITE("config") {
  TEST_CASE("parse handles comments, blanks and whitespace") {
    const KeyValues kv = parse_key_values("# header\n\n  lr = 0.001  # inline\nseed=3\n\t\n");
    REQUIRE(kv.size() == 2);
    CHECK(kv[0] == std::pair<std::string, std::string>{"lr", "0.001"});
    CHECK(kv[1] == std::pair<std::string, std::string>{"seed", "3"});
  }

  TEST_CASE("malformed lines") {
    CHECK_THROWS_AS(parse_key_values("lr 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse_key_values("=3\n"), ConfigError);
    try {
      parse_key_values("a=1\n\nbroken\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  TEST_CASE("apply: known keys, later duplicates win") {
    TrainConfig cfg;
    apply_config(cfg, {{"lr", "0.01"}, {"batch_size", "16"}, {"reasoning", "sym"}, {"lr", "0.02"}});
    CHECK(cfg.lr == 0.02);
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.reasoning == "sym");
  }

  TEST_CASE("apply: rejects unknown keys, bad numbers and out-of-range values") {
    TrainConfig cfg;
    CHECK_THROWS_AS(apply_config(cfg, {{"learning_rate", "0.1"}}), ConfigError);
    CHECK_THROWS_AS(apply_config(cfg, {{"lr", "fast"}}), ConfigError);
    CHECK_THROWS_AS(apply_config(cfg, {{"batch_size", "-4"}}), ConfigError);
    CHECK_THROWS_AS(apply_config(cfg, {{"batch_size", "0"}}), ConfigError);
    CHECK_THROWS_AS(apply_config(cfg, {{"lr_decay_factor", "1.5"}}), ConfigError);
    CHECK_THROWS_AS(apply_config(cfg, {{"adjacency", "cosine"}}), ConfigError);
  }

  TEST_CASE("dump then parse round-trips every field") {
    TrainConfig cfg;
    cfg.lr = 0.1 + 0.2;  // not exactly representable as a short decimal
    cfg.margin = 1.0 / 3.0;
    cfg.seed = 18446744073709551615ULL;
    cfg.reasoning = "row";
    cfg.adjacency = "softplus";
    cfg.reduction = "mean";
    cfg.frames = 4;
    TrainConfig back;
    apply_config(back, parse_key_values(dump_key_values(to_key_values(cfg))));
    CHECK(back == cfg);
    CHECK_FALSE(back == TrainConfig{});
  }

  TEST_CASE("file loading") {
    const auto path = std::filesystem::temp_directory_path() / "visern_test_config.txt";
    {
      std::ofstream out(path);
      out << "# saved run\nmax_epochs = 5\n";
    }
    const KeyValues kv = load_key_values(path);
    REQUIRE(kv.size() == 1);
    CHECK(kv[0].second == "5");
    CHECK_THROWS_AS(load_key_values(path.string() + ".missing"), IoError);
  }

  TEST_CASE("format_double is shortest round-trip") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1e-4) == "1e-04");
    for (double v : {0.1 + 0.2, 1.0 / 3.0, 6.02214076e23, -2.5e-300})
      CHECK(std::stod(format_double(v)) == v);
  }
}
