#include <doctest.h>

#include "wgspdc/config.hpp"
#include "wgspdc/outputs.hpp"

#include <cstdio>
#include <fstream>

using namespace wgspdc;

TEST_CASE("default configuration round-trips identically") {
  RunConfig cfg = RunConfig::defaults();
  std::string text = serialize_config(cfg);
  RunConfig back = parse_config_text(text);
  std::string text2 = serialize_config(back);
  CHECK(text == text2);
  CHECK(back.geometry.poling_period_um == cfg.geometry.poling_period_um);
  CHECK(back.material.z.coeff == cfg.material.z.coeff);
  CHECK(back.measurement.seed == cfg.measurement.seed);
}

TEST_CASE("negative poling period is rejected with its key address") {
  RunConfig cfg = RunConfig::defaults();
  cfg.geometry.poling_period_um = -1.0;
  std::string text = serialize_config(cfg);
  try {
    parse_config_text(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("geometry.poling_period_um") != std::string::npos);
  }
}

TEST_CASE("all violations are reported at once, unknown keys included") {
  RunConfig cfg = RunConfig::defaults();
  std::string text = serialize_config(cfg);
  // break several things at once
  text.replace(text.find("\"width_um\": 2.0"), 15, "\"width_um\": -2.0");
  text.replace(text.find("\"fwhm_nm\": 1.0"), 14, "\"fwhm_nm\": -1.0");
  text.insert(text.find("\"geometry\""), "\"surprise_key\": 1,\n  ");
  try {
    parse_config_text(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("geometry.width_um") != std::string::npos);
    CHECK(msg.find("pump.fwhm_nm") != std::string::npos);
    CHECK(msg.find("surprise_key") != std::string::npos);
    CHECK(msg.find("3 error(s)") != std::string::npos);
  }
}

TEST_CASE("missing keys and denormalized excitations are caught") {
  std::string text = serialize_config(RunConfig::defaults());
  auto pos = text.find("\"re\": 1.0");
  text.replace(pos, 9, "\"re\": 0.5");
  CHECK_THROWS_AS(parse_config_text(text), ConfigError);
}

TEST_CASE("file round trip") {
  RunConfig cfg = RunConfig::defaults();
  const char* path = "test_roundtrip_config.json";
  write_config(cfg, path);
  RunConfig back = parse_config(path);
  CHECK(serialize_config(back) == serialize_config(cfg));
  std::remove(path);
  CHECK_THROWS_AS(parse_config("definitely_not_here.json"), ConfigError);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex(std::string{}) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string{"abc"}) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // long input crossing block boundaries
  std::string big(1000, 'a');
  CHECK(sha256_hex(big) == "41edece42d63e8d9bf515a9ba6932e1c20cbc9f5a5d134645adb5db1b9737ea3");
}

TEST_CASE("mode labels parse and reject") {
  CHECK(mode_label_from_string("02") == ModeLabel{0, 2});
  CHECK(mode_label_from_string("30") == ModeLabel{3, 0});
  CHECK_THROWS_AS(mode_label_from_string("x2"), std::invalid_argument);
  CHECK_THROWS_AS(mode_label_from_string("123"), std::invalid_argument);
}
