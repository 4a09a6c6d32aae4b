#include <doctest.h>

#include "hevems/config.hpp"
#include "hevems/errors.hpp"
#include "test_util.hpp"

using namespace hevems;
using hevems::test::TempDir;
using hevems::test::write_file;

TEST_CASE("the empty config is runnable on synthetic cycles") {
  const RunConfig cfg = run_config_from_json_text("");
  CHECK(cfg.seed == 1);
  CHECK(cfg.hyper.gamma == 0.9);
  CHECK(cfg.hyper.lr == 0.01);
  CHECK(cfg.hyper.horizon_k == 512);
  CHECK(cfg.hyper.minibatch_z == 64);
  CHECK(cfg.hyper.clip_eps == 0.2);
  CHECK(cfg.hyper.gae_lambda == 0.92);
  CHECK(cfg.powertrain.m_v == 1325.0);
  CHECK(cfg.powertrain.V_oc == 150.0);
  CHECK(cfg.powertrain.soc_ref == 0.65);

  const auto pool = build_cycle_pool(cfg);
  CHECK(pool.size() == 6);
  const CyclePartition part = resolve_partition(cfg, pool);
  CHECK(part.source.size() == 5);
  CHECK(part.target.size() == 1);
  CHECK(part.includes_target_in_source);
}

TEST_CASE("config parsing reports field paths") {
  CHECK_THROWS_WITH_AS(run_config_from_json_text("{\"hyperx\": 1}", "cfg"),
                       doctest::Contains("cfg.hyperx"), ConfigError);
  CHECK_THROWS_WITH_AS(
      run_config_from_json_text("{\"hyper\": {\"gammma\": 0.9}}", "cfg"),
      doctest::Contains("cfg.hyper.gammma"), ConfigError);
  CHECK_THROWS_WITH_AS(
      run_config_from_json_text("{\"hyper\": {\"gamma\": \"x\"}}", "cfg"),
      doctest::Contains("cfg.hyper.gamma"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json_text("{nope", "cfg"), ConfigError);
}

TEST_CASE("config validation catches inconsistent values") {
  CHECK_THROWS_AS(
      run_config_from_json_text("{\"hyper\": {\"gamma\": 1.5}}"),
      ConfigError);
  CHECK_THROWS_AS(
      run_config_from_json_text(
          "{\"powertrain\": {\"p_bat_max\": 23000.0}}"),
      ValidationError);
  CHECK_THROWS_AS(
      run_config_from_json_text(
          "{\"powertrain\": {\"engine_map\": \"/no/such/file\"}}"),
      ConfigError);
}

TEST_CASE("configured cycles combine files and synthesis") {
  TempDir tmp;
  write_file(tmp.file("c.csv"), "t,speed_mps\n0,0\n1,2\n2,4\n");
  const std::string text =
      "{\"cycles\": {\"paths\": [\"" + tmp.file("c.csv").string() +
      "\"], \"synth\": [{\"seed\": 3, \"duration_s\": 60, \"profile\": "
      "\"highway\"}]}}";
  const RunConfig cfg = run_config_from_json_text(text);
  const auto pool = build_cycle_pool(cfg);
  REQUIRE(pool.size() == 2);
  CHECK(pool[0].id == "c");
  CHECK(pool[1].id.rfind("highway", 0) == 0);
}

TEST_CASE("config hash is stable and canonical") {
  const RunConfig a = run_config_from_json_text("");
  const RunConfig b = run_config_from_json_text("{\"seed\": 1}");
  CHECK(a.config_hash == b.config_hash);  // same resolved form
  const RunConfig c = run_config_from_json_text("{\"seed\": 2}");
  CHECK(a.config_hash != c.config_hash);
}

TEST_CASE("manifest is reproducible byte for byte") {
  TempDir tmp;
  const RunConfig cfg = run_config_from_json_text("");
  write_manifest(cfg, {"a.csv", "b.csv"}, tmp.file("m1.json"));
  write_manifest(cfg, {"a.csv", "b.csv"}, tmp.file("m2.json"));
  CHECK(hevems::test::read_file(tmp.file("m1.json")) ==
        hevems::test::read_file(tmp.file("m2.json")));
}

TEST_CASE("environment variable overrides the output directory") {
  setenv("HEVEMS_OUT", "/tmp/hevems-env-out", 1);
  const RunConfig cfg = run_config_from_json_text("");
  unsetenv("HEVEMS_OUT");
  CHECK(cfg.out_dir == std::filesystem::path("/tmp/hevems-env-out"));
}
