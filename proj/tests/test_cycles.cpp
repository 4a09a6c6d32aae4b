#include <doctest.h>

#include <algorithm>

#include "hevems/cycles.hpp"
#include "hevems/errors.hpp"
#include "test_util.hpp"

using namespace hevems;
using hevems::test::TempDir;
using hevems::test::write_file;

TEST_CASE("load_cycle derives accel by forward difference") {
  TempDir tmp;
  write_file(tmp.file("ramp.csv"), "t,speed_mps\n0,0\n1,1\n2,2\n");
  const DrivingCycle ramp = load_cycle(tmp.file("ramp.csv"));
  CHECK(ramp.speed == std::vector<double>{0, 1, 2});
  CHECK(ramp.accel == std::vector<double>{1, 1, 0});

  write_file(tmp.file("flat.csv"), "t,speed_mps\n0,5\n1,5\n2,5\n");
  const DrivingCycle flat = load_cycle(tmp.file("flat.csv"));
  CHECK(flat.accel == std::vector<double>{0, 0, 0});
}

TEST_CASE("load_cycle accepts a supplied accel column") {
  TempDir tmp;
  write_file(tmp.file("c.csv"),
             "t,speed_mps,accel_mps2\n0,3,0.5\n1,3.5,-0.5\n2,3,0\n");
  const DrivingCycle c = load_cycle(tmp.file("c.csv"));
  CHECK(c.accel == std::vector<double>{0.5, -0.5, 0});
}

TEST_CASE("load_cycle rejects out-of-bound speeds naming the index") {
  TempDir tmp;
  write_file(tmp.file("fast.csv"), "t,speed_mps\n0,10\n1,50\n2,10\n");
  CHECK_THROWS_WITH_AS(load_cycle(tmp.file("fast.csv")),
                       doctest::Contains("index 1"), ValidationError);
}

TEST_CASE("load_cycle rejects malformed records naming the line") {
  TempDir tmp;
  write_file(tmp.file("bad.csv"), "t,speed_mps\n0,1\n1,banana\n");
  CHECK_THROWS_WITH_AS(load_cycle(tmp.file("bad.csv")),
                       doctest::Contains(":3"), ParseError);

  write_file(tmp.file("header.csv"), "speed\n0\n");
  CHECK_THROWS_AS(load_cycle(tmp.file("header.csv")), ParseError);

  CHECK_THROWS_AS(load_cycle(tmp.file("missing.csv")), ConfigError);
}

TEST_CASE("cycle round trip is exact") {
  TempDir tmp;
  const DrivingCycle cycle = synthesize_cycle(42, 120, CycleProfile::kUrban);
  write_cycle(cycle, tmp.file("rt.csv"));
  const DrivingCycle back = load_cycle(tmp.file("rt.csv"));
  REQUIRE(back.speed.size() == cycle.speed.size());
  for (std::size_t i = 0; i < cycle.speed.size(); ++i) {
    CHECK(back.speed[i] == cycle.speed[i]);
    CHECK(back.accel[i] == doctest::Approx(cycle.accel[i]).epsilon(1e-9));
  }
}

TEST_CASE("synthesize_cycle is deterministic per seed") {
  const DrivingCycle a = synthesize_cycle(7, 300, CycleProfile::kUrban);
  const DrivingCycle b = synthesize_cycle(7, 300, CycleProfile::kUrban);
  CHECK(a.speed == b.speed);
  CHECK(a.accel == b.accel);
  const DrivingCycle c = synthesize_cycle(8, 300, CycleProfile::kUrban);
  CHECK(a.speed != c.speed);
}

TEST_CASE("synthesize_cycle rejects short durations") {
  CHECK_THROWS_AS(synthesize_cycle(1, 30, CycleProfile::kUrban), DomainError);
}

TEST_CASE("synthesized cycles satisfy the state bounds over 100 seeds") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    for (auto profile : {CycleProfile::kUrban, CycleProfile::kSuburban,
                         CycleProfile::kHighway}) {
      const DrivingCycle cycle = synthesize_cycle(seed, 120, profile);
      CHECK_NOTHROW(validate_cycle(cycle));
    }
  }
}

TEST_CASE("urban cycles idle, highway cycles do not stop") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const DrivingCycle urban = synthesize_cycle(seed, 300, CycleProfile::kUrban);
    CHECK(std::count(urban.speed.begin(), urban.speed.end(), 0.0) > 0);
    const DrivingCycle highway =
        synthesize_cycle(seed, 300, CycleProfile::kHighway);
    CHECK(highway.mean_speed() > urban.mean_speed());
  }
}

namespace {

std::vector<DrivingCycle> make_pool(int n) {
  std::vector<DrivingCycle> pool;
  for (int i = 0; i < n; ++i)
    pool.push_back(synthesize_cycle(100 + i, 60, CycleProfile::kUrban));
  return pool;
}

}  // namespace

TEST_CASE("make_partition honors the include flag") {
  const auto pool = make_pool(20);
  const std::vector<std::string> targets = {pool[3].id, pool[11].id};

  SUBCASE("full pool with targets included") {
    const CyclePartition part = make_partition(pool, 20, targets, true);
    CHECK(part.source.size() == 20);
    CHECK(part.includes_target_in_source);
    for (const auto& t : targets)
      CHECK(std::count(part.source.begin(), part.source.end(), t) == 1);
  }

  SUBCASE("exclusion keeps the sets disjoint") {
    const CyclePartition part = make_partition(pool, 5, targets, false);
    CHECK(part.source.size() == 5);
    CHECK_FALSE(part.includes_target_in_source);
    for (const auto& t : targets)
      CHECK(std::count(part.source.begin(), part.source.end(), t) == 0);
  }

  SUBCASE("n_source too small for the targets") {
    CHECK_THROWS_AS(make_partition(pool, 1, targets, true), ConfigError);
  }

  SUBCASE("unknown target id") {
    CHECK_THROWS_AS(make_partition(pool, 5, {"nope"}, true), ConfigError);
  }

  SUBCASE("flag matches membership for random configurations") {
    for (std::size_t n : {2u, 5u, 10u, 18u}) {
      for (bool include : {true, false}) {
        const CyclePartition part = make_partition(pool, n, targets, include);
        bool all_present = true;
        for (const auto& t : targets)
          all_present = all_present &&
                        std::count(part.source.begin(), part.source.end(),
                                   t) == 1;
        CHECK(part.includes_target_in_source == all_present);
      }
    }
  }
}
