// Forward observation map and observation validation.

#include <vector>

#include "doctest.h"
#include "topoinfer/forward.hpp"
#include "topoinfer/sim.hpp"

using namespace topoinfer;

namespace {

ModelParams single_link_params(int n, int i, int j, int tau) {
  ModelParams p = ModelParams::zeros(n);
  p.adjacency.set(i, j, true);
  p.set_delay(i, j, tau);
  return p;
}

}  // namespace

TEST_CASE("forward_observe: single link, lossless, delay 1") {
  ModelParams p = single_link_params(2, 0, 1, 1);
  LatentSample s(p.adjacency, 3);
  s.d[0] = {1, 0, 1};
  s.e[0] = {0, 0, 0};

  const ObservationSet obs = forward_observe(s, p);
  CHECK(obs.n_nodes == 2);
  CHECK(obs.data[0].counts == std::vector<int>{1, 0, 1});
  CHECK(obs.data[1].counts == std::vector<int>{0, 0, 0});
  CHECK(obs.acks[1].counts == std::vector<int>{0, 1, 0});  // third ACK past K
  CHECK(obs.acks[0].counts == std::vector<int>{0, 0, 0});
}

TEST_CASE("forward_observe: lost packet produces no ACK") {
  ModelParams p = single_link_params(2, 0, 1, 1);
  LatentSample s(p.adjacency, 3);
  s.d[0] = {1, 0, 1};
  s.e[0] = {1, 0, 0};

  const ObservationSet obs = forward_observe(s, p);
  CHECK(obs.acks[1].counts == std::vector<int>{0, 0, 0});
}

TEST_CASE("forward_observe: data counts aggregate over out-links") {
  ModelParams p = ModelParams::zeros(3);
  p.adjacency.set(0, 1, true);
  p.adjacency.set(0, 2, true);
  p.set_delay(0, 1, 1);
  p.set_delay(0, 2, 1);
  LatentSample s(p.adjacency, 2);
  for (int l = 0; l < 2; ++l) s.d[l] = {1, 1};

  const ObservationSet obs = forward_observe(s, p);
  CHECK(obs.data[0].counts == std::vector<int>{2, 2});
}

TEST_CASE("validate_observations") {
  SimConfig cfg;
  cfg.n_nodes = 2;
  cfg.explicit_links = {{0, 1}};
  cfg.n_slots = 10;
  ObservationSet obs = gen_model_faithful(cfg).obs;

  SUBCASE("well-formed set passes") { CHECK(!validate_observations(obs).has_value()); }

  SUBCASE("length mismatch") {
    obs.acks[1].counts.pop_back();
    auto err = validate_observations(obs);
    REQUIRE(err.has_value());
    CHECK(err->code == ValidationCode::kLengthMismatch);
  }

  SUBCASE("negative count") {
    obs.data[0].counts[3] = -1;
    auto err = validate_observations(obs);
    REQUIRE(err.has_value());
    CHECK(err->code == ValidationCode::kNegativeCount);
    CHECK_THROWS_AS(require_valid(obs), InvalidInput);
  }

  SUBCASE("bad node count") {
    obs.n_nodes = 0;
    auto err = validate_observations(obs);
    REQUIRE(err.has_value());
    CHECK(err->code == ValidationCode::kBadNodeCount);
  }

  SUBCASE("series count mismatch") {
    obs.data.pop_back();
    auto err = validate_observations(obs);
    REQUIRE(err.has_value());
    CHECK(err->code == ValidationCode::kSeriesCountMismatch);
  }

  SUBCASE("bad slot duration") {
    obs.data[0].slot_duration = 0.0;
    auto err = validate_observations(obs);
    REQUIRE(err.has_value());
    CHECK(err->code == ValidationCode::kBadSlotDuration);
  }
}

TEST_CASE("forward_observe inverts the simulator output") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SimConfig cfg;
    cfg.n_nodes = 4;
    cfg.active_fraction = 0.5;
    cfg.rate_star = 0.15;
    cfg.loss_star = 0.2;
    cfg.n_slots = 500;
    cfg.seed = seed;
    const auto out = gen_model_faithful(cfg);
    const ObservationSet rebuilt = forward_observe(out.latent, out.truth);
    REQUIRE(rebuilt.n_nodes == out.obs.n_nodes);
    for (int i = 0; i < rebuilt.n_nodes; ++i) {
      CHECK(rebuilt.data[i].counts == out.obs.data[i].counts);
      CHECK(rebuilt.acks[i].counts == out.obs.acks[i].counts);
    }
  }
}
