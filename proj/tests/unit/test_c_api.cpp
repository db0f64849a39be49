#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gridshield/gridshield.h"

namespace {

std::string temp(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gridshield_capi_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string take(char* s) {
  std::string out = s;
  gs_string_free(s);
  return out;
}

std::size_t lines(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

// Random walk at a coarse grid: quick to synthesize, nonempty safe set.
gs_config* walk_config() {
  gs_config* c = nullptr;
  EXPECT_EQ(gs_config_default("random_walk", &c), GS_OK);
  EXPECT_EQ(gs_config_set(c, "/learn/episodes", "200"), GS_OK);
  EXPECT_EQ(gs_config_set(c, "/evaluate/episodes", "300"), GS_OK);
  return c;
}

}  // namespace

TEST(CApi, ConfigLifecycle) {
  gs_config* c = nullptr;
  ASSERT_EQ(gs_config_default("bouncing_ball", &c), GS_OK);
  uint64_t d1 = 0, d2 = 0;
  ASSERT_EQ(gs_config_digest(c, &d1), GS_OK);
  ASSERT_EQ(gs_config_set(c, "/seed", "5"), GS_OK);
  ASSERT_EQ(gs_config_digest(c, &d2), GS_OK);
  EXPECT_NE(d1, d2);
  char* json = nullptr;
  ASSERT_EQ(gs_config_dump(c, &json), GS_OK);
  gs_config* back = nullptr;
  ASSERT_EQ(gs_config_parse(json, &back), GS_OK);
  gs_string_free(json);
  uint64_t d3 = 0;
  gs_config_digest(back, &d3);
  EXPECT_EQ(d2, d3);
  gs_config_free(back);

  ASSERT_EQ(gs_config_set(c, "/model", "\"cruise_control\""), GS_OK);
  char* name = nullptr;
  gs_config_model(c, &name);
  EXPECT_EQ(take(name), "cruise_control");
  const double g = 1.0;
  EXPECT_EQ(gs_config_set_gamma(c, &g, 1), GS_OK);
  gs_config_free(c);
}

TEST(CApi, ErrorsAreReported) {
  gs_config* c = nullptr;
  EXPECT_EQ(gs_config_default("nope", &c), GS_ERR_CONFIG);
  EXPECT_NE(std::string(gs_last_error()), "");
  EXPECT_EQ(gs_config_parse("{\"unknown\": 1}", &c), GS_ERR_CONFIG);
  EXPECT_EQ(gs_config_parse("[1,", &c), GS_ERR_CONFIG);
  EXPECT_EQ(gs_config_load("/no/such/file.json", &c), GS_ERR_IO);
  EXPECT_EQ(gs_config_default(nullptr, &c), GS_ERR_INVALID_ARGUMENT);
  gs_shield* s = nullptr;
  EXPECT_EQ(gs_shield_load("/no/such/shield", &s), GS_ERR_IO);
  double lower = 0;
  EXPECT_EQ(gs_clopper_pearson_lower(3, 2, 0.99, &lower), GS_ERR_DOMAIN);
  EXPECT_STREQ(gs_status_name(GS_ERR_MISMATCH), "partition mismatch");
}

TEST(CApi, MemoryBudget) {
  gs_config* c = nullptr;
  ASSERT_EQ(gs_config_default("bouncing_ball", &c), GS_OK);
  ASSERT_EQ(gs_config_set(c, "/memory_budget_mb", "1"), GS_OK);
  gs_shield* s = nullptr;
  EXPECT_EQ(gs_synthesize(c, nullptr, &s, nullptr), GS_ERR_MEMORY_BUDGET);
  gs_config_free(c);
}

TEST(CApi, SynthesizeLearnEvaluate) {
  gs_config* c = walk_config();
  gs_shield* shield = nullptr;
  gs_synthesis_report rep{};
  ASSERT_EQ(gs_synthesize(c, nullptr, &shield, &rep), GS_OK) << gs_last_error();
  EXPECT_EQ(rep.cells, 26u * 26u);
  EXPECT_GT(rep.safe_cells, 0u);
  EXPECT_EQ(rep.initial_state_safe, 1);
  uint64_t cells = 0, winning = 0;
  gs_shield_cells(shield, &cells, &winning);
  EXPECT_EQ(winning, rep.safe_cells);

  const std::string path = temp("walk.shld");
  ASSERT_EQ(gs_shield_save(shield, path.c_str()), GS_OK);
  gs_shield* loaded = nullptr;
  ASSERT_EQ(gs_shield_load(path.c_str(), &loaded), GS_OK);
  const double s0[2] = {0.0, 0.0};
  uint8_t m1 = 0, m2 = 0;
  int sh = 0;
  ASSERT_EQ(gs_shield_lift(loaded, s0, 2, &m2, &sh), GS_OK);
  gs_shield_lift(shield, s0, 2, &m1, nullptr);
  EXPECT_EQ(m1, m2);
  EXPECT_EQ(sh, 1);
  EXPECT_EQ(gs_shield_lift(loaded, s0, 3, &m2, &sh), GS_ERR_INVALID_ARGUMENT);

  gs_qtable* agent = nullptr;
  ASSERT_EQ(gs_learn(c, shield, GS_MODE_PRE, &agent), GS_OK) << gs_last_error();
  gs_eval_report ev{};
  ASSERT_EQ(gs_evaluate(c, shield, agent, GS_MODE_PRE, &ev), GS_OK) << gs_last_error();
  EXPECT_EQ(ev.episodes, 300u);
  ASSERT_EQ(gs_evaluate(c, shield, nullptr, GS_MODE_POST, &ev), GS_OK);
  EXPECT_EQ(ev.audit_failures, 0u);
  EXPECT_EQ(gs_evaluate(c, nullptr, nullptr, GS_MODE_POST, &ev), GS_ERR_INVALID_ARGUMENT);

  char* csv = nullptr;
  const double slice[2] = {NAN, NAN};
  ASSERT_EQ(gs_shield_export_map(shield, slice, 2, &csv), GS_OK);
  EXPECT_EQ(lines(take(csv)), 1u + 26u * 26u);

  gs_qtable_free(agent);
  gs_shield_free(loaded);
  gs_shield_free(shield);
  gs_config_free(c);
}

TEST(CApi, MismatchedShieldIsRejected) {
  gs_config* c = walk_config();
  gs_shield* shield = nullptr;
  ASSERT_EQ(gs_synthesize(c, nullptr, &shield, nullptr), GS_OK);
  const double g = 0.1;
  ASSERT_EQ(gs_config_set_gamma(c, &g, 1), GS_OK);
  gs_qtable* agent = nullptr;
  EXPECT_EQ(gs_learn(c, shield, GS_MODE_PRE, &agent), GS_ERR_MISMATCH);
  gs_shield_free(shield);
  gs_config_free(c);
}

TEST(CApi, TransitionCacheIsReused) {
  gs_config* c = walk_config();
  const std::string dir = temp("cache");
  std::filesystem::remove_all(dir);
  ASSERT_EQ(gs_config_set(c, "/cache_dir", ("\"" + dir + "\"").c_str()), GS_OK);
  gs_transitions* a = nullptr;
  gs_synthesis_report r1{}, r2{};
  ASSERT_EQ(gs_build_transitions(c, &a, &r1), GS_OK);
  EXPECT_EQ(r1.from_cache, 0);
  gs_transitions* b = nullptr;
  ASSERT_EQ(gs_build_transitions(c, &b, &r2), GS_OK);
  EXPECT_EQ(r2.from_cache, 1);
  EXPECT_EQ(r1.transitions, r2.transitions);
  gs_transitions_free(a);
  gs_transitions_free(b);
  gs_config_free(c);
}

TEST(CApi, SweepAndPostOptimizationCsv) {
  gs_config* c = walk_config();
  ASSERT_EQ(gs_config_set(c, "/evaluate/deterrences", "[0, 10]"), GS_OK);
  ASSERT_EQ(gs_config_set(c, "/evaluate/repetitions", "2"), GS_OK);
  ASSERT_EQ(gs_config_set(c, "/evaluate/trace_episodes", "50"), GS_OK);
  ASSERT_EQ(gs_config_set(c, "/evaluate/secondary_episodes", "100"), GS_OK);
  gs_shield* shield = nullptr;
  ASSERT_EQ(gs_synthesize(c, nullptr, &shield, nullptr), GS_OK);
  char* csv = nullptr;
  ASSERT_EQ(gs_deterrence_sweep(c, shield, &csv), GS_OK) << gs_last_error();
  EXPECT_EQ(lines(take(csv)), 1u + 2u * 3u * 2u);
  gs_qtable* agent = nullptr;
  ASSERT_EQ(gs_learn(c, nullptr, GS_MODE_NONE, &agent), GS_OK);
  ASSERT_EQ(gs_post_optimization(c, shield, agent, nullptr, &csv), GS_OK) << gs_last_error();
  EXPECT_EQ(lines(take(csv)), 1u + 4u);
  gs_qtable_free(agent);
  gs_shield_free(shield);
  gs_config_free(c);
}

TEST(CApi, AccuracyTable) {
  gs_config* c = nullptr;
  ASSERT_EQ(gs_config_default("bouncing_ball", &c), GS_OK);
  ASSERT_EQ(gs_config_set(c, "/accuracy/samples", "2000"), GS_OK);
  ASSERT_EQ(gs_config_set(c, "/accuracy/gammas", "[1.0]"), GS_OK);
  ASSERT_EQ(gs_config_set(c, "/accuracy/ns", "[1, 2]"), GS_OK);
  char* csv = nullptr;
  ASSERT_EQ(gs_accuracy(c, &csv), GS_OK) << gs_last_error();
  EXPECT_EQ(lines(take(csv)), 3u);
  gs_config_free(c);
}
