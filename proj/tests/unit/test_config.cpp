#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "gridshield/config.hpp"

using namespace gridshield;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

}  // namespace

TEST(Config, DefaultsForEveryModel) {
  for (const auto& name : model_names()) {
    const RunConfig c = default_config(name);
    EXPECT_EQ(c.model, name);
    auto model = make_model(c);
    EXPECT_EQ(model->name(), name);
    EXPECT_EQ(c.gamma().size(), model->dim());
  }
  EXPECT_EQ(code_of([] { default_config("pendulum"); }), ErrorCode::ConfigError);
}

TEST(Config, DumpParseRoundTrip) {
  for (const auto& name : model_names()) {
    RunConfig c = default_config(name);
    c.seed = 99;
    c.scheme.n = 3;
    c.learn.deterrence = 10;
    const std::string text = dump_config(c);
    const RunConfig back = parse_config(text);
    EXPECT_EQ(dump_config(back), text);
    EXPECT_EQ(config_digest(back), config_digest(c));
  }
}

TEST(Config, PartialJsonTakesModelDefaults) {
  const RunConfig c = parse_config(R"({"model": "random_walk", "scheme": {"n": 2}})");
  EXPECT_EQ(c.model, "random_walk");
  EXPECT_EQ(c.scheme.n, 2u);
  EXPECT_EQ(c.gamma(), (std::vector<double>{0.05, 0.05}));
  EXPECT_EQ(c.learn.episodes, 4000u);
}

TEST(Config, RejectsBadInput) {
  EXPECT_EQ(code_of([] { parse_config(R"({"modle": "random_walk"})"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config(R"({"scheme": {"n": 0}})"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config(R"({"oob_policy": "maybe"})"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config(R"({"params": {"gamma": [0.1]}})"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config(R"({"evaluate": {"correction": "best"}})"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("{not json"); }), ErrorCode::ConfigError);
}

TEST(Config, DigestIgnoresRuntimeFields) {
  RunConfig a = default_config("bouncing_ball");
  RunConfig b = a;
  b.workers = 7;
  b.cache_dir = "/tmp/somewhere";
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.seed = 1;
  EXPECT_NE(config_digest(a), config_digest(b));
  // the transition digest only follows model and scheme
  EXPECT_EQ(transitions_digest(a), transitions_digest(b));
  b.scheme.n = 2;
  EXPECT_NE(transitions_digest(a), transitions_digest(b));
}

TEST(Config, SetGamma) {
  RunConfig c = default_config("cruise_control");
  c.set_gamma({1.0});
  EXPECT_EQ(c.gamma(), (std::vector<double>{1.0, 1.0, 1.0}));
  c.set_gamma({0.5, 0.5, 1.0});
  EXPECT_EQ(c.gamma()[2], 1.0);
  EXPECT_EQ(code_of([&] { c.set_gamma({1.0, 2.0}); }), ErrorCode::ConfigError);
}
