#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "gridshield/io.hpp"
#include "gridshield/safety_game.hpp"

using namespace gridshield;

namespace {

MostPermissiveStrategy ball_shield(TransitionSystem* keep = nullptr) {
  BouncingBall bb;
  auto ts = build_transition_system(bb, bb.partition({0.5, 0.5}), {2, RandomnessPolicy::WorstCase, 1});
  auto strat = most_permissive(ts, solve(ts, SafetyPredicate::of_model(bb)));
  if (keep) *keep = std::move(ts);
  return strat;
}

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gridshield_io_" + std::to_string(::getpid()) + "_" + name);
}

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "no error raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a64(std::string_view("")), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64(std::string_view("a")), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64(std::string_view("foobar")), 0x85944171f73967e8ULL);
}

TEST(ShieldFile, RoundTripAndLayout) {
  const auto strat = ball_shield();
  const Bytes bytes = encode_shield(strat);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SHLD");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 2);  // dim
  EXPECT_TRUE(decode_shield(bytes) == strat);
  const auto header = peek_header(bytes);
  EXPECT_TRUE(header.spec == strat.spec());
  ASSERT_EQ(header.actions.size(), 2u);
  EXPECT_EQ(header.actions[1].name, "hit");
  // one byte per cell, then the 8-byte checksum; the oob byte precedes the masks
  const std::size_t cells = strat.spec().cell_count();
  ASSERT_GT(bytes.size(), cells + 9);
  EXPECT_TRUE(std::equal(strat.masks().begin(), strat.masks().end(), bytes.end() - 8 - cells));
  EXPECT_EQ(bytes[bytes.size() - 9 - cells], 0);  // Forbid
}

TEST(ShieldFile, CorruptionIsDetected) {
  Bytes bytes = encode_shield(ball_shield());
  Bytes flipped = bytes;
  flipped[flipped.size() - 20] ^= 0x01;
  expect_code(ErrorCode::FormatError, [&] { decode_shield(flipped); });
  Bytes truncated(bytes.begin(), bytes.end() - 3);
  expect_code(ErrorCode::FormatError, [&] { decode_shield(truncated); });
  Bytes wrong = bytes;
  wrong[0] = 'X';
  expect_code(ErrorCode::FormatError, [&] { decode_shield(wrong); });
}

TEST(TransitionFile, RoundTrip) {
  TransitionSystem ts(PartitionSpec({0.0}, {1.0}, {1.0}), {{0, "x"}});
  ball_shield(&ts);
  const SupportScheme scheme{2, RandomnessPolicy::WorstCase, 1};
  const Bytes bytes = encode_transitions(ts, scheme, 0xfeedULL);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HSTS");
  const auto back = decode_transitions(bytes);
  EXPECT_TRUE(back.ts == ts);
  EXPECT_EQ(back.digest, 0xfeedULL);
  EXPECT_EQ(back.scheme.n, 2u);
  EXPECT_EQ(encode_transitions(back.ts, back.scheme, back.digest), bytes);
}

TEST(QTableFile, RoundTrip) {
  BouncingBall bb;
  QTable q(bb.partition({1.0, 1.0}), bb.actions(), -0.25);
  q.value(3, 1) = 42.5;
  q.visit(3, 1);
  const Bytes bytes = encode_qtable(q);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HSQT");
  const QTable back = decode_qtable(bytes);
  EXPECT_TRUE(back == q);
  expect_code(ErrorCode::FormatError, [&] { decode_shield(bytes); });
}

TEST(Files, WriteReadAndErrors) {
  const auto path = temp("shield.shld");
  const Bytes bytes = encode_shield(ball_shield());
  write_file(path, bytes);
  EXPECT_EQ(read_file(path), bytes);
  std::filesystem::remove(path);
  expect_code(ErrorCode::IoError, [&] { read_file(path); });
  expect_code(ErrorCode::IoError, [&] { write_file("/nonexistent-dir/x/y.bin", bytes); });
}
