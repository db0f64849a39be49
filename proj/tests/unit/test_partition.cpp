#include <gtest/gtest.h>

#include <set>

#include "gridshield/partition.hpp"
#include "gridshield/rng.hpp"

using namespace gridshield;

TEST(Partition, BoundaryBelongsToUpperCell) {
  PartitionSpec spec({0.0}, {10.0}, {0.5});
  EXPECT_EQ(spec.cell_of(State{1.0}), (CellId{2}));
}

TEST(Partition, FloorArithmetic2D) {
  PartitionSpec spec({0.0, -15.0}, {15.0, 15.0}, {1.0, 1.0});
  EXPECT_EQ(spec.cell_of(State{0.5, -0.3}), (CellId{0, 14}));
}

TEST(Partition, UpperFaceIsOutOfBounds) {
  PartitionSpec spec({0.0}, {10.0}, {0.5});
  try {
    spec.cell_of(State{10.0});
    FAIL() << "expected OutOfBounds";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfBounds);
  }
  EXPECT_FALSE(spec.try_index_of(State{-1e-9}).has_value());
}

TEST(Partition, CellBox) {
  PartitionSpec spec({0.0}, {10.0}, {0.5});
  auto box = spec.cell_box(CellId{2});
  EXPECT_DOUBLE_EQ(box.low[0], 1.0);
  EXPECT_DOUBLE_EQ(box.high[0], 1.5);

  PartitionSpec fine({0.0, 0.0}, {1.0, 1.0}, {0.02, 0.02});
  auto b = fine.cell_box(CellId{0, 0});
  EXPECT_DOUBLE_EQ(b.low[0], 0.0);
  EXPECT_DOUBLE_EQ(b.high[0], 0.02);
  EXPECT_DOUBLE_EQ(b.high[1], 0.02);
}

TEST(Partition, CellCounts) {
  EXPECT_EQ(PartitionSpec({0.0, -15.0}, {15.0, 15.0}, {0.02, 0.02}).cell_count(), 1125000u);
  EXPECT_EQ(PartitionSpec({0.0}, {1.0}, {0.5}).cell_count(), 2u);
  EXPECT_EQ(PartitionSpec({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {0.1, 0.1, 0.1}).cell_count(), 1000u);
}

TEST(Partition, IterateIsRowMajorAndComplete) {
  PartitionSpec spec({0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}, {0.5, 0.5, 1.0});
  CellIndex expected = 0;
  CellId previous;
  spec.iterate_cells([&](CellIndex ordinal, const CellId& id) {
    EXPECT_EQ(ordinal, expected);
    EXPECT_EQ(spec.ordinal(id), ordinal);
    EXPECT_EQ(spec.cell_id(ordinal), id);
    if (ordinal > 0) {
      // last dimension moves fastest
      if (id[2] != 0) {
        EXPECT_EQ(id[2], previous[2] + 1);
        EXPECT_EQ(id[1], previous[1]);
      }
    }
    previous = id;
    ++expected;
  });
  EXPECT_EQ(expected, spec.cell_count());
}

TEST(Partition, RandomRoundTripAndDisjointCover) {
  PartitionSpec spec({0.0, -15.0}, {15.0, 15.0}, {0.02, 0.02});
  Rng rng(7);
  for (int i = 0; i < 100000; ++i) {
    State s{uniform(rng, 0.0, 15.0), uniform(rng, -15.0, 15.0)};
    const CellId id = spec.cell_of(s);
    ASSERT_TRUE(spec.cell_box(id).contains(s));
    // neighbours never contain s
    for (std::size_t d = 0; d < 2; ++d) {
      for (int delta : {-1, 1}) {
        CellId other = id;
        other[d] += delta;
        if (spec.in_bounds(other)) {
          ASSERT_FALSE(spec.cell_box(other).contains(s));
        }
      }
    }
  }
}

TEST(Partition, SnapsSubUlpValuesOntoPlane) {
  PartitionSpec spec({0.0}, {1.0}, {0.1});
  // 0.3 is not representable; 0.1 * 3 lands just below it.
  EXPECT_EQ(spec.cell_of(State{0.1 * 3})[0], 3);
}

TEST(Partition, RejectsBadSpecs) {
  EXPECT_THROW(PartitionSpec({0.0}, {1.0}, {0.0}), Error);
  EXPECT_THROW(PartitionSpec({1.0}, {0.0}, {0.1}), Error);
  EXPECT_THROW(PartitionSpec({0.0, 0.0}, {1.0}, {0.1}), Error);
}
