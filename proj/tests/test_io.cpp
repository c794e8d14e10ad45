#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace sacp;
using sacp::test::code_of;
using sacp::test::slurp;
using sacp::test::TempDir;

namespace {

void write_container(const fs::path& dir, const std::string& meta, const std::vector<unsigned char>& payload) {
  fs::create_directories(dir);
  std::ofstream(dir / "meta.json") << meta;
  std::ofstream(dir / "payload.bin", std::ios::binary).write(reinterpret_cast<const char*>(payload.data()),
                                                             static_cast<std::streamsize>(payload.size()));
}

std::vector<unsigned char> le_f64(const std::vector<double>& xs) {
  std::vector<unsigned char> out;
  for (double x : xs) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
  }
  return out;
}

ProbabilityGrid random_grid(Extent ext, std::size_t k, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> v;
  for (std::size_t i = 0; i < ext.pixels(); ++i) {
    const auto p = sacp::test::random_simplex(rng, k);
    v.insert(v.end(), p.begin(), p.end());
  }
  return ProbabilityGrid(ext, k, v);
}

}  // namespace

TEST(GridIo, LoadsHandWrittenUniformProbabilities) {
  TempDir tmp("io_uniform");
  write_container(tmp / "p",
                  R"({"height": 2, "width": 2, "classes": 2, "dtype": "f64", "layout": "row-major", "kind": "probabilities"})",
                  le_f64(std::vector<double>(8, 0.5)));
  const auto grid = std::get<ProbabilityGrid>(load_grid(tmp / "p", GridKind::Probabilities));
  EXPECT_EQ(grid.height(), 2u);
  EXPECT_EQ(grid.num_classes(), 2u);
  for (double v : grid.values()) EXPECT_EQ(v, 0.5);
}

TEST(GridIo, LabelEqualToKIsRejected) {
  TempDir tmp("io_label_k");
  std::vector<unsigned char> payload{0, 0, 0, 0, 3, 0, 0, 0};  // labels {0, 3}
  write_container(tmp / "l", R"({"height": 1, "width": 2, "classes": 3, "dtype": "i32", "layout": "row-major", "kind": "labels"})",
                  payload);
  EXPECT_EQ(code_of([&] { load_labels(tmp / "l"); }), ErrorCode::InvariantViolation);
}

TEST(GridIo, HeaderPayloadMismatch) {
  TempDir tmp("io_mismatch");
  write_container(tmp / "p",
                  R"({"height": 2, "width": 2, "classes": 2, "dtype": "f64", "layout": "row-major", "kind": "probabilities"})",
                  le_f64(std::vector<double>(7, 0.5)));
  EXPECT_EQ(code_of([&] { load_probabilities(tmp / "p"); }), ErrorCode::HeaderPayloadMismatch);
}

TEST(GridIo, MissingFile) {
  TempDir tmp("io_missing");
  EXPECT_EQ(code_of([&] { load_probabilities(tmp / "nope"); }), ErrorCode::MissingFile);
  fs::create_directories(tmp / "half");
  std::ofstream(tmp / "half" / "meta.json")
      << R"({"height": 1, "width": 1, "classes": 1, "dtype": "u8", "layout": "row-major", "kind": "mask"})";
  EXPECT_EQ(code_of([&] { load_mask(tmp / "half"); }), ErrorCode::MissingFile);
}

TEST(GridIo, WrongKindOrDtype) {
  TempDir tmp("io_kind");
  save_grid(SplitMask({1, 1}, {Role::Test}), tmp / "m");
  EXPECT_EQ(code_of([&] { load_labels(tmp / "m"); }), ErrorCode::InvariantViolation);
  write_container(tmp / "p", R"({"height": 1, "width": 1, "classes": 1, "dtype": "u8", "layout": "row-major", "kind": "probabilities"})",
                  {1});
  EXPECT_EQ(code_of([&] { load_probabilities(tmp / "p"); }), ErrorCode::InvariantViolation);
}

TEST(GridIo, RoundTripIsBitIdentical) {
  TempDir tmp("io_roundtrip");
  const auto grid = random_grid({3, 3}, 4, 5);
  save_grid(grid, tmp / "a");
  const auto loaded = load_probabilities(tmp / "a");
  EXPECT_EQ(loaded, grid);
  save_grid(loaded, tmp / "b");
  EXPECT_EQ(slurp(tmp / "a" / "payload.bin"), slurp(tmp / "b" / "payload.bin"));
  EXPECT_EQ(slurp(tmp / "a" / "meta.json"), slurp(tmp / "b" / "meta.json"));
  EXPECT_EQ(slurp(tmp / "a" / "payload.bin").size(), 3u * 3u * 4u * 8u);
}

TEST(GridIo, FloatPayloadsWidenToDouble) {
  TempDir tmp("io_f32");
  const auto grid = random_grid({4, 5}, 3, 9);
  save_grid(grid, tmp / "f", Dtype::F32);
  const auto loaded = load_probabilities(tmp / "f");
  for (std::size_t i = 0; i < grid.values().size(); ++i) {
    EXPECT_EQ(loaded.values()[i], static_cast<double>(static_cast<float>(grid.values()[i])));
  }
}

TEST(GridIo, PayloadIsLittleEndianRowMajor) {
  TempDir tmp("io_le");
  save_grid(LabelGrid({1, 2}, 300, {1, 258}), tmp / "l");
  EXPECT_EQ(slurp(tmp / "l" / "payload.bin"), (std::vector<unsigned char>{1, 0, 0, 0, 2, 1, 0, 0}));
}

TEST(GridIo, SaveToUnwritablePathFails) {
  TempDir tmp("io_unwritable");
  std::ofstream(tmp / "file") << "x";
  const auto grid = random_grid({2, 2}, 2, 1);
  EXPECT_EQ(code_of([&] { save_grid(grid, tmp / "file" / "sub"); }), ErrorCode::IoFailure);
}

TEST(GridIo, MaskRoundTripKeepsRoleCounts) {
  TempDir tmp("io_mask");
  SplitMask mask({2, 3}, {Role::Ignore, Role::Train, Role::Cal, Role::Test, Role::Test, Role::Cal});
  save_grid(mask, tmp / "m");
  const auto loaded = load_mask(tmp / "m");
  for (auto r : {Role::Ignore, Role::Train, Role::Cal, Role::Test}) EXPECT_EQ(loaded.count(r), mask.count(r));
  EXPECT_EQ(loaded, mask);
}

TEST(GridIo, LoadingDoesNotTouchFiles) {
  TempDir tmp("io_readonly");
  save_grid(random_grid({2, 3}, 3, 2), tmp / "p");
  const auto before = slurp(tmp / "p" / "payload.bin");
  const auto t0 = fs::last_write_time(tmp / "p" / "payload.bin");
  for (int i = 0; i < 3; ++i) load_probabilities(tmp / "p");
  EXPECT_EQ(slurp(tmp / "p" / "payload.bin"), before);
  EXPECT_EQ(fs::last_write_time(tmp / "p" / "payload.bin"), t0);
}

TEST(GridIo, CsvLabelsAndMask) {
  TempDir tmp("io_csv");
  std::ofstream(tmp / "labels.csv") << "0,1,-1\n2, 2,0\n";
  std::ofstream(tmp / "mask.csv") << "0,1,2\r\n3,3,2\r\n";
  const auto labels = load_labels(tmp / "labels.csv", 3);
  EXPECT_EQ(labels.extent(), (Extent{2, 3}));
  EXPECT_EQ(labels.at(1, 1), 2);
  EXPECT_EQ(labels.at(0, 2), kUnlabeled);
  const auto mask = load_mask(tmp / "mask.csv");
  EXPECT_EQ(mask.at(0, 2), Role::Cal);
  EXPECT_EQ(mask.count(Role::Test), 2u);

  std::ofstream(tmp / "ragged.csv") << "0,1\n2\n";
  EXPECT_EQ(code_of([&] { load_mask(tmp / "ragged.csv"); }), ErrorCode::HeaderPayloadMismatch);
  std::ofstream(tmp / "badcode.csv") << "0,4\n";
  EXPECT_EQ(code_of([&] { load_mask(tmp / "badcode.csv"); }), ErrorCode::InvariantViolation);
  EXPECT_EQ(code_of([&] { load_labels(tmp / "labels.csv", 2); }), ErrorCode::InvariantViolation);
}

TEST(GridIo, ScoresAndSetsRoundTrip) {
  TempDir tmp("io_scores");
  ScoreField field({1, 3}, 2, {0.25, 0.5, 0.0, 0.0, 1.5, 2.0}, {1, 0, 1});
  save_grid(field, tmp / "s");
  EXPECT_TRUE(load_scores(tmp / "s").identical(field));

  auto sets = sacp::test::sets_from({1, 3}, 3, {{0}, {}, {0, 1, 2}});
  save_grid(sets, tmp / "c");
  EXPECT_EQ(load_sets(tmp / "c"), sets);
}
