#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pgdcd/datasets.hpp"
#include "pgdcd/errors.hpp"

using namespace pgdcd;

namespace {

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

bool same_data(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.size() != b.size() || a.labels != b.labels) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!bit_equal(a.images[i].data, b.images[i].data)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("synthetic datasets") {
  for (auto kind : {SyntheticKind::Blobs, SyntheticKind::Rings}) {
    SyntheticParams p;
    p.kind = kind;
    p.n = 103;
    p.dim = 5;
    p.classes = 4;
    p.seed = 8;
    const auto a = generate_synthetic_dataset(p);
    const auto b = generate_synthetic_dataset(p);
    CHECK(same_data(a, b));
    CHECK_NOTHROW(a.validate());
    std::vector<std::size_t> counts(4, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.labels[i] < 4);
      ++counts[a.labels[i]];
      for (double v : a.images[i].data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);
    p.seed = 9;
    CHECK_FALSE(same_data(a, generate_synthetic_dataset(p)));
  }
  SyntheticParams bad;
  bad.n = 0;
  CHECK_THROWS_AS(generate_synthetic_dataset(bad), std::invalid_argument);
  CHECK_THROWS_AS(parse_synthetic_kind("moons"), std::invalid_argument);
}

TEST_CASE("CSV round trip is bit-exact") {
  SyntheticParams p;
  p.n = 20;
  p.dim = 7;
  p.classes = 3;
  const auto data = generate_synthetic_dataset(p);
  const auto path = temp_path("pgdcd_data.csv");
  write_csv(data, path);
  const auto back = read_csv(path, 3);
  CHECK(same_data(data, back));
  CHECK(back.num_classes == 3);
}

TEST_CASE("CSV errors") {
  const auto path = temp_path("pgdcd_bad.csv");
  {
    std::ofstream(path) << "1,0.5,0.25\n0,0.5,oops\n";
  }
  CHECK_THROWS_AS(read_csv(path), FormatError);
  {
    std::ofstream(path) << "1,0.5,1.5\n";
  }
  CHECK_THROWS_AS(read_csv(path), FormatError);
  {
    std::ofstream(path) << "1,0.5,0.5\n0,0.5\n";
  }
  CHECK_THROWS_AS(read_csv(path), FormatError);
  {
    std::ofstream(path) << "5,0.5\n";
  }
  CHECK_THROWS_AS(read_csv(path, 3), FormatError);
}

TEST_CASE("IDX round trip and errors") {
  LabeledDataset data;
  data.name = "tiny";
  data.num_classes = 10;
  for (std::size_t i = 0; i < 6; ++i) {
    Vec v(4);
    for (std::size_t k = 0; k < 4; ++k) v[k] = static_cast<double>((i * 37 + k * 61) % 256) / 255.0;
    data.images.emplace_back(v, 0.0, 1.0);
    data.labels.push_back(i % 10);
  }
  const auto img = temp_path("pgdcd-images.idx");
  const auto lab = temp_path("pgdcd-labels.idx");
  write_idx(data, img, lab);
  const auto back = read_idx(img, lab, 10);
  CHECK(same_data(data, back));

  // Classic 3-D header (count x rows x cols) flattens.
  {
    std::ofstream os(img, std::ios::binary);
    const unsigned char hdr[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2};
    os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    const unsigned char px[] = {0, 255, 51, 102};
    os.write(reinterpret_cast<const char*>(px), sizeof(px));
    std::ofstream ol(lab, std::ios::binary);
    const unsigned char lh[] = {0, 0, 8, 1, 0, 0, 0, 1, 7};
    ol.write(reinterpret_cast<const char*>(lh), sizeof(lh));
  }
  const auto grid = read_idx(img, lab);
  CHECK(grid.dim() == 4);
  CHECK(grid.images[0].data == Vec{0.0, 1.0, 0.2, 0.4});
  CHECK(grid.labels[0] == 7);

  // Truncated payload.
  {
    std::ofstream os(img, std::ios::binary);
    const unsigned char hdr[] = {0, 0, 8, 2, 0, 0, 0, 1, 0, 0, 0, 9, 1, 2};
    os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  }
  try {
    read_idx(img, lab);
    FAIL("expected truncation error");
  } catch (const FormatError& e) {
    CHECK(e.code() == FormatErrc::Truncated);
  }
  // Wrong payload type.
  {
    std::ofstream os(img, std::ios::binary);
    const unsigned char hdr[] = {0, 0, 0x0d, 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0};
    os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  }
  CHECK_THROWS_AS(read_idx(img, lab), FormatError);
}
