#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include <unistd.h>

using namespace icnn;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("icnn_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_raw(const fs::path &p, const std::string &s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

Matrix<double> gradient_image(std::size_t r, std::size_t c, double shift) {
  Matrix<double> m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      m(i, j) = std::fmod(shift + static_cast<double>(i * c + j) / (r * c), 1.0);
  return m;
}

ImageSet labeled_set(std::size_t zeros, std::size_t ones) {
  ImageSet s;
  s.grid = {2, 2};
  for (std::size_t k = 0; k < zeros + ones; ++k)
    s.images.push_back({Matrix<double>(2, 2, 0.5), k < zeros ? 0 : 1, "img" + std::to_string(k)});
  return s;
}

} // namespace

TEST(Pgm, BinaryRoundTrip) {
  TempDir t;
  Matrix<double> m(3, 4);
  for (std::size_t k = 0; k < 12; ++k) m.data()[k] = static_cast<double>(k * 20) / 255.0;
  write_pgm(t.path / "a.pgm", m);
  auto back = read_pgm(t.path / "a.pgm");
  ASSERT_EQ(back.rows(), 3u);
  ASSERT_EQ(back.cols(), 4u);
  for (std::size_t k = 0; k < 12; ++k) EXPECT_DOUBLE_EQ(back.data()[k], m.data()[k]);
}

TEST(Pgm, AsciiWithComments) {
  TempDir t;
  write_raw(t.path / "b.pgm", "P2\n# comment\n2 2\n255\n0 255\n# more\n51 102\n");
  auto m = read_pgm(t.path / "b.pgm");
  EXPECT_EQ(m.data(), (std::vector<double>{0.0, 1.0, 0.2, 0.4}));
}

TEST(Pgm, Errors) {
  TempDir t;
  write_raw(t.path / "c.pgm", "P6\n1 1\n255\nabc");
  EXPECT_THROW(read_pgm(t.path / "c.pgm"), DataError);
  write_raw(t.path / "d.pgm", "P5\n2 2\n255\nab");
  EXPECT_THROW(read_pgm(t.path / "d.pgm"), DataError);
  write_raw(t.path / "e.pgm", "P2\n1 1\n65535\n7\n");
  EXPECT_THROW(read_pgm(t.path / "e.pgm"), DataError);
  EXPECT_THROW(read_pgm(t.path / "missing.pgm"), DataError);
}

TEST(CsvImage, ScalesBy255) {
  TempDir t;
  write_raw(t.path / "m.csv", "0,255\n255,0\n");
  auto m = read_image(t.path / "m.csv");
  EXPECT_EQ(m.data(), (std::vector<double>{0.0, 1.0, 1.0, 0.0}));
  write_raw(t.path / "bad.csv", "0,256\n");
  EXPECT_THROW(read_image(t.path / "bad.csv"), DataError);
  write_raw(t.path / "ragged.csv", "0,1\n2\n");
  EXPECT_THROW(read_image(t.path / "ragged.csv"), DataError);
}

TEST(Images, LoadManifest) {
  TempDir t;
  write_pgm(t.path / "a.pgm", gradient_image(8, 8, 0.0));
  write_pgm(t.path / "b.pgm", gradient_image(8, 8, 0.3));
  write_manifest(t.path / "manifest.csv", {{"a.pgm", 1}, {"b.pgm", 0}});
  auto set = load_images(t.path / "manifest.csv");
  EXPECT_EQ(set.images.size(), 2u);
  EXPECT_EQ(set.grid, (GridShape{8, 8}));
  EXPECT_EQ(set.count(1), 1u);
  auto d = set.to_dataset();
  EXPECT_EQ(d.p(), 64u);
  EXPECT_EQ(d.response()[0], 1.0);
}

TEST(Images, DimensionMismatchNamesFile) {
  TempDir t;
  write_pgm(t.path / "a.pgm", gradient_image(8, 8, 0.0));
  write_pgm(t.path / "small.pgm", gradient_image(4, 4, 0.0));
  try {
    load_images(t.path, {{"a.pgm", 0}, {"small.pgm", 1}});
    FAIL() << "expected a dimension mismatch";
  } catch (const DataError &e) {
    EXPECT_NE(std::string(e.what()).find("small.pgm"), std::string::npos);
  }
}

TEST(Images, BadLabel) {
  TempDir t;
  write_raw(t.path / "m.csv", "path,label\na.pgm,2\n");
  EXPECT_THROW(read_manifest(t.path / "m.csv"), DataError);
}

TEST(Split, TableFourCounts) {
  auto set = labeled_set(2000, 576);
  auto parts = split(set, 60, 7);
  EXPECT_EQ(parts.insample.count(1), 516u);
  EXPECT_EQ(parts.insample.count(0), 1940u);
  EXPECT_EQ(parts.test.count(1), 60u);
  EXPECT_EQ(parts.test.count(0), 60u);
  std::set<std::string> seen;
  for (const auto &im : parts.insample.images) seen.insert(im.source);
  for (const auto &im : parts.test.images) EXPECT_EQ(seen.count(im.source), 0u);

  auto again = split(set, 60, 7);
  for (std::size_t k = 0; k < again.test.images.size(); ++k)
    EXPECT_EQ(again.test.images[k].source, parts.test.images[k].source);
  EXPECT_TRUE(split(set, 0, 1).test.images.empty());
  EXPECT_THROW(split(labeled_set(3, 1), 2, 1), DataError);
}

TEST(Augment, TableFourCounts) {
  auto parts = split(labeled_set(2000, 576), 60, 7);
  auto aug = augment(parts.insample, 5000, 0.05, 3);
  EXPECT_EQ(aug.count(0), 5000u);
  EXPECT_EQ(aug.count(1), 5000u);
  std::set<std::string> test_ids;
  for (const auto &im : parts.test.images) test_ids.insert(im.source);
  for (const auto &im : aug.images) {
    EXPECT_EQ(test_ids.count(im.source.substr(0, im.source.find('#'))), 0u);
    for (double v : im.pixels.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  for (std::size_t k = 0; k < parts.insample.images.size(); ++k)
    EXPECT_EQ(aug.images[k].source, parts.insample.images[k].source);
}

TEST(Augment, ZeroNoiseDuplicatesAndClamp) {
  ImageSet s;
  s.grid = {1, 2};
  s.images.push_back({Matrix<double>(1, 2, std::vector<double>{0.0, 1.0}), 0, "a"});
  s.images.push_back({Matrix<double>(1, 2, std::vector<double>{0.3, 0.7}), 1, "b"});
  auto dup = augment(s, 3, 0.0, 1);
  EXPECT_EQ(dup.images.size(), 6u);
  for (const auto &im : dup.images)
    EXPECT_EQ(im.pixels, im.label == 0 ? s.images[0].pixels : s.images[1].pixels);
  auto noisy = augment(s, 50, 2.0, 1);
  for (const auto &im : noisy.images)
    for (double v : im.pixels.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_THROW(augment(s, 0, 0.1, 1), ConfigError);
  EXPECT_THROW(augment(s, 3, -1.0, 1), ConfigError);
}

TEST(DatasetCsv, RoundTrip) {
  TempDir t;
  ParityModelSpec spec;
  spec.n_train = 20;
  spec.n_test = 5;
  auto d = generate(spec).train;
  write_dataset_csv(t.path / "d.csv", d);
  auto back = read_discrete_dataset_csv(t.path / "d.csv");
  EXPECT_EQ(back.features(), d.features());
  auto real = read_dataset_csv(t.path / "d.csv");
  EXPECT_EQ(real.p(), 36u);
  EXPECT_EQ(real.features()(3, 4), d.features()(3, 4));
  std::ifstream in(t.path / "d.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header + "\n", dataset_header(36));
}

TEST(DatasetCsv, Errors) {
  TempDir t;
  write_raw(t.path / "a.csv", "X1,Y\n0.5,2\n");
  EXPECT_THROW(read_dataset_csv(t.path / "a.csv"), DataError);
  write_raw(t.path / "b.csv", "X1,Y\nabc,1\n");
  EXPECT_THROW(read_dataset_csv(t.path / "b.csv"), DataError);
  write_raw(t.path / "c.csv", "X1,Y\n0.5,1,3\n");
  EXPECT_THROW(read_dataset_csv(t.path / "c.csv"), DataError);
  write_raw(t.path / "d.csv", "A,B\n0.5,1\n");
  EXPECT_THROW(read_dataset_csv(t.path / "d.csv"), DataError);
}
