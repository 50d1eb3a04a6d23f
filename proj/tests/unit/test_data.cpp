#include "cl2o/app/config.hpp"
#include "cl2o/data/binary_io.hpp"
#include "cl2o/data/dataset.hpp"
#include "cl2o/data/results.hpp"
#include "cl2o/numcore/random.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>

#include <unistd.h>

using namespace cl2o;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("cl2o_test_data_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void put_be32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

// 3 images of 2x2 pixels, labels 7, 0, 3
std::string idx_images(std::uint32_t magic = 2051, std::uint32_t count = 3) {
  std::string b;
  put_be32(b, magic);
  put_be32(b, count);
  put_be32(b, 2);
  put_be32(b, 2);
  const unsigned char px[12] = {0, 255, 51, 102, 255, 255, 0, 0, 1, 2, 3, 4};
  b.append(reinterpret_cast<const char*>(px), 12);
  return b;
}

std::string idx_labels(std::uint32_t magic = 2049, std::uint32_t count = 3) {
  std::string b;
  put_be32(b, magic);
  put_be32(b, count);
  b.push_back(7);
  b.push_back(0);
  b.push_back(3);
  return b;
}

// Two-class logistic regression by plain gradient descent; returns training accuracy.
double logistic_train_accuracy(const Dataset& ds) {
  const Index n = ds.size(), p = ds.pixels();
  Vector w = Vector::Zero(p);
  double b = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vector gw = Vector::Zero(p);
    double gb = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double z = ds.images.row(i).dot(w) + b;
      const double r = 1.0 / (1.0 + std::exp(-z)) - ds.labels[i];
      gw += r * ds.images.row(i).transpose();
      gb += r;
    }
    w -= 0.1 * gw / double(n);
    b -= 0.1 * gb / double(n);
  }
  int correct = 0;
  for (Index i = 0; i < n; ++i) correct += ((ds.images.row(i).dot(w) + b) > 0.0) == (ds.labels[i] == 1);
  return double(correct) / double(n);
}

}  // namespace

TEST_CASE("IDX fixtures") {
  TempDir dir;
  bin::write_file_bytes(dir.file("img"), idx_images());
  bin::write_file_bytes(dir.file("lab"), idx_labels());
  const Dataset ds = load_idx(dir.file("img"), dir.file("lab"));
  REQUIRE(ds.size() == 3);
  CHECK(ds.pixels() == 4);
  CHECK(ds.labels == std::vector<int>{7, 0, 3});
  CHECK(ds.num_labels == 10);
  CHECK(ds.images(0, 0) == 0.0);
  CHECK(ds.images(0, 1) == 1.0);
  CHECK(ds.images(0, 2) == 0.2);
  CHECK(ds.images(2, 3) == 4.0 / 255.0);
  CHECK(ds.images.minCoeff() >= 0.0);
  CHECK(ds.images.maxCoeff() <= 1.0);

  const Dataset two = load_idx(dir.file("img"), dir.file("lab"), 2);
  CHECK(two.size() == 2);
  CHECK(two.labels == std::vector<int>{7, 0});

  CHECK(ds.content_hash() == load_idx(dir.file("img"), dir.file("lab")).content_hash());
  CHECK(ds.content_hash().size() == 16);
  CHECK(ds.content_hash() != two.content_hash());
}

TEST_CASE("malformed IDX files") {
  TempDir dir;
  bin::write_file_bytes(dir.file("lab"), idx_labels());
  bin::write_file_bytes(dir.file("img_magic"), idx_images(2049));
  CHECK_THROWS_AS(load_idx(dir.file("img_magic"), dir.file("lab")), FormatError);
  bin::write_file_bytes(dir.file("img"), idx_images());
  bin::write_file_bytes(dir.file("lab_magic"), idx_labels(2051));
  CHECK_THROWS_AS(load_idx(dir.file("img"), dir.file("lab_magic")), FormatError);
  bin::write_file_bytes(dir.file("lab_count"), idx_labels(2049, 2));
  CHECK_THROWS_AS(load_idx(dir.file("img"), dir.file("lab_count")), FormatError);
  bin::write_file_bytes(dir.file("img_short"), idx_images().substr(0, 20));
  CHECK_THROWS_AS(load_idx(dir.file("img_short"), dir.file("lab")), FormatError);
  bin::write_file_bytes(dir.file("img_header"), idx_images().substr(0, 6));
  CHECK_THROWS_AS(load_idx(dir.file("img_header"), dir.file("lab")), FormatError);
  CHECK_THROWS_AS(load_idx(dir.file("missing"), dir.file("lab")), Error);
}

TEST_CASE("synthetic classification data") {
  const Dataset ds = make_synthetic_classification(200, 50, 2, 10.0, 1);
  CHECK(ds.size() == 200);
  CHECK(ds.pixels() == 50);
  CHECK(ds.images.minCoeff() >= 0.0);
  CHECK(ds.images.maxCoeff() <= 1.0);
  CHECK(logistic_train_accuracy(ds) == 1.0);

  const Dataset ten = make_synthetic_classification(103, 8, 10, 0.7, 2);
  std::vector<int> counts(10, 0);
  for (int l : ten.labels) ++counts.at(static_cast<std::size_t>(l));
  CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);

  CHECK(make_synthetic_classification(40, 8, 4, 0.7, 3).content_hash() ==
        make_synthetic_classification(40, 8, 4, 0.7, 3).content_hash());
  CHECK(make_synthetic_classification(40, 8, 4, 0.7, 3).content_hash() !=
        make_synthetic_classification(40, 8, 4, 0.7, 4).content_hash());
  CHECK_THROWS_AS(make_synthetic_classification(3, 8, 4, 0.7, 0), InvalidArgument);
}

TEST_CASE("desk data falls back to synthetic images") {
  const DeskData dd = load_desk_data("/nonexistent", 30, 10, 5, 0.7);
  CHECK(dd.synthetic);
  CHECK(dd.train.size() == 30);
  CHECK(dd.eval.size() == 10);
  CHECK(dd.train.pixels() == 784);
}

TEST_CASE("dataset slices") {
  const Dataset ds = make_synthetic_classification(20, 4, 2, 1.0, 6);
  const Dataset s = ds.slice(5, 9);
  CHECK(s.size() == 4);
  CHECK(s.images.row(0) == ds.images.row(5));
  CHECK(s.labels[3] == ds.labels[8]);
  CHECK_THROWS_AS(ds.slice(5, 21), InvalidArgument);
}

TEST_CASE("CSV tables") {
  const CsvTable empty({"a", "b"});
  CHECK(empty.str() == "a,b\n");
  CHECK(CsvTable::parse(empty.str()).rows().empty());

  Rng rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  CsvTable t({"x"});
  std::vector<double> xs = {0.1, 1.0 / 3.0, std::numeric_limits<double>::min(), std::numeric_limits<double>::max(),
                            -0.0};
  for (int k = 0; k < 200; ++k) xs.push_back(u(rng) * std::pow(10.0, k % 30 - 15));
  for (double x : xs) t.add_row({CsvTable::cell(x)});
  const CsvTable back = CsvTable::parse(t.str());
  REQUIRE(back.rows().size() == xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(parse_double(back.rows()[i][0], "x") == xs[i]);
  CHECK(back.str() == t.str());
  CHECK_THROWS(t.add_row({"1", "2"}));
}

TEST_CASE("result files are byte-identical across writes") {
  TempDir dir;
  CsvTable t({"k", "v"});
  t.add_row({"a", CsvTable::cell(0.1)});
  write_results(t, dir.file("a.csv"));
  write_results(t, dir.file("b.csv"));
  CHECK(bin::read_file_bytes(dir.file("a.csv")) == bin::read_file_bytes(dir.file("b.csv")));
  KeyValues kv;
  kv.set("x", 0.25);
  kv.set("name", "run");
  write_results(kv, dir.file("a.txt"));
  CHECK(KeyValues::parse(bin::read_file_bytes(dir.file("a.txt"))).str() == kv.str());
}

TEST_CASE("key-value text") {
  const KeyValues kv = KeyValues::parse("# comment\n\n a = 1 \nb=two words\n");
  REQUIRE(kv.entries().size() == 2);
  CHECK(*kv.find("a") == "1");
  CHECK(*kv.find("b") == "two words");
  CHECK(kv.find("c") == nullptr);
  CHECK_THROWS(KeyValues::parse("a = 1\na = 2\n"));
  CHECK_THROWS(KeyValues::parse("no separator\n"));
}

TEST_CASE("number formatting") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(parse_double(format_double(0.1), "x") == 0.1);
  CHECK(std::isnan(parse_double(format_double(std::nan("")), "x")));
  CHECK_THROWS(parse_double("1.5abc", "x"));
  CHECK_THROWS(parse_double("", "x"));
}

TEST_CASE("run configuration") {
  const RunConfig def;
  for (const auto& k : config_registry()) CHECK(def.get(k.name) == k.default_value);
  const RunConfig parsed = RunConfig::parse("meta.epochs = 3\n");
  CHECK(parsed.get_size("meta.epochs") == 3);
  CHECK(parsed.hash() != def.hash());
  CHECK(RunConfig::parse(parsed.str()).str() == parsed.str());
  CHECK(RunConfig::parse(parsed.str()).hash() == parsed.hash());
  CHECK_THROWS_AS(RunConfig::parse("no.such.key = 1\n"), ConfigError);
  RunConfig c;
  CHECK_THROWS_AS(c.set("bogus", "1"), ConfigError);
  c.set("meta.epochs", "x");
  CHECK_THROWS_AS(c.get_size("meta.epochs"), ConfigError);
}
