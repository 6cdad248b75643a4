#include <doctest.h>

#include "testkit/testkit.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace stp;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an stp::Error");
  return ErrorCode::InvalidArgument;
}

FrameFeatureMatrix<double> float_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  FrameFeatureMatrix<double> m = testkit::random_matrix(rng, rows, cols, 3.0);
  return m.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

}  // namespace

TEST_CASE("tracklet csv loads rows and columns") {
  const auto dir = testkit::temp_dir("csv");
  write_bytes(dir / "a.csv", "1,2\n3,4\n");
  const auto m = io::load_tracklet_csv(dir / "a.csv", 2);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 2.0);
  CHECK(m(1, 0) == 3.0);
  CHECK(m(1, 1) == 4.0);
  fs::remove_all(dir);
}

TEST_CASE("tracklet csv errors") {
  const auto dir = testkit::temp_dir("csv_err");
  write_bytes(dir / "ragged.csv", "1,2\n3\n");
  try {
    io::load_tracklet_csv(dir / "ragged.csv", 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RaggedRows);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  write_bytes(dir / "text.csv", "1,abc\n");
  CHECK(code_of([&] { io::load_tracklet_csv(dir / "text.csv", 2); }) == ErrorCode::NonNumericToken);
  write_bytes(dir / "wide.csv", "1,2,3\n");
  CHECK(code_of([&] { io::load_tracklet_csv(dir / "wide.csv", 2); }) == ErrorCode::ColumnCountMismatch);
  write_bytes(dir / "nan.csv", "1,nan\n");
  CHECK(code_of([&] { io::load_tracklet_csv(dir / "nan.csv", 2); }) == ErrorCode::NonFiniteValue);
  write_bytes(dir / "empty.csv", "");
  CHECK(code_of([&] { io::load_tracklet_csv(dir / "empty.csv", 2); }) == ErrorCode::EmptyInput);
  fs::remove_all(dir);
}

TEST_CASE("binary tracklet round trip is bit exact") {
  const auto dir = testkit::temp_dir("bin");
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = float_matrix(rng, 1 + trial * 3, 1 + trial % 7);
    io::save_tracklet_bin(dir / "t.bin", m);
    const auto back = io::load_tracklet_bin(dir / "t.bin");
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK(std::memcmp(back.data(), m.data(), sizeof(double) * static_cast<std::size_t>(m.size())) == 0);
  }
  fs::remove_all(dir);
}

TEST_CASE("binary tracklet layout") {
  const auto dir = testkit::temp_dir("layout");
  FrameFeatureMatrix<double> m(1, 2);
  m << 1.0, -2.0;
  io::save_tracklet_bin(dir / "t.bin", m);
  const auto bytes = read_bytes(dir / "t.bin");
  const std::string expected("SYTP\x01\x01\x00\x00\x00\x02\x00\x00\x00\x00\x00\x80\x3f\x00\x00\x00\xc0", 21);
  CHECK(bytes == expected);
  fs::remove_all(dir);
}

TEST_CASE("binary tracklet corruption is rejected") {
  const auto dir = testkit::temp_dir("corrupt");
  std::mt19937_64 rng(72);
  io::save_tracklet_bin(dir / "ok.bin", float_matrix(rng, 4, 3));
  const auto good = read_bytes(dir / "ok.bin");

  auto bad_magic = good;
  bad_magic[0] = 'X';
  write_bytes(dir / "magic.bin", bad_magic);
  CHECK(code_of([&] { io::load_tracklet_bin(dir / "magic.bin"); }) == ErrorCode::BadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  write_bytes(dir / "version.bin", bad_version);
  CHECK(code_of([&] { io::load_tracklet_bin(dir / "version.bin"); }) == ErrorCode::VersionUnsupported);

  write_bytes(dir / "short.bin", good.substr(0, good.size() - 5));
  try {
    io::load_tracklet_bin(dir / "short.bin");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TruncatedFile);
    const std::string what = e.what();
    CHECK(what.find(std::to_string(good.size())) != std::string::npos);
    CHECK(what.find(std::to_string(good.size() - 5)) != std::string::npos);
  }

  // Header claiming a huge payload fails before any allocation.
  auto huge = good.substr(0, 13);
  huge[5] = huge[6] = huge[7] = huge[8] = '\xff';
  huge[9] = huge[10] = huge[11] = huge[12] = '\xff';
  write_bytes(dir / "huge.bin", huge);
  CHECK(code_of([&] { io::load_tracklet_bin(dir / "huge.bin"); }) == ErrorCode::TruncatedFile);

  write_bytes(dir / "long.bin", good + "xx");
  CHECK(code_of([&] { io::load_tracklet_bin(dir / "long.bin"); }) == ErrorCode::ParseError);
  fs::remove_all(dir);
}

TEST_CASE("binary and csv cross-load agree to float precision") {
  const auto dir = testkit::temp_dir("cross");
  std::mt19937_64 rng(73);
  const auto m = testkit::random_matrix(rng, 12, 5, 10.0);
  io::save_tracklet_bin(dir / "t.bin", m);
  io::save_tracklet_csv(dir / "t.csv", m);
  const auto b = io::load_tracklet(dir / "t.bin", 5);
  const auto c = io::load_tracklet(dir / "t.csv", 5);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const auto fb = static_cast<float>(b.data()[i]);
    const auto fc = static_cast<float>(c.data()[i]);
    CHECK(std::abs(fb - fc) <= std::abs(std::nextafter(fc, 2.0f * fc + 1.0f) - fc));
  }
  CHECK(c == m);  // full precision text
  fs::remove_all(dir);
}

TEST_CASE("manifest load and validation") {
  const auto dir = testkit::temp_dir("manifest");
  FrameFeatureMatrix<double> m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  io::save_tracklet_bin(dir / "a.bin", m);
  write_bytes(dir / "m.tsv", "stp-manifest\t1\t3\na0\tidA\tcam1\tquery\ta.bin\n");
  const auto man = io::load_manifest(dir / "m.tsv");
  CHECK(man.feature_dim == 3);
  REQUIRE(man.entries.size() == 1);
  CHECK(man.entries[0].identity == "idA");
  CHECK(man.entries[0].split == io::Split::Query);
  CHECK(io::resolve(dir / "m.tsv", man.entries[0]) == dir / "a.bin");

  write_bytes(dir / "dup.tsv", "stp-manifest\t1\t3\na0\tidA\t\tquery\ta.bin\na1\tidA\t\tgallery\ta.bin\n");
  CHECK(code_of([&] { io::load_manifest(dir / "dup.tsv", false); }) == ErrorCode::DuplicatePath);

  write_bytes(dir / "dim.tsv", "stp-manifest\t1\t4\na0\tidA\t\tquery\ta.bin\n");
  CHECK(code_of([&] { io::load_manifest(dir / "dim.tsv"); }) == ErrorCode::DimMismatchDeclaration);

  write_bytes(dir / "bad.tsv", "stp-manifest\t1\t3\na0\tidA\tquery\ta.bin\n");
  try {
    io::load_manifest(dir / "bad.tsv", false);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  write_bytes(dir / "split.tsv", "stp-manifest\t1\t3\na0\tidA\t\tprobe\ta.bin\n");
  CHECK(code_of([&] { io::load_manifest(dir / "split.tsv", false); }) == ErrorCode::ParseError);
  write_bytes(dir / "hdr.tsv", "manifest\t1\t3\n");
  CHECK(code_of([&] { io::load_manifest(dir / "hdr.tsv", false); }) == ErrorCode::ParseError);
  fs::remove_all(dir);
}

TEST_CASE("generated manifest round trips bit exactly") {
  const auto dir = testkit::temp_dir("manifest_rt");
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> pick(0, 2);
  io::Manifest m;
  m.feature_dim = 32;
  for (int i = 0; i < 100; ++i) {
    io::ManifestEntry e;
    e.tracklet_id = "t" + std::to_string(i);
    e.identity = "person " + std::to_string(pick(rng) * 100 + i % 7);
    e.camera = pick(rng) == 0 ? "" : "cam" + std::to_string(pick(rng));
    e.split = static_cast<io::Split>(pick(rng));
    e.path = "feat/" + e.tracklet_id + (pick(rng) == 0 ? ".csv" : ".bin");
    m.entries.push_back(e);
  }
  io::save_manifest(dir / "a.tsv", m);
  const auto loaded = io::load_manifest(dir / "a.tsv", false);
  CHECK(loaded == m);
  io::save_manifest(dir / "b.tsv", loaded);
  CHECK(read_bytes(dir / "a.tsv") == read_bytes(dir / "b.tsv"));
  fs::remove_all(dir);
}

TEST_CASE("representation files round trip and match recomputation") {
  const auto dir = testkit::temp_dir("rep");
  std::mt19937_64 rng(62);
  testkit::HistogramShape shape;
  shape.allow_empty_bins = true;
  shape.point_mass_probability = 0.1;
  for (int trial = 0; trial < 10; ++trial) {
    const auto rep = testkit::random_representation(rng, 1 + trial, 16 + trial, shape);
    io::save_representation(dir / "r.rep", rep);
    const auto back = io::load_representation(dir / "r.rep");
    CHECK(back == rep);
    CHECK((back.sampled() == rep.sampled()).all());
  }

  const auto f = testkit::random_matrix(rng, 30, 6);
  const auto pooled = pool_features(f, PoolingConfig::sqrt(32));
  io::save_representation(dir / "p.rep", pooled);
  const auto loaded = io::load_representation(dir / "p.rep");
  CHECK(w1_sampled(loaded, pooled) == 0.0);

  const auto bytes = read_bytes(dir / "p.rep");
  write_bytes(dir / "short.rep", bytes.substr(0, bytes.size() - 3));
  CHECK(code_of([&] { io::load_representation(dir / "short.rep"); }) == ErrorCode::TruncatedFile);
  auto magic = bytes;
  magic[2] = 'Q';
  write_bytes(dir / "magic.rep", magic);
  CHECK(code_of([&] { io::load_representation(dir / "magic.rep"); }) == ErrorCode::BadMagic);
  // Corrupt one frequency so the masses no longer sum to one.
  auto mass = bytes;
  mass[13 + 8 + 8 + 4 + 7] ^= 0x10;
  write_bytes(dir / "mass.rep", mass);
  CHECK(code_of([&] { io::load_representation(dir / "mass.rep"); }) == ErrorCode::InvalidHistogram);
  fs::remove_all(dir);
}

TEST_CASE("distance matrix files round trip") {
  const auto dir = testkit::temp_dir("dm");
  std::mt19937_64 rng(63);
  std::vector<testkit::Rep> q;
  std::vector<testkit::Rep> g;
  for (int i = 0; i < 3; ++i) q.push_back(testkit::random_representation(rng, 2, 8));
  for (int i = 0; i < 4; ++i) g.push_back(testkit::random_representation(rng, 2, 8));
  const auto d = distance_matrix(q, g, DistanceMode::Sampled);
  io::save_distance_matrix(dir / "d.dm", d, {"q0", "q1", "q2"}, {"g0", "g1", "g2", "g3"});
  const auto back = io::load_distance_matrix(dir / "d.dm");
  CHECK((back.distances.array() == d.array()).all());
  CHECK(back.row_ids == std::vector<std::string>{"q0", "q1", "q2"});
  CHECK(back.col_ids.size() == 4);
  const auto bytes = read_bytes(dir / "d.dm");
  write_bytes(dir / "short.dm", bytes.substr(0, bytes.size() - 1));
  CHECK(code_of([&] { io::load_distance_matrix(dir / "short.dm"); }) == ErrorCode::TruncatedFile);
  CHECK_THROWS_AS(io::save_distance_matrix(dir / "x.dm", d, {"q0"}, {"g0"}), Error);
  fs::remove_all(dir);
}

TEST_CASE("representation sets round trip through a directory") {
  const auto dir = testkit::temp_dir("set");
  std::mt19937_64 rng(64);
  io::RepresentationSet set;
  for (int i = 0; i < 4; ++i) {
    set.tracklet_ids.push_back("t" + std::to_string(i));
    set.labels.ids.push_back("id" + std::to_string(i / 2));
    set.labels.cameras.push_back(i % 2 ? "c1" : "");
    set.reps.push_back(testkit::random_representation(rng, 3, 8));
  }
  io::save_representation_set(dir / "reps", set);
  const auto back = io::load_representation_set(dir / "reps");
  CHECK(back.tracklet_ids == set.tracklet_ids);
  CHECK(back.labels.ids == set.labels.ids);
  CHECK(back.labels.cameras == set.labels.cameras);
  REQUIRE(back.reps.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.reps[i] == set.reps[i]);

  set.tracklet_ids[0] = "../escape";
  CHECK_THROWS_AS(io::save_representation_set(dir / "bad", set), Error);
  fs::remove_all(dir);
}
