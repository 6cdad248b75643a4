#include "stp/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace stp::io {

namespace {

constexpr std::array<char, 4> kTrackletMagic{'S', 'Y', 'T', 'P'};
constexpr std::array<char, 4> kRepMagic{'S', 'Y', 'R', 'P'};
constexpr std::array<char, 4> kMatrixMagic{'S', 'Y', 'D', 'M'};
constexpr const char* kManifestTag = "stp-manifest";
constexpr std::size_t kTrackletHeaderBytes = 4 + 1 + 4 + 4;

// Header-declared sizes come from untrusted input; saturate instead of wrapping.
std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return b > std::numeric_limits<std::uint64_t>::max() - a ? std::numeric_limits<std::uint64_t>::max() : a + b;
}

std::string describe(const fs::path& path) { return "'" + path.string() + "'"; }

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + describe(path));
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + describe(path));
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + describe(path));
}

// Little-endian encoder into a byte buffer.
class Writer {
 public:
  void magic(const std::array<char, 4>& m) { buf_.append(m.data(), m.size()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(checked_u32(s.size(), "string length"));
    buf_.append(s);
  }

  static std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::InvalidArgument, std::string(what) + " does not fit in 32 bits");
    }
    return static_cast<std::uint32_t>(v);
  }

  void write_to(const fs::path& path) const {
    auto out = open_out(path);
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    finish(out, path);
  }

 private:
  std::string buf_;
};

// Little-endian decoder that checks every read against the bytes left in the file.
class Reader {
 public:
  explicit Reader(const fs::path& path) : path_(path), in_(open_in(path)) {
    std::error_code ec;
    size_ = fs::file_size(path, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot stat " + describe(path));
  }

  std::uint64_t size() const { return size_; }
  std::uint64_t remaining() const { return size_ - offset_; }

  void require(std::uint64_t bytes) const {
    if (bytes > remaining()) {
      throw Error(ErrorCode::TruncatedFile, describe(path_) + ": expected at least " +
                                                std::to_string(offset_ + bytes) + " bytes, file has " +
                                                std::to_string(size_));
    }
  }

  void magic(const std::array<char, 4>& expected) {
    require(4);
    std::array<char, 4> got{};
    raw(got.data(), 4);
    if (got != expected) {
      throw Error(ErrorCode::BadMagic, describe(path_) + " does not start with '" +
                                           std::string(expected.data(), 4) + "'");
    }
  }

  void version() {
    const auto v = u8();
    if (v != kFormatVersion) {
      throw Error(ErrorCode::VersionUnsupported,
                  describe(path_) + ": version " + std::to_string(v) + " is not supported");
    }
  }

  std::uint8_t u8() {
    unsigned char b = 0;
    require(1);
    raw(reinterpret_cast<char*>(&b), 1);
    return b;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    require(4);
    raw(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    require(8);
    raw(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    require(n);
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  void expect_end() const {
    if (remaining() != 0) {
      throw Error(ErrorCode::ParseError,
                  describe(path_) + ": " + std::to_string(remaining()) + " trailing bytes after payload");
    }
  }

  const fs::path& path() const { return path_; }

 private:
  void raw(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorCode::IoFailure, "read failed for " + describe(path_));
    }
    offset_ += n;
  }

  fs::path path_;
  std::ifstream in_;
  std::uint64_t size_ = 0;
  std::uint64_t offset_ = 0;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

void check_label(const std::string& value, const char* field, std::size_t line) {
  if (value.find_first_of("\t\r\n") != std::string::npos) {
    throw Error(ErrorCode::ParseError,
                std::string(field) + " on line " + std::to_string(line) + " contains a tab or newline");
  }
}

void check_file_stem(const std::string& id) {
  if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\\t\r\n") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "tracklet id '" + id + "' is not usable as a file name");
  }
}

}  // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::Query: return "query";
    case Split::Gallery: return "gallery";
    case Split::Train: return "train";
  }
  return "gallery";
}

Split parse_split(const std::string& s) {
  if (s == "query") return Split::Query;
  if (s == "gallery") return Split::Gallery;
  if (s == "train") return Split::Train;
  throw Error(ErrorCode::ParseError, "unknown split '" + s + "'");
}

// Manifest ---------------------------------------------------------------

Manifest load_manifest(const fs::path& path, bool check_files) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "line 1: empty manifest");
  const auto header = split_fields(line, '\t');
  if (header.size() != 3 || header[0] != kManifestTag) {
    throw Error(ErrorCode::ParseError, "line 1: expected 'stp-manifest<TAB>1<TAB><feature_dim>'");
  }
  if (header[1] != std::to_string(kFormatVersion)) {
    throw Error(ErrorCode::VersionUnsupported, "manifest version " + header[1] + " is not supported");
  }
  Manifest m;
  {
    long long dim = 0;
    const auto& f = header[2];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), dim);
    if (ec != std::errc() || ptr != f.data() + f.size() || dim < 1) {
      throw Error(ErrorCode::ParseError, "line 1, field 3: feature_dim must be a positive integer");
    }
    m.feature_dim = static_cast<Eigen::Index>(dim);
  }

  std::set<std::string> paths;
  std::set<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line, '\t');
    if (fields.size() != 5) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 5 tab-separated fields, got " +
                                             std::to_string(fields.size()));
    }
    const char* names[] = {"tracklet_id", "identity", "camera", "split", "path"};
    for (std::size_t f = 0; f < 5; ++f) {
      if (f != 2 && fields[f].empty()) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ", field " + names[f] + ": must not be empty");
      }
      if (fields[f].find('\r') != std::string::npos) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ", field " + names[f] + ": carriage return");
      }
    }
    ManifestEntry e;
    e.tracklet_id = fields[0];
    e.identity = fields[1];
    e.camera = fields[2];
    try {
      e.split = parse_split(fields[3]);
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ", field split: unknown value '" + fields[3] + "'");
    }
    e.path = fields[4];
    if (!paths.insert(e.path.lexically_normal().generic_string()).second) {
      throw Error(ErrorCode::DuplicatePath, "line " + std::to_string(line_no) + ": " + fields[4]);
    }
    if (!ids.insert(e.tracklet_id).second) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": duplicate tracklet_id '" + e.tracklet_id + "'");
    }
    m.entries.push_back(std::move(e));
  }

  if (check_files) {
    for (const auto& e : m.entries) {
      const auto dim = peek_feature_dim(resolve(path, e));
      if (dim != m.feature_dim) {
        throw Error(ErrorCode::DimMismatchDeclaration,
                    "manifest declares " + std::to_string(m.feature_dim) + " features but " +
                        describe(e.path) + " has " + std::to_string(dim));
      }
    }
  }
  return m;
}

void save_manifest(const fs::path& path, const Manifest& m) {
  std::ostringstream os;
  os << kManifestTag << '\t' << static_cast<int>(kFormatVersion) << '\t' << m.feature_dim << '\n';
  for (const auto& e : m.entries) {
    check_label(e.tracklet_id, "tracklet_id", 0);
    check_label(e.identity, "identity", 0);
    check_label(e.camera, "camera", 0);
    os << e.tracklet_id << '\t' << e.identity << '\t' << e.camera << '\t' << to_string(e.split) << '\t'
       << e.path.generic_string() << '\n';
  }
  auto out = open_out(path);
  out << os.str();
  finish(out, path);
}

fs::path resolve(const fs::path& manifest_path, const ManifestEntry& entry) {
  if (entry.path.is_absolute()) return entry.path;
  return manifest_path.parent_path() / entry.path;
}

// Tracklet files ---------------------------------------------------------

FrameFeatureMatrix<double> load_tracklet_csv(const fs::path& path, Eigen::Index expected_cols) {
  auto in = open_in(path);
  std::vector<double> values;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++rows;
    const auto fields = split_fields(line, ',');
    const auto n = static_cast<Eigen::Index>(fields.size());
    if (cols < 0) {
      cols = n;
      if (expected_cols > 0 && cols != expected_cols) {
        throw Error(ErrorCode::ColumnCountMismatch, describe(path) + " line 1: " + std::to_string(cols) +
                                                        " columns, expected " + std::to_string(expected_cols));
      }
    } else if (n != cols) {
      throw Error(ErrorCode::RaggedRows, describe(path) + " line " + std::to_string(rows) + ": " +
                                             std::to_string(n) + " columns, previous rows have " +
                                             std::to_string(cols));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto token = trim(fields[c]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
        throw Error(ErrorCode::NonNumericToken, describe(path) + " line " + std::to_string(rows) + ", column " +
                                                    std::to_string(c + 1) + ": '" + token + "'");
      }
      if (!std::isfinite(v)) throw NonFiniteError(rows - 1, static_cast<Eigen::Index>(c));
      values.push_back(v);
    }
  }
  if (rows == 0) throw Error(ErrorCode::EmptyInput, describe(path) + " has no rows");
  return make_features<double>(rows, cols, values);
}

void save_tracklet_csv(const fs::path& path, const FrameFeatureMatrix<double>& features) {
  validate_features(features);
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      if (c) os << ',';
      os << features(r, c);
    }
    os << '\n';
  }
  auto out = open_out(path);
  out << os.str();
  finish(out, path);
}

FrameFeatureMatrix<double> load_tracklet_bin(const fs::path& path) {
  Reader in(path);
  in.magic(kTrackletMagic);
  in.version();
  const std::uint64_t rows = in.u32();
  const std::uint64_t cols = in.u32();
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::ParseError, describe(path) + ": header declares an empty matrix");
  }
  const std::uint64_t expected = saturating_add(kTrackletHeaderBytes, saturating_mul(rows * cols, 4));
  if (in.size() < expected) {
    throw Error(ErrorCode::TruncatedFile, describe(path) + ": expected " + std::to_string(expected) +
                                              " bytes, file has " + std::to_string(in.size()));
  }
  if (in.size() > expected) {
    throw Error(ErrorCode::ParseError, describe(path) + ": " + std::to_string(in.size() - expected) +
                                           " trailing bytes after payload");
  }

  FrameFeatureMatrix<double> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = in.f32();
      if (!std::isfinite(v)) throw NonFiniteError(r, c);
      m(r, c) = v;
    }
  }
  return m;
}

void save_tracklet_bin(const fs::path& path, const FrameFeatureMatrix<double>& features) {
  validate_features(features);
  Writer w;
  w.magic(kTrackletMagic);
  w.u8(kFormatVersion);
  w.u32(Writer::checked_u32(static_cast<std::size_t>(features.rows()), "row count"));
  w.u32(Writer::checked_u32(static_cast<std::size_t>(features.cols()), "column count"));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      const auto v = static_cast<float>(features(r, c));
      if (!std::isfinite(v)) throw NonFiniteError(r, c);  // overflowed the 32-bit range
      w.f32(v);
    }
  }
  w.write_to(path);
}

FrameFeatureMatrix<double> load_tracklet(const fs::path& path, Eigen::Index expected_cols) {
  if (path.extension() == ".csv") return load_tracklet_csv(path, expected_cols);
  auto m = load_tracklet_bin(path);
  if (expected_cols > 0 && m.cols() != expected_cols) {
    throw Error(ErrorCode::ColumnCountMismatch, describe(path) + ": " + std::to_string(m.cols()) +
                                                    " columns, expected " + std::to_string(expected_cols));
  }
  return m;
}

Eigen::Index peek_feature_dim(const fs::path& path) {
  if (path.extension() == ".csv") {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::EmptyInput, describe(path) + " has no rows");
    return static_cast<Eigen::Index>(split_fields(line, ',').size());
  }
  Reader in(path);
  in.magic(kTrackletMagic);
  in.version();
  in.u32();
  return static_cast<Eigen::Index>(in.u32());
}

// Representations ----------------------------------------------------------

void save_representation(const fs::path& path, const SymbolicRepresentation<double>& rep) {
  Writer w;
  w.magic(kRepMagic);
  w.u8(kFormatVersion);
  w.u32(Writer::checked_u32(static_cast<std::size_t>(rep.feature_dim()), "feature count"));
  w.u32(Writer::checked_u32(static_cast<std::size_t>(rep.t_samples()), "t_samples"));
  for (const auto& q : rep.per_feature()) {
    const auto& h = q.histogram();
    w.f64(h.lo());
    w.f64(h.hi());
    w.u32(Writer::checked_u32(static_cast<std::size_t>(h.bin_count()), "bin count"));
    for (Eigen::Index k = 0; k < h.bin_count(); ++k) w.f64(h.freqs()[k]);
  }
  w.write_to(path);
}

SymbolicRepresentation<double> load_representation(const fs::path& path) {
  Reader in(path);
  in.magic(kRepMagic);
  in.version();
  const std::uint32_t features = in.u32();
  const std::uint32_t t_samples = in.u32();
  if (features == 0 || t_samples == 0) {
    throw Error(ErrorCode::ParseError, describe(path) + ": feature count and t_samples must be positive");
  }
  // Each feature needs at least lo, hi, bin count and one frequency.
  in.require(static_cast<std::uint64_t>(features) * (8 + 8 + 4 + 8));
  std::vector<QuantileFunction<double>> per_feature;
  per_feature.reserve(features);
  for (std::uint32_t m = 0; m < features; ++m) {
    const double lo = in.f64();
    const double hi = in.f64();
    const std::uint32_t bins = in.u32();
    if (bins == 0) throw Error(ErrorCode::ParseError, describe(path) + ": feature " + std::to_string(m) + " has 0 bins");
    in.require(static_cast<std::uint64_t>(bins) * 8);
    Array<double> freqs(bins);
    for (std::uint32_t k = 0; k < bins; ++k) freqs[k] = in.f64();
    per_feature.emplace_back(FeatureHistogram<double>(lo, hi, std::move(freqs)));
  }
  in.expect_end();
  return SymbolicRepresentation<double>(std::move(per_feature), t_samples);
}

// Distance matrices ----------------------------------------------------------

void save_distance_matrix(const fs::path& path, const DistanceMatrix<double>& d,
                          const std::vector<std::string>& row_ids, const std::vector<std::string>& col_ids) {
  if (static_cast<Eigen::Index>(row_ids.size()) != d.rows() ||
      static_cast<Eigen::Index>(col_ids.size()) != d.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "id lists do not match the matrix shape");
  }
  Writer w;
  w.magic(kMatrixMagic);
  w.u8(kFormatVersion);
  w.u32(Writer::checked_u32(static_cast<std::size_t>(d.rows()), "row count"));
  w.u32(Writer::checked_u32(static_cast<std::size_t>(d.cols()), "column count"));
  for (const auto& id : row_ids) w.str(id);
  for (const auto& id : col_ids) w.str(id);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) w.f64(d(i, j));
  }
  w.write_to(path);
}

LabeledDistanceMatrix load_distance_matrix(const fs::path& path) {
  Reader in(path);
  in.magic(kMatrixMagic);
  in.version();
  const std::uint64_t rows = in.u32();
  const std::uint64_t cols = in.u32();
  // Every id costs at least its 4-byte length prefix.
  in.require(saturating_add((rows + cols) * 4, saturating_mul(rows * cols, 8)));
  LabeledDistanceMatrix out;
  out.row_ids.reserve(rows);
  out.col_ids.reserve(cols);
  for (std::uint64_t i = 0; i < rows; ++i) out.row_ids.push_back(in.str());
  for (std::uint64_t j = 0; j < cols; ++j) out.col_ids.push_back(in.str());
  in.require(saturating_mul(rows * cols, 8));
  out.distances.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < out.distances.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.distances.cols(); ++j) {
      const double v = in.f64();
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorCode::ParseError, describe(path) + ": entry (" + std::to_string(i) + ", " +
                                               std::to_string(j) + ") is not a finite nonnegative distance");
      }
      out.distances(i, j) = v;
    }
  }
  in.expect_end();
  return out;
}

// Representation sets -------------------------------------------------------

void save_representation_set(const fs::path& dir, const RepresentationSet& set) {
  if (set.tracklet_ids.size() != set.reps.size() || set.labels.size() != set.reps.size()) {
    throw Error(ErrorCode::ShapeMismatch, "representation set fields have different lengths");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + describe(dir));
  std::ostringstream os;
  for (std::size_t i = 0; i < set.reps.size(); ++i) {
    check_file_stem(set.tracklet_ids[i]);
    check_label(set.labels.ids[i], "identity", i + 1);
    check_label(set.labels.camera(i), "camera", i + 1);
    save_representation(dir / (set.tracklet_ids[i] + ".rep"), set.reps[i]);
    os << set.tracklet_ids[i] << '\t' << set.labels.ids[i] << '\t' << set.labels.camera(i) << '\n';
  }
  auto out = open_out(dir / kLabelsFile);
  out << os.str();
  finish(out, dir / kLabelsFile);
}

RepresentationSet load_representation_set(const fs::path& dir, const fs::path& labels_file) {
  const fs::path index = labels_file.empty() ? dir / kLabelsFile : labels_file;
  auto in = open_in(index);
  RepresentationSet set;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      throw Error(ErrorCode::ParseError, describe(index) + " line " + std::to_string(line_no) +
                                             ": expected tracklet_id<TAB>identity<TAB>camera");
    }
    check_file_stem(fields[0]);
    if (!seen.insert(fields[0]).second) {
      throw Error(ErrorCode::ParseError, describe(index) + " line " + std::to_string(line_no) +
                                             ": duplicate tracklet_id '" + fields[0] + "'");
    }
    set.tracklet_ids.push_back(fields[0]);
    set.labels.ids.push_back(fields[1]);
    set.labels.cameras.push_back(fields[2]);
    set.reps.push_back(load_representation(dir / (fields[0] + ".rep")));
  }
  return set;
}

}  // namespace stp::io
